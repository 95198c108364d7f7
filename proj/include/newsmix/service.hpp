#pragma once

#include "newsmix/abtest.hpp"
#include "newsmix/event_log.hpp"
#include "newsmix/harness.hpp"
#include "newsmix/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace newsmix {

enum class SourceKind { Bandit, SimilarityUser, SimilarityItem, Deep, Random };

inline SourceKind source_kind_from_string(std::string_view s) {
    if (s == "bandit") return SourceKind::Bandit;
    if (s == "similarity_user") return SourceKind::SimilarityUser;
    if (s == "similarity_item") return SourceKind::SimilarityItem;
    if (s == "deep") return SourceKind::Deep;
    if (s == "random") return SourceKind::Random;
    throw std::invalid_argument("unknown source kind '" + std::string(s) + "'");
}

inline const char* to_string(SourceKind kind) {
    switch (kind) {
        case SourceKind::Bandit: return "bandit";
        case SourceKind::SimilarityUser: return "similarity_user";
        case SourceKind::SimilarityItem: return "similarity_item";
        case SourceKind::Deep: return "deep";
        case SourceKind::Random: return "random";
    }
    return "?";
}

struct SourceSpec {
    SourceKind kind = SourceKind::Bandit;
    double weight = 1.0;
};

struct VariantSpec {
    std::string name;
    bool use_segments = false;
    MixStrategy strategy = MixStrategy::WeightedAverage;
    std::vector<SourceSpec> sources;
};

struct ServiceConfig {
    std::string listen_address = "127.0.0.1";
    int port = 8080;
    double latency_budget_ms = 50.0;
    std::size_t default_k = 10;
    std::int64_t profile_window_seconds = 30LL * 86400;
    std::uint64_t seed = 1;
    std::string event_log_path; // empty = do not persist events

    Experiment experiment;
    std::vector<VariantSpec> variants;
    BanditBank::Config bandit;

    std::string embeddings_path;
    std::string segments_path;
    std::string deep_model_path;
    std::string catalog_path; // event-log-shaped article metadata, optional

    void validate() const {
        if (!(latency_budget_ms > 0.0)) {
            throw std::invalid_argument("ServiceConfig: latency budget must be positive");
        }
        if (default_k < 1) throw std::invalid_argument("ServiceConfig: default k must be >= 1");
        experiment.validate();
        for (const auto& v : experiment.variants) {
            const bool found = std::any_of(variants.begin(), variants.end(),
                                           [&](const VariantSpec& s) { return s.name == v.name; });
            if (!found) {
                throw std::invalid_argument("ServiceConfig: variant '" + v.name +
                                            "' has no pipeline definition");
            }
        }
        for (const auto& spec : variants) {
            if (spec.sources.empty()) {
                throw std::invalid_argument("ServiceConfig: variant '" + spec.name +
                                            "' has no sources");
            }
        }
    }
};

struct RecommendResponse {
    ScoredList list;
    std::string variant;
    SegmentId segment = 0;
    bool fallback = false;
    double latency_ms = 0.0;
    std::uint64_t snapshot_epoch = 0;
};

struct MetricsSnapshot {
    std::uint64_t requests_total = 0;
    std::uint64_t fallbacks = 0;
    std::uint64_t events_ingested = 0;
    std::uint64_t events_rejected = 0;
    double latency_p50_ms = 0.0;
    double latency_p90_ms = 0.0;
    double latency_p99_ms = 0.0;
    std::uint64_t snapshot_epoch = 0;
    struct VariantMetrics {
        std::uint64_t requests = 0;
        std::uint64_t events = 0;
        double kpi_sum = 0.0;

        std::optional<double> mean_kpi() const {
            if (events == 0) return std::nullopt;
            return kpi_sum / static_cast<double>(events);
        }
    };
    std::map<std::string, VariantMetrics> variants;
};

// The serving core: variant resolution, per-variant pipelines over hot-swap
// snapshots, online bandit state, bounded-latency ranking with bandit-only
// fallback, and monitoring counters. Transport-agnostic; the HTTP layer in
// http_server.hpp is a thin adapter.
class RecoService {
public:
    explicit RecoService(ServiceConfig config) : config_(std::move(config)) {
        config_.validate();
        for (const auto& spec : config_.variants) {
            const bool needs_bank = std::any_of(spec.sources.begin(), spec.sources.end(),
                                                [](const SourceSpec& s) {
                                                    return s.kind == SourceKind::Bandit;
                                                });
            auto& runtime = runtimes_[spec.name];
            runtime.spec = spec;
            if (needs_bank) runtime.bank = std::make_shared<BanditBank>(config_.bandit);
        }

        ServingState initial;
        initial.epoch = 1;
        initial.embeddings = std::make_shared<EmbeddingTable>(
            config_.embeddings_path.empty() ? EmbeddingTable(1)
                                            : EmbeddingTable::load(config_.embeddings_path));
        if (!config_.segments_path.empty()) {
            initial.segments =
                std::make_shared<SegmentModel>(SegmentModel::load(config_.segments_path));
        }
        if (!config_.deep_model_path.empty()) {
            initial.deep = std::make_shared<DeepModel>(DeepModel::load(config_.deep_model_path));
        }
        initial.catalog = std::make_shared<ArticleCatalog>();
        if (!config_.catalog_path.empty()) {
            initial.catalog = std::make_shared<ArticleCatalog>(
                load_article_catalog(config_.catalog_path));
        }
        install_state(std::move(initial));

        if (!config_.event_log_path.empty()) {
            log_out_.open(config_.event_log_path, std::ios::binary | std::ios::app);
            if (!log_out_) {
                throw std::runtime_error("cannot open event log '" + config_.event_log_path + "'");
            }
        }
        history_ = std::make_unique<ClickHistory>(config_.profile_window_seconds);
    }

    const ServiceConfig& config() const { return config_; }

    // Article metadata file: one `article=<id> published=<ts> length=<n>`
    // record per line.
    static ArticleCatalog load_article_catalog(const std::string& path) {
        ArticleCatalog catalog;
        const std::string text = read_text_file(path);
        std::size_t line_no = 0;
        for (const auto line : split_view(text, '\n')) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const auto tokens = split_view(line, ' ');
                if (tokens.size() != 3) throw std::invalid_argument("expected 3 fields");
                Article article;
                article.id = unescape_field(expect_field(tokens[0], "article"));
                article.published_at = parse_int64(expect_field(tokens[1], "published"));
                article.length = parse_int64(expect_field(tokens[2], "length"));
                catalog.put(std::move(article));
            } catch (const std::exception& ex) {
                throw ParseError(line_no, ex.what());
            }
        }
        return catalog;
    }

    static std::string serialize_article_catalog(const ArticleCatalog& catalog) {
        std::map<ArticleId, const Article*> ordered;
        for (const auto& [id, article] : catalog.articles()) ordered.emplace(id, &article);
        std::string out;
        for (const auto& [id, article] : ordered) {
            out += "article=" + escape_field(id) + " published=" +
                   std::to_string(article->published_at) + " length=" +
                   std::to_string(article->length) + "\n";
        }
        return out;
    }

    RecommendResponse recommend(const UserId& user, const std::vector<ArticleId>& candidates,
                                std::size_t k, Timestamp now) {
        const auto started = Clock::now();
        require_valid_id(user, "recommend.user");
        if (candidates.empty()) throw std::invalid_argument("recommend: empty candidate set");
        for (const auto& id : candidates) require_valid_id(id, "recommend.candidate");
        if (k < 1) throw std::invalid_argument("recommend: k must be >= 1");

        const std::shared_ptr<const ServingState> state = current_state();
        const std::string& variant_name = assign_variant(user, config_.experiment);
        VariantRuntime& runtime = runtimes_.at(variant_name);

        RecContext ctx;
        {
            std::shared_lock lock(history_mutex_);
            ctx = build_context(user, now, *history_, *state->embeddings, state->segments.get(),
                                runtime.spec.use_segments);
        }

        // Stateless per-request seed: identical request + frozen state =>
        // identical response.
        std::uint64_t seed = fnv1a64(user, config_.seed);
        for (const auto& id : candidates) seed = fnv1a64(id, seed);
        seed = fnv1a64(&now, sizeof(now), seed);
        Rng rng(seed);

        const auto deadline =
            started + std::chrono::duration_cast<Clock::duration>(
                          std::chrono::duration<double, std::milli>(config_.latency_budget_ms));

        PipelineResult result;
        {
            std::shared_lock bank_lock(runtime.bank_mutex);
            const Pipeline pipeline = build_pipeline(runtime, *state);
            result = pipeline.run(ctx, candidates, rng, deadline);
        }

        RecommendResponse response;
        response.list = result.list.top(k);
        response.variant = variant_name;
        response.segment = ctx.segment;
        response.fallback = result.fallback;
        response.snapshot_epoch = state->epoch;
        response.latency_ms =
            std::chrono::duration<double, std::milli>(Clock::now() - started).count();

        {
            std::lock_guard lock(metrics_mutex_);
            metrics_.requests_total += 1;
            metrics_.variants[variant_name].requests += 1;
            if (result.fallback) metrics_.fallbacks += 1;
            latencies_.push_back(response.latency_ms);
            if (latencies_.size() > kLatencyWindow) {
                latencies_.erase(latencies_.begin(),
                                 latencies_.begin() + (latencies_.size() - kLatencyWindow));
            }
        }
        return response;
    }

    // Appends the event to the log, folds it into the user's history and the
    // owning variant's bandit. At-least-once: duplicate deliveries are
    // applied twice by design.
    void ingest(const InteractionEvent& event) {
        try {
            event.validate();
        } catch (const std::exception&) {
            std::lock_guard lock(metrics_mutex_);
            metrics_.events_rejected += 1;
            throw;
        }

        const std::string variant_name =
            event.variant.empty() ? assign_variant(event.user, config_.experiment) : event.variant;
        const auto it = runtimes_.find(variant_name);
        if (it == runtimes_.end()) {
            std::lock_guard lock(metrics_mutex_);
            metrics_.events_rejected += 1;
            throw std::invalid_argument("ingest: unknown variant '" + variant_name + "'");
        }
        VariantRuntime& runtime = it->second;

        const std::shared_ptr<const ServingState> state = current_state();
        SegmentId segment = 0;
        {
            // Segment resolved against the history before this event, the
            // same view recommend() used when it served the impression.
            std::shared_lock lock(history_mutex_);
            if (runtime.spec.use_segments && state->segments) {
                segment = assign_segment(
                    history_->profile_at(event.user, event.timestamp, *state->embeddings),
                    *state->segments);
            }
        }
        if (runtime.bank) {
            std::unique_lock bank_lock(runtime.bank_mutex);
            // The service owns ordering: a slightly late event is applied at
            // the arm's current clock rather than rejected.
            InteractionEvent adjusted = event;
            if (const ArmStats* arm = runtime.bank->find(segment, event.article)) {
                adjusted.timestamp = std::max(adjusted.timestamp, arm->last_update);
            }
            runtime.bank->record(segment, adjusted);
        }
        {
            std::unique_lock lock(history_mutex_);
            history_->observe(event);
        }
        {
            std::lock_guard lock(log_mutex_);
            if (log_out_.is_open()) {
                log_out_ << format_event(event) << '\n';
                log_out_.flush();
            }
        }
        {
            std::lock_guard lock(metrics_mutex_);
            metrics_.events_ingested += 1;
            auto& vm = metrics_.variants[variant_name];
            vm.events += 1;
            vm.kpi_sum += event.kpi_value;
        }
    }

    MetricsSnapshot metrics_snapshot() const {
        std::lock_guard lock(metrics_mutex_);
        MetricsSnapshot snapshot = metrics_;
        snapshot.snapshot_epoch = current_state()->epoch;
        std::vector<double> sorted = latencies_;
        std::sort(sorted.begin(), sorted.end());
        snapshot.latency_p50_ms = percentile(sorted, 0.50);
        snapshot.latency_p90_ms = percentile(sorted, 0.90);
        snapshot.latency_p99_ms = percentile(sorted, 0.99);
        return snapshot;
    }

    enum class SnapshotKind { Embeddings, Segments, DeepModel, Catalog };

    static SnapshotKind snapshot_kind_from_string(std::string_view s) {
        if (s == "embeddings") return SnapshotKind::Embeddings;
        if (s == "segments") return SnapshotKind::Segments;
        if (s == "deep-model") return SnapshotKind::DeepModel;
        if (s == "catalog") return SnapshotKind::Catalog;
        throw std::invalid_argument("unknown snapshot kind '" + std::string(s) + "'");
    }

    // Validates the replacement fully before atomically publishing a new
    // serving state; a bad file leaves the old snapshot serving.
    void swap_snapshot(SnapshotKind kind, const std::string& path) {
        ServingState next = *current_state();
        switch (kind) {
            case SnapshotKind::Embeddings:
                next.embeddings = std::make_shared<EmbeddingTable>(EmbeddingTable::load(path));
                break;
            case SnapshotKind::Segments:
                next.segments = std::make_shared<SegmentModel>(SegmentModel::load(path));
                break;
            case SnapshotKind::DeepModel:
                next.deep = std::make_shared<DeepModel>(DeepModel::load(path));
                break;
            case SnapshotKind::Catalog:
                next.catalog = std::make_shared<ArticleCatalog>(load_article_catalog(path));
                break;
        }
        check_consistent(next);
        install_state(std::move(next));
    }

    const std::string& variant_for(const UserId& user) const {
        return assign_variant(user, config_.experiment);
    }

    std::uint64_t snapshot_epoch() const { return current_state()->epoch; }

    // Test hook: every component of the state a request would serve from.
    struct StateView {
        std::uint64_t epoch;
        std::shared_ptr<const EmbeddingTable> embeddings;
        std::shared_ptr<const SegmentModel> segments;
        std::shared_ptr<const DeepModel> deep;
    };

    StateView state_view() const {
        const auto state = current_state();
        return {state->epoch, state->embeddings, state->segments, state->deep};
    }

    void save_bank(const std::string& variant, const std::string& path) const {
        const auto it = runtimes_.find(variant);
        if (it == runtimes_.end() || !it->second.bank) {
            throw std::invalid_argument("save_bank: variant '" + variant + "' has no bandit");
        }
        std::shared_lock lock(it->second.bank_mutex);
        it->second.bank->save(path);
    }

private:
    using Clock = std::chrono::steady_clock;
    static constexpr std::size_t kLatencyWindow = 8192;

    struct ServingState {
        std::uint64_t epoch = 0;
        std::shared_ptr<const EmbeddingTable> embeddings;
        std::shared_ptr<const SegmentModel> segments;
        std::shared_ptr<const DeepModel> deep;
        std::shared_ptr<const ArticleCatalog> catalog;
    };

    struct VariantRuntime {
        VariantSpec spec;
        std::shared_ptr<BanditBank> bank;
        mutable std::shared_mutex bank_mutex;
    };

    static double percentile(const std::vector<double>& sorted, double q) {
        if (sorted.empty()) return 0.0;
        const double index = q * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(index);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = index - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    }

    static void check_consistent(const ServingState& state) {
        if (state.segments && state.embeddings &&
            state.segments->dimension() != state.embeddings->dimension()) {
            throw std::invalid_argument("snapshot: segment/embedding dimension mismatch");
        }
        if (state.deep && state.embeddings) {
            const std::size_t expected = 2 * state.embeddings->dimension() + kAuxiliaryFeatures;
            if (state.deep->config().input_dim != expected) {
                throw std::invalid_argument("snapshot: deep model input dimension mismatch");
            }
        }
    }

    std::shared_ptr<const ServingState> current_state() const {
        std::shared_lock lock(state_mutex_);
        return state_;
    }

    void install_state(ServingState next) {
        auto shared = std::make_shared<const ServingState>(std::move(next));
        std::unique_lock lock(state_mutex_);
        ServingState stamped = *shared;
        stamped.epoch = ++epoch_counter_;
        state_ = std::make_shared<const ServingState>(std::move(stamped));
    }

    Pipeline build_pipeline(const VariantRuntime& runtime, const ServingState& state) const {
        std::vector<Pipeline::Source> sources;
        for (const auto& spec : runtime.spec.sources) {
            switch (spec.kind) {
                case SourceKind::Bandit:
                    sources.push_back(
                        {std::make_shared<BanditRecommender>(runtime.bank), spec.weight, true});
                    break;
                case SourceKind::SimilarityUser:
                    sources.push_back({std::make_shared<SimilarityRecommender>(
                                           state.embeddings, SimilarityMode::UserToItem),
                                       spec.weight, false});
                    break;
                case SourceKind::SimilarityItem:
                    sources.push_back({std::make_shared<SimilarityRecommender>(
                                           state.embeddings, SimilarityMode::ItemToItem),
                                       spec.weight, false});
                    break;
                case SourceKind::Deep:
                    if (state.deep) {
                        sources.push_back({std::make_shared<DeepRecommender>(
                                               state.deep, state.embeddings, state.catalog),
                                           spec.weight, false});
                    }
                    break;
                case SourceKind::Random:
                    sources.push_back({std::make_shared<RandomRecommender>(), spec.weight, false});
                    break;
            }
        }
        if (sources.empty()) {
            throw std::runtime_error("variant '" + runtime.spec.name +
                                     "' has no constructible source (missing snapshot?)");
        }
        return Pipeline(std::move(sources), runtime.spec.strategy);
    }

    ServiceConfig config_;
    std::map<std::string, VariantRuntime> runtimes_;

    mutable std::shared_mutex state_mutex_;
    std::shared_ptr<const ServingState> state_;
    std::uint64_t epoch_counter_ = 0;

    mutable std::shared_mutex history_mutex_;
    std::unique_ptr<ClickHistory> history_;

    std::mutex log_mutex_;
    std::ofstream log_out_;

    mutable std::mutex metrics_mutex_;
    MetricsSnapshot metrics_;
    std::vector<double> latencies_;
};

} // namespace newsmix
