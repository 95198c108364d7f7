#pragma once

#include "newsmix/bandit.hpp"
#include "newsmix/domain.hpp"
#include "newsmix/ensemble.hpp"
#include "newsmix/predictors.hpp"
#include "newsmix/similarity.hpp"

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace newsmix {

// Everything a model may need to score one request. Absent fields simply
// disable the models that depend on them.
struct RecContext {
    UserId user;
    std::optional<Vector> profile;      // trailing-window mean embedding
    std::optional<ArticleId> anchor;    // current article for item-to-item
    SegmentId segment = 0;
    Timestamp now = 0;
};

// One scoring model inside a pipeline. Returns nullopt when the context
// lacks what the model needs (cold user, no anchor); the mixer then treats
// the model as absent for this request.
class Recommender {
public:
    virtual ~Recommender() = default;
    virtual const std::string& name() const = 0;
    virtual std::optional<ScoredList> rank(const RecContext& ctx,
                                           const std::vector<ArticleId>& candidates,
                                           Rng& rng) const = 0;
};

class BanditRecommender final : public Recommender {
public:
    explicit BanditRecommender(std::shared_ptr<const BanditBank> bank)
        : bank_(std::move(bank)), name_("bandit") {}

    const std::string& name() const override { return name_; }

    std::optional<ScoredList> rank(const RecContext& ctx, const std::vector<ArticleId>& candidates,
                                   Rng& rng) const override {
        return bank_->rank(ctx.segment, candidates, rng, ctx.now);
    }

private:
    std::shared_ptr<const BanditBank> bank_;
    std::string name_;
};

enum class SimilarityMode { UserToItem, ItemToItem };

class SimilarityRecommender final : public Recommender {
public:
    SimilarityRecommender(std::shared_ptr<const EmbeddingTable> table, SimilarityMode mode)
        : table_(std::move(table)),
          mode_(mode),
          name_(mode == SimilarityMode::UserToItem ? "similarity-user" : "similarity-item") {}

    const std::string& name() const override { return name_; }

    std::optional<ScoredList> rank(const RecContext& ctx, const std::vector<ArticleId>& candidates,
                                   Rng&) const override {
        const Vector* reference = nullptr;
        if (mode_ == SimilarityMode::UserToItem) {
            if (!ctx.profile) return std::nullopt;
            reference = &*ctx.profile;
        } else {
            if (!ctx.anchor) return std::nullopt;
            reference = table_->find(*ctx.anchor);
            if (reference == nullptr) return std::nullopt;
        }
        return similarity_rank(*reference, candidates, *table_);
    }

private:
    std::shared_ptr<const EmbeddingTable> table_;
    SimilarityMode mode_;
    std::string name_;
};

class DeepRecommender final : public Recommender {
public:
    DeepRecommender(std::shared_ptr<const DeepModel> model,
                    std::shared_ptr<const EmbeddingTable> table,
                    std::shared_ptr<const ArticleCatalog> catalog)
        : model_(std::move(model)),
          table_(std::move(table)),
          catalog_(std::move(catalog)),
          name_("deep") {}

    const std::string& name() const override { return name_; }

    std::optional<ScoredList> rank(const RecContext& ctx, const std::vector<ArticleId>& candidates,
                                   Rng&) const override {
        if (!ctx.profile) return std::nullopt;
        return deep_rank(*model_, *ctx.profile, candidates, *table_, *catalog_, ctx.now);
    }

private:
    std::shared_ptr<const DeepModel> model_;
    std::shared_ptr<const EmbeddingTable> table_;
    std::shared_ptr<const ArticleCatalog> catalog_;
    std::string name_;
};

class RandomRecommender final : public Recommender {
public:
    RandomRecommender() : name_("random") {}

    const std::string& name() const override { return name_; }

    std::optional<ScoredList> rank(const RecContext&, const std::vector<ArticleId>& candidates,
                                   Rng& rng) const override {
        if (candidates.empty()) throw std::invalid_argument("random rank: empty candidate set");
        std::vector<ArticleId> ordered = candidates;
        std::sort(ordered.begin(), ordered.end());
        ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
        std::vector<ScoredItem> items;
        items.reserve(ordered.size());
        for (const auto& id : ordered) items.push_back({id, rng.uniform()});
        return ScoredList(std::move(items), "random");
    }

private:
    std::string name_;
};

struct PipelineResult {
    ScoredList list;
    bool fallback = false;              // deadline fired, bandit-only answer
    std::vector<std::string> models_used;
};

// A weighted set of recommenders plus a mixing strategy. A single source
// passes through unmixed. When a deadline is given and expires before all
// sources are scored, the pipeline answers with the bandit ranking alone,
// exactly as a bandit-only pipeline would have (the bandit is always scored
// first, against the same rng stream).
class Pipeline {
public:
    struct Source {
        std::shared_ptr<Recommender> model;
        double weight = 1.0;
        bool is_bandit = false;
    };

    Pipeline() = default;

    Pipeline(std::vector<Source> sources, MixStrategy strategy)
        : sources_(std::move(sources)), strategy_(strategy) {
        if (sources_.empty()) throw std::invalid_argument("Pipeline: no sources");
        // Bandit first: it is both the freshest signal and the deadline
        // fallback, so it must consume the rng stream first.
        std::stable_sort(sources_.begin(), sources_.end(),
                         [](const Source& a, const Source& b) { return a.is_bandit > b.is_bandit; });
    }

    using Clock = std::chrono::steady_clock;

    PipelineResult run(const RecContext& ctx, const std::vector<ArticleId>& candidates, Rng& rng,
                       std::optional<Clock::time_point> deadline = std::nullopt) const {
        if (candidates.empty()) throw std::invalid_argument("Pipeline: empty candidate set");

        std::vector<ScoredList> lists;
        std::vector<double> weights;
        std::vector<std::string> used;
        std::optional<ScoredList> bandit_list;

        for (const auto& source : sources_) {
            if (source.weight <= 0.0 && sources_.size() > 1) continue;
            if (!source.is_bandit && deadline && Clock::now() > *deadline && bandit_list) {
                return {*bandit_list, true, {sources_.front().model->name()}};
            }
            auto list = source.model->rank(ctx, candidates, rng);
            if (!list) continue;
            if (source.is_bandit && !bandit_list) bandit_list = *list;
            lists.push_back(std::move(*list));
            weights.push_back(source.weight);
            used.push_back(source.model->name());
        }
        if (lists.empty()) {
            // Nothing can score this request (e.g. a cold user on a pure
            // similarity variant): serve a uniform-random ranking rather
            // than failing the request.
            std::vector<ArticleId> ordered = candidates;
            std::sort(ordered.begin(), ordered.end());
            ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());
            std::vector<ScoredItem> items;
            items.reserve(ordered.size());
            for (const auto& id : ordered) items.push_back({id, rng.uniform()});
            return {ScoredList(std::move(items), "cold-fallback"), false, {"cold-fallback"}};
        }
        if (lists.size() == 1) return {std::move(lists.front()), false, std::move(used)};

        if (deadline && Clock::now() > *deadline && bandit_list) {
            return {*bandit_list, true, {sources_.front().model->name()}};
        }
        if (strategy_ == MixStrategy::WeightedAverage) {
            return {weighted_average_mix(lists, weights), false, std::move(used)};
        }
        double total = 0.0;
        for (const double w : weights) total += w;
        for (double& w : weights) w /= total;
        return {proportional_random_mix(lists, weights, candidates.size(), rng), false,
                std::move(used)};
    }

    const std::vector<Source>& sources() const { return sources_; }
    MixStrategy strategy() const { return strategy_; }

private:
    std::vector<Source> sources_;
    MixStrategy strategy_ = MixStrategy::WeightedAverage;
};

// One A/B variant's serving stack: its pipeline, its own bandit state, and
// whether user segmentation is enabled for it.
struct VariantPipeline {
    std::string name;
    Pipeline pipeline;
    std::shared_ptr<BanditBank> bank; // null when the pipeline has no bandit
    bool use_segments = false;
};

// Assembles the per-request context from the shared user state. Segment 0
// (global) is used when segmentation is off or the user is cold.
inline RecContext build_context(const UserId& user, Timestamp now, const ClickHistory& history,
                                const EmbeddingTable& table, const SegmentModel* segments,
                                bool use_segments) {
    RecContext ctx;
    ctx.user = user;
    ctx.now = now;
    ctx.profile = history.profile_at(user, now, table);
    ctx.anchor = history.last_click(user);
    ctx.segment = use_segments && segments != nullptr ? assign_segment(ctx.profile, *segments) : 0;
    return ctx;
}

} // namespace newsmix
