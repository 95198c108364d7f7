#pragma once

#include "newsmix/abtest.hpp"
#include "newsmix/simulator.hpp"

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace newsmix {

// Everything trained offline from a warmup log.
struct TrainedModels {
    std::shared_ptr<EmbeddingTable> embeddings;
    std::shared_ptr<SegmentModel> segments;
    std::shared_ptr<DeepModel> deep;
    std::shared_ptr<ArticleCatalog> catalog;
};

struct TrainingConfig {
    Item2VecConfig item2vec{.dimension = 16, .window = 4, .negatives = 5, .epochs = 8,
                            .learning_rate = 0.05, .seed = 1};
    std::size_t segment_count = 4;
    std::size_t kmeans_max_iters = 50;
    DeepModelConfig deep{.input_dim = 0, // filled in from the embedding dimension
                         .hidden = 32,
                         .learning_rate = 0.1,
                         .epochs = 12,
                         .batch_size = 64,
                         .seed = 1};
    bool kpi_weighting = true;
    std::int64_t profile_window_seconds = 30LL * kSecondsPerDay;
    std::uint64_t seed = 1;
};

// Fig. 1-style offline pipeline: sessions -> item embeddings -> user
// profiles -> k-means segments, then the click model on top.
inline TrainedModels train_models_from_log(const std::vector<InteractionEvent>& warmup,
                                           const ArticleCatalog& catalog, TrainingConfig config) {
    TrainedModels models;
    models.catalog = std::make_shared<ArticleCatalog>(catalog);

    auto sessions = extract_click_sessions(warmup);
    config.item2vec.seed ^= config.seed;
    auto embedding_run = train_item_embeddings(sessions, config.item2vec);
    models.embeddings = std::make_shared<EmbeddingTable>(std::move(embedding_run.table));

    // Profiles at the end of the warmup window, one per user with at least
    // one embedded click.
    ClickHistory history(config.profile_window_seconds);
    Timestamp warmup_end = 0;
    std::set<UserId> users;
    for (const auto& e : warmup) {
        history.observe(e);
        warmup_end = std::max(warmup_end, e.timestamp);
        users.insert(e.user);
    }
    std::vector<Vector> profiles;
    for (const auto& user : users) {
        if (auto profile = history.profile_at(user, warmup_end, *models.embeddings)) {
            profiles.push_back(std::move(*profile));
        }
    }
    const std::size_t k = std::min(config.segment_count, profiles.size());
    if (k == 0) throw std::runtime_error("train_models_from_log: no warm users to segment");
    auto clustering = kmeans(profiles, k, config.kmeans_max_iters, config.seed ^ 0x5eed);
    models.segments = std::make_shared<SegmentModel>(std::move(clustering.model));

    TrainingSetOptions options;
    options.kpi_weighting = config.kpi_weighting;
    options.seed = config.seed ^ 0xba1a;
    options.profile_window_seconds = config.profile_window_seconds;
    auto training_set = build_training_set(warmup, *models.embeddings, catalog, options);
    config.deep.input_dim = 2 * models.embeddings->dimension() + kAuxiliaryFeatures;
    config.deep.seed ^= config.seed;
    auto deep_run = train_deep(training_set.samples, config.deep, training_set.normalization);
    models.deep = std::make_shared<DeepModel>(std::move(deep_run.model));
    return models;
}

// Replays a log into a fresh bandit bank the way the live loop would have
// seen it: per-event segment under this variant's segmentation setting.
inline void warm_bank(BanditBank& bank, const std::vector<InteractionEvent>& events,
                      const EmbeddingTable& embeddings, const SegmentModel* segments,
                      bool use_segments, std::int64_t profile_window_seconds) {
    ClickHistory history(profile_window_seconds);
    for (const auto& event : events) {
        SegmentId segment = 0;
        if (use_segments && segments != nullptr) {
            segment = assign_segment(history.profile_at(event.user, event.timestamp, embeddings),
                                     *segments);
        }
        bank.record(segment, event);
        history.observe(event);
    }
}

// Variant names mirror the online comparison set: a random baseline, global
// and segmented TS bandits, item-to-item similarity, and the three
// weighted-average mixes.
namespace variant_names {
inline constexpr const char* kRandom = "random";
inline constexpr const char* kBanditTs = "bandit_ts";
inline constexpr const char* kSegBanditTs = "seg_bandit_ts";
inline constexpr const char* kSimilarItem = "similar_item";
inline constexpr const char* kSegBanditSimilar = "seg_bandit_similar";
inline constexpr const char* kSegBanditDeep = "seg_bandit_deep";
inline constexpr const char* kSegBanditSimilarDeep = "seg_bandit_similar_deep";
} // namespace variant_names

struct VariantSetConfig {
    BanditBank::Config bandit{.policy = BanditPolicy::TS,
                              .objective = BanditObjective::CLICKS,
                              .half_life_seconds = 12.0 * 3600.0};
    // Mixing weights follow the 40/60 bandit/model split of the mixer
    // example configuration.
    double mix_bandit_weight = 0.4;
    double mix_model_weight = 0.6;
};

inline std::vector<VariantPipeline> make_standard_variants(const TrainedModels& models,
                                                           const VariantSetConfig& config = {}) {
    using namespace variant_names;
    std::vector<VariantPipeline> variants;

    const auto similarity_item =
        std::make_shared<SimilarityRecommender>(models.embeddings, SimilarityMode::ItemToItem);
    const auto deep =
        std::make_shared<DeepRecommender>(models.deep, models.embeddings, models.catalog);
    const auto random_model = std::make_shared<RandomRecommender>();

    const auto add = [&](const std::string& name, std::vector<Pipeline::Source> sources,
                         bool use_segments, std::shared_ptr<BanditBank> bank) {
        variants.push_back({name, Pipeline(std::move(sources), MixStrategy::WeightedAverage),
                            std::move(bank), use_segments});
    };

    const auto make_bank = [&] { return std::make_shared<BanditBank>(config.bandit); };
    const auto bandit_source = [&](const std::shared_ptr<BanditBank>& bank, double weight) {
        return Pipeline::Source{std::make_shared<BanditRecommender>(bank), weight, true};
    };

    add(kRandom, {{random_model, 1.0, false}}, false, nullptr);

    auto global_bank = make_bank();
    add(kBanditTs, {bandit_source(global_bank, 1.0)}, false, global_bank);

    auto seg_bank = make_bank();
    add(kSegBanditTs, {bandit_source(seg_bank, 1.0)}, true, seg_bank);

    add(kSimilarItem, {{similarity_item, 1.0, false}}, false, nullptr);

    auto mix_sim_bank = make_bank();
    add(kSegBanditSimilar,
        {bandit_source(mix_sim_bank, config.mix_bandit_weight),
         {similarity_item, config.mix_model_weight, false}},
        true, mix_sim_bank);

    auto mix_deep_bank = make_bank();
    add(kSegBanditDeep,
        {bandit_source(mix_deep_bank, config.mix_bandit_weight),
         {deep, config.mix_model_weight, false}},
        true, mix_deep_bank);

    auto mix_all_bank = make_bank();
    add(kSegBanditSimilarDeep,
        {bandit_source(mix_all_bank, config.mix_bandit_weight),
         {similarity_item, config.mix_model_weight / 2.0, false},
         {deep, config.mix_model_weight / 2.0, false}},
        true, mix_all_bank);

    return variants;
}

inline Experiment make_uniform_experiment(const std::string& test_id,
                                          const std::vector<VariantPipeline>& variants,
                                          const std::string& baseline) {
    Experiment experiment;
    experiment.test_id = test_id;
    experiment.baseline = baseline;
    const double weight = 1.0 / static_cast<double>(variants.size());
    double assigned = 0.0;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        double w = weight;
        if (i + 1 == variants.size()) w = 1.0 - assigned; // exact sum
        experiment.variants.push_back({variants[i].name, w});
        assigned += w;
    }
    experiment.validate();
    return experiment;
}

struct SynergyRunConfig {
    WorldConfig world;
    LoggingPolicyConfig warmup;
    LiveExperimentConfig live;
    TrainingConfig training;
    VariantSetConfig variants;
    std::string test_id = "synergy";
    std::uint64_t seed = 1;

    // Derives phase boundaries and sub-seeds from the master seed.
    void finalize() {
        world.seed = seed;
        warmup.seed = seed ^ 0x77a3;
        warmup.to_day = std::min<std::size_t>(warmup.to_day, world.horizon_days);
        training.seed = seed ^ 0x7247;
        live.from_day = warmup.to_day;
        live.to_day = world.horizon_days;
        live.seed = seed ^ 0x11fe;
    }
};

struct SynergyRunResult {
    std::vector<InteractionEvent> warmup_events;
    std::vector<InteractionEvent> live_events;
    UpliftReport report;
    TrainedModels models;
    Experiment experiment;
};

// Full reproduction run: generate a world, collect a warmup log under a
// random policy, train the offline models, run the multi-variant live
// experiment, and aggregate the uplift table.
inline SynergyRunResult run_synergy_experiment(SynergyRunConfig config) {
    config.finalize();
    const World world = generate_world(config.world);
    SynergyRunResult result;
    result.warmup_events = run_logging_policy(world, config.warmup);
    result.models = train_models_from_log(result.warmup_events, world.catalog(), config.training);

    auto variants = make_standard_variants(result.models, config.variants);
    for (auto& variant : variants) {
        if (variant.bank) {
            warm_bank(*variant.bank, result.warmup_events, *result.models.embeddings,
                      result.models.segments.get(), variant.use_segments,
                      config.training.profile_window_seconds);
        }
    }

    result.experiment =
        make_uniform_experiment(config.test_id, variants, variant_names::kBanditTs);
    result.live_events =
        run_experiment(world, variants, result.experiment, *result.models.embeddings,
                       result.models.segments.get(), result.warmup_events, config.live);
    result.report =
        uplift_report(aggregate_variants(result.live_events, result.experiment), result.experiment);
    return result;
}

// Offline model comparison on a shared slate set, mirroring the offline
// metric table: every ranker scores exactly the same logged slates, and
// slates without a usable user profile are skipped for all rankers alike.
struct OfflineComparison {
    struct ModelMetrics {
        double ndcg_at_5 = 0.0;
        double avg_label_value_at_5 = 0.0;
        std::optional<double> avg_positive_label_value_at_5;
        std::optional<double> auc_value;
    };
    std::map<std::string, ModelMetrics> models; // "random", "similarity", "deep"
    std::size_t slates_evaluated = 0;
};

inline OfflineComparison compare_offline_models(const World& world, const TrainedModels& models,
                                                const std::vector<InteractionEvent>& history_events,
                                                const std::vector<InteractionEvent>& eval_events,
                                                std::int64_t profile_window_seconds,
                                                std::uint64_t seed) {
    ClickHistory history(profile_window_seconds);
    history.observe_all(history_events);

    struct Accumulator {
        double ndcg_sum = 0.0;
        std::size_t ndcg_count = 0;
        double alv_sum = 0.0;
        std::size_t alv_count = 0;
        double aplv_sum = 0.0;
        std::size_t aplv_count = 0;
        std::vector<std::pair<double, bool>> pooled;
    };
    std::map<std::string, Accumulator> acc;

    const auto score_slate = [&](const ScoredList& ranked,
                                 const std::map<ArticleId, const InteractionEvent*>& by_id,
                                 Accumulator& a) {
        LabeledRanking ranking;
        for (const auto& item : ranked.items()) {
            const auto* e = by_id.at(item.id);
            ranking.items.push_back({item.id, e->clicked, e->kpi_value});
            a.pooled.emplace_back(item.score, e->clicked);
        }
        bool any_relevant = false;
        for (const auto& item : ranking.items) any_relevant |= item.clicked;
        if (any_relevant) {
            a.ndcg_sum += ndcg_at_k(ranking, 5);
            ++a.ndcg_count;
        }
        a.alv_sum += avg_label_value_at_k(ranking, 5);
        ++a.alv_count;
        if (const auto aplv = avg_positive_label_value_at_k(ranking, 5)) {
            a.aplv_sum += *aplv;
            ++a.aplv_count;
        }
    };

    OfflineComparison out;
    for (const auto& slate : group_slates(eval_events)) {
        // Advance the history to just before this slate is served.
        const auto profile = history.profile_at(slate.user, slate.timestamp, *models.embeddings);
        if (profile) {
            std::vector<ArticleId> candidates;
            std::map<ArticleId, const InteractionEvent*> by_id;
            for (const auto& e : slate.impressions) {
                if (by_id.emplace(e.article, &e).second) candidates.push_back(e.article);
            }
            if (candidates.size() >= 2) {
                ++out.slates_evaluated;

                Rng slate_rng(fnv1a64(slate.user, fnv1a64("offline-random", seed)) ^
                              static_cast<std::uint64_t>(slate.timestamp));
                std::vector<ScoredItem> random_items;
                for (const auto& id : candidates) random_items.push_back({id, slate_rng.uniform()});
                score_slate(ScoredList(std::move(random_items), "random"), by_id, acc["random"]);

                score_slate(similarity_rank(*profile, candidates, *models.embeddings), by_id,
                            acc["similarity"]);

                score_slate(deep_rank(*models.deep, *profile, candidates, *models.embeddings,
                                      *models.catalog, slate.timestamp),
                            by_id, acc["deep"]);
            }
        }
        for (const auto& e : slate.impressions) history.observe(e);
    }

    for (auto& [name, a] : acc) {
        OfflineComparison::ModelMetrics m;
        if (a.ndcg_count > 0) m.ndcg_at_5 = a.ndcg_sum / static_cast<double>(a.ndcg_count);
        if (a.alv_count > 0) m.avg_label_value_at_5 = a.alv_sum / static_cast<double>(a.alv_count);
        if (a.aplv_count > 0) {
            m.avg_positive_label_value_at_5 = a.aplv_sum / static_cast<double>(a.aplv_count);
        }
        bool has_pos = false;
        bool has_neg = false;
        for (const auto& [s, label] : a.pooled) (label ? has_pos : has_neg) = true;
        if (has_pos && has_neg) m.auc_value = auc(a.pooled);
        out.models[name] = m;
    }
    return out;
}

} // namespace newsmix
