#pragma once

#include "newsmix/domain.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace newsmix {

// One evaluated ranking: articles in ranked order with their observed
// labels. Relevance is the click flag; kpi_value is the continuous label.
struct LabeledItem {
    ArticleId article;
    bool clicked = false;
    double kpi_value = 0.0;
};

struct LabeledRanking {
    std::vector<LabeledItem> items;

    void validate() const {
        std::set<ArticleId> seen;
        for (const auto& item : items) {
            if (!seen.insert(item.article).second) {
                throw std::invalid_argument("LabeledRanking: duplicate article");
            }
            if (!(item.kpi_value >= 0.0)) {
                throw std::invalid_argument("LabeledRanking: negative kpi_value");
            }
        }
    }
};

// Binary-gain NDCG with 1-based positions: DCG = sum rel_i / log2(i + 1).
// IDCG reorders this ranking's own labels ideally. No relevant item -> 0.
inline double ndcg_at_k(const LabeledRanking& ranking, std::size_t k) {
    if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    std::size_t relevant = 0;
    for (const auto& item : ranking.items) relevant += item.clicked ? 1 : 0;
    if (relevant == 0) return 0.0;

    double dcg = 0.0;
    const std::size_t depth = std::min(k, ranking.items.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (ranking.items[i].clicked) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    double idcg = 0.0;
    const std::size_t ideal_depth = std::min(k, relevant);
    for (std::size_t i = 0; i < ideal_depth; ++i) {
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg / idcg;
}

// precision = relevant-in-top-k / min(k, length); recall against the total
// relevant count in the ranking (0 when nothing is relevant).
inline std::pair<double, double> precision_recall_at_k(const LabeledRanking& ranking,
                                                       std::size_t k) {
    if (k < 1) throw std::invalid_argument("precision_recall_at_k: k must be >= 1");
    const std::size_t depth = std::min(k, ranking.items.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < depth; ++i) hits += ranking.items[i].clicked ? 1 : 0;
    std::size_t relevant = 0;
    for (const auto& item : ranking.items) relevant += item.clicked ? 1 : 0;
    const double precision = depth > 0 ? static_cast<double>(hits) / static_cast<double>(depth) : 0.0;
    const double recall =
        relevant > 0 ? static_cast<double>(hits) / static_cast<double>(relevant) : 0.0;
    return {precision, recall};
}

// Share of the catalog appearing in at least one user's top-k.
inline double coverage_at_k(const std::vector<LabeledRanking>& rankings, std::size_t catalog_size,
                            std::size_t k) {
    if (catalog_size < 1) throw std::invalid_argument("coverage_at_k: catalog size must be >= 1");
    std::set<ArticleId> seen;
    for (const auto& ranking : rankings) {
        const std::size_t depth = std::min(k, ranking.items.size());
        for (std::size_t i = 0; i < depth; ++i) seen.insert(ranking.items[i].article);
    }
    return static_cast<double>(seen.size()) / static_cast<double>(catalog_size);
}

// Probability that a random positive outscores a random negative, ties 0.5;
// computed by the rank-sum (Mann-Whitney) formulation.
inline double auc(const std::vector<std::pair<double, bool>>& scored_labels) {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    for (const auto& [score, label] : scored_labels) (label ? positives : negatives) += 1;
    if (positives == 0 || negatives == 0) {
        throw std::invalid_argument("auc: need at least one positive and one negative");
    }

    std::vector<std::pair<double, bool>> sorted = scored_labels;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Sum of positive ranks with midranks for ties.
    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j); // ranks are 1-based
        for (std::size_t t = i; t < j; ++t) {
            if (sorted[t].second) positive_rank_sum += midrank;
        }
        i = j;
    }
    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

// Mean continuous label over the top-min(k, length) articles.
inline double avg_label_value_at_k(const LabeledRanking& ranking, std::size_t k) {
    if (k < 1) throw std::invalid_argument("avg_label_value_at_k: k must be >= 1");
    if (ranking.items.empty()) throw std::invalid_argument("avg_label_value_at_k: empty ranking");
    const std::size_t depth = std::min(k, ranking.items.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < depth; ++i) sum += ranking.items[i].kpi_value;
    return sum / static_cast<double>(depth);
}

// Mean continuous label over clicked articles within the top-k; absent when
// nothing in the top-k was clicked (excluded from aggregates, not zero).
inline std::optional<double> avg_positive_label_value_at_k(const LabeledRanking& ranking,
                                                           std::size_t k) {
    if (k < 1) throw std::invalid_argument("avg_positive_label_value_at_k: k must be >= 1");
    const std::size_t depth = std::min(k, ranking.items.size());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < depth; ++i) {
        if (ranking.items[i].clicked) {
            sum += ranking.items[i].kpi_value;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return sum / static_cast<double>(count);
}

// Percent difference of the variant's mean KPI against the baseline's.
inline double uplift(double variant_mean_kpi, double baseline_mean_kpi) {
    if (!(baseline_mean_kpi > 0.0)) {
        throw std::invalid_argument("uplift: baseline mean KPI must be positive");
    }
    return 100.0 * (variant_mean_kpi - baseline_mean_kpi) / baseline_mean_kpi;
}

struct MetricsAtK {
    double ndcg = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double coverage = 0.0;
    double avg_label_value = 0.0;
    std::optional<double> avg_positive_label_value;
};

struct HorizonReport {
    bool present = false;
    std::size_t rankings = 0;
    std::optional<double> auc_value; // k-independent; absent when single-class
    std::map<std::size_t, MetricsAtK> at_k;
};

struct EvaluationReport {
    // Keyed by horizon length in days (1, 7, 30, ...).
    std::map<int, HorizonReport> horizons;
};

inline const std::vector<std::size_t>& default_ks() {
    static const std::vector<std::size_t> ks{3, 5, 10, 15, 30};
    return ks;
}

inline const std::vector<int>& default_horizon_days() {
    static const std::vector<int> days{1, 7, 30};
    return days;
}

// A slate with observed labels plus the per-item scores some ranker gave it.
struct EvaluatedSlate {
    LabeledRanking ranking;                        // in ranker order
    std::vector<std::pair<double, bool>> scored;   // (score, clicked) pairs
};

// Aggregates metrics over per-user slates for each horizon window
// (cutoff, cutoff + days]. Per-user metrics average over users with at
// least one evaluated impression; rankings with no relevant item are
// excluded from the NDCG average rather than deflating it.
class HorizonAggregator {
public:
    // Registers a horizon so it appears in the report even when empty
    // (present = false).
    void add_horizon(int horizon_days) { buckets_[horizon_days]; }

    void add(int horizon_days, const EvaluatedSlate& slate) {
        auto& bucket = buckets_[horizon_days];
        bucket.slates.push_back(slate);
        for (const auto& item : slate.ranking.items) bucket.catalog.insert(item.article);
    }

    EvaluationReport report(const std::vector<std::size_t>& ks) const {
        EvaluationReport out;
        for (const auto& [days, bucket] : buckets_) {
            HorizonReport& hr = out.horizons[days];
            if (bucket.slates.empty()) continue;
            hr.present = true;
            hr.rankings = bucket.slates.size();

            std::vector<std::pair<double, bool>> pooled;
            std::vector<LabeledRanking> rankings;
            rankings.reserve(bucket.slates.size());
            for (const auto& slate : bucket.slates) {
                rankings.push_back(slate.ranking);
                pooled.insert(pooled.end(), slate.scored.begin(), slate.scored.end());
            }
            bool has_pos = false;
            bool has_neg = false;
            for (const auto& [s, label] : pooled) (label ? has_pos : has_neg) = true;
            if (has_pos && has_neg) hr.auc_value = auc(pooled);

            for (const std::size_t k : ks) {
                MetricsAtK m;
                double ndcg_sum = 0.0;
                std::size_t ndcg_count = 0;
                double precision_sum = 0.0;
                double recall_sum = 0.0;
                std::size_t pr_count = 0;
                double alv_sum = 0.0;
                std::size_t alv_count = 0;
                double aplv_sum = 0.0;
                std::size_t aplv_count = 0;
                for (const auto& ranking : rankings) {
                    if (ranking.items.empty()) continue;
                    bool any_relevant = false;
                    for (const auto& item : ranking.items) any_relevant |= item.clicked;
                    if (any_relevant) {
                        ndcg_sum += ndcg_at_k(ranking, k);
                        ++ndcg_count;
                    }
                    const auto [p, r] = precision_recall_at_k(ranking, k);
                    precision_sum += p;
                    recall_sum += r;
                    ++pr_count;
                    alv_sum += avg_label_value_at_k(ranking, k);
                    ++alv_count;
                    if (const auto aplv = avg_positive_label_value_at_k(ranking, k)) {
                        aplv_sum += *aplv;
                        ++aplv_count;
                    }
                }
                if (ndcg_count > 0) m.ndcg = ndcg_sum / static_cast<double>(ndcg_count);
                if (pr_count > 0) {
                    m.precision = precision_sum / static_cast<double>(pr_count);
                    m.recall = recall_sum / static_cast<double>(pr_count);
                }
                if (alv_count > 0) m.avg_label_value = alv_sum / static_cast<double>(alv_count);
                if (aplv_count > 0) {
                    m.avg_positive_label_value = aplv_sum / static_cast<double>(aplv_count);
                }
                m.coverage = coverage_at_k(rankings, std::max<std::size_t>(bucket.catalog.size(), 1), k);
                hr.at_k[k] = m;
            }
        }
        return out;
    }

private:
    struct Bucket {
        std::vector<EvaluatedSlate> slates;
        std::set<ArticleId> catalog;
    };
    std::map<int, Bucket> buckets_;
};

// Ranks one logged slate: (user, slate articles, request time) -> ScoredList
// over exactly those articles.
using SlateRanker =
    std::function<ScoredList(const UserId&, const std::vector<ArticleId>&, Timestamp)>;

// A recorded slate: every impression sharing (user, timestamp) belongs to
// one recommendation request.
struct LoggedSlate {
    UserId user;
    Timestamp timestamp = 0;
    std::vector<InteractionEvent> impressions;
};

inline std::vector<LoggedSlate> group_slates(std::vector<InteractionEvent> events) {
    std::stable_sort(events.begin(), events.end(),
                     [](const InteractionEvent& a, const InteractionEvent& b) {
                         if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                         return a.user < b.user;
                     });
    std::vector<LoggedSlate> slates;
    for (auto& event : events) {
        if (slates.empty() || slates.back().user != event.user ||
            slates.back().timestamp != event.timestamp) {
            slates.push_back({event.user, event.timestamp, {}});
        }
        slates.back().impressions.push_back(std::move(event));
    }
    return slates;
}

// Scores every logged slate in each horizon window (cutoff, cutoff + days]
// with the given ranker and aggregates the full metric grid. Slates the
// ranker declines (by throwing) are skipped; a horizon with no usable slate
// is marked absent.
inline EvaluationReport evaluate_horizons(const SlateRanker& ranker,
                                          const std::vector<InteractionEvent>& events,
                                          Timestamp training_cutoff,
                                          const std::vector<int>& horizon_days = default_horizon_days(),
                                          const std::vector<std::size_t>& ks = default_ks()) {
    HorizonAggregator aggregator;
    for (const int days : horizon_days) aggregator.add_horizon(days);
    const auto slates = group_slates(events);
    for (const auto& slate : slates) {
        if (slate.timestamp <= training_cutoff) continue;
        std::vector<ArticleId> candidates;
        candidates.reserve(slate.impressions.size());
        std::map<ArticleId, const InteractionEvent*> by_id;
        for (const auto& e : slate.impressions) {
            if (by_id.emplace(e.article, &e).second) candidates.push_back(e.article);
        }
        if (candidates.empty()) continue;

        ScoredList ranked;
        try {
            ranked = ranker(slate.user, candidates, slate.timestamp);
        } catch (const std::exception&) {
            continue; // e.g. cold user for a profile-based ranker
        }

        EvaluatedSlate evaluated;
        for (const auto& item : ranked.items()) {
            const auto it = by_id.find(item.id);
            if (it == by_id.end()) continue;
            evaluated.ranking.items.push_back(
                {item.id, it->second->clicked, it->second->kpi_value});
            evaluated.scored.emplace_back(item.score, it->second->clicked);
        }
        if (evaluated.ranking.items.empty()) continue;

        for (const int days : horizon_days) {
            if (slate.timestamp - training_cutoff <= static_cast<Timestamp>(days) * 86400) {
                aggregator.add(days, evaluated);
            }
        }
    }
    return aggregator.report(ks);
}

} // namespace newsmix
