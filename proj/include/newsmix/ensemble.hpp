#pragma once

#include "newsmix/domain.hpp"
#include "newsmix/rng.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace newsmix {

enum class MixStrategy { WeightedAverage, ProportionalRandom };

inline const char* to_string(MixStrategy s) {
    return s == MixStrategy::WeightedAverage ? "weighted_average" : "proportional_random";
}

inline MixStrategy mix_strategy_from_string(std::string_view s) {
    if (s == "weighted_average") return MixStrategy::WeightedAverage;
    if (s == "proportional_random") return MixStrategy::ProportionalRandom;
    throw std::invalid_argument("unknown mix strategy '" + std::string(s) + "'");
}

// Min-max normalization into [0, 1]. An all-equal list expresses no
// preference and maps to all 1.0 so a single-candidate source is not
// silently erased by the mixer. Order and ties are preserved.
inline ScoredList normalize_scores(const ScoredList& list) {
    if (list.empty()) throw std::invalid_argument("normalize_scores: empty list");
    double lo = list[0].score;
    double hi = list[0].score;
    for (const auto& item : list.items()) {
        lo = std::min(lo, item.score);
        hi = std::max(hi, item.score);
        if (!std::isfinite(item.score)) {
            throw std::invalid_argument("normalize_scores: non-finite score");
        }
    }
    if (lo == hi) {
        return list.transformed([](double) { return 1.0; }, list.source());
    }
    const double range = hi - lo;
    return list.transformed([lo, range](double s) { return (s - lo) / range; }, list.source());
}

// Weighted average of independently min-max-normalized inputs over the union
// of their articles; a model that does not list an article contributes 0 at
// full weight.
inline ScoredList weighted_average_mix(const std::vector<ScoredList>& lists,
                                       const std::vector<double>& weights) {
    if (lists.empty()) throw std::invalid_argument("weighted_average_mix: no input lists");
    if (lists.size() != weights.size()) {
        throw std::invalid_argument("weighted_average_mix: weight count mismatch");
    }
    double weight_sum = 0.0;
    for (const double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("weighted_average_mix: negative weight");
        weight_sum += w;
    }
    if (weight_sum <= 0.0) throw std::invalid_argument("weighted_average_mix: all weights zero");

    std::map<ArticleId, double> mixed;
    for (std::size_t m = 0; m < lists.size(); ++m) {
        if (weights[m] == 0.0 || lists[m].empty()) continue;
        const ScoredList normalized = normalize_scores(lists[m]);
        for (const auto& item : normalized.items()) {
            mixed[item.id] += weights[m] * item.score;
        }
    }
    std::vector<ScoredItem> items;
    items.reserve(mixed.size());
    for (const auto& [id, score] : mixed) items.push_back({id, score / weight_sum});
    return ScoredList(std::move(items), "weighted_average");
}

// Draws a source per output position with probability proportional to its
// share, emitting that source's best not-yet-emitted article; an exhausted
// source is dropped and the draw repeats over the remainder. Output scores
// are 1/position so the ScoredList stays monotone.
inline ScoredList proportional_random_mix(const std::vector<ScoredList>& lists,
                                          const std::vector<double>& shares, std::size_t k,
                                          Rng& rng) {
    if (lists.empty()) throw std::invalid_argument("proportional_random_mix: no input lists");
    if (lists.size() != shares.size()) {
        throw std::invalid_argument("proportional_random_mix: share count mismatch");
    }
    if (k < 1) throw std::invalid_argument("proportional_random_mix: k must be >= 1");
    double share_sum = 0.0;
    for (const double s : shares) {
        if (!(s >= 0.0)) throw std::invalid_argument("proportional_random_mix: negative share");
        share_sum += s;
    }
    if (share_sum <= 0.0) throw std::invalid_argument("proportional_random_mix: all shares zero");

    std::vector<std::size_t> cursor(lists.size(), 0);
    std::vector<bool> exhausted(lists.size(), false);
    std::vector<ScoredItem> out;
    out.reserve(k);

    const auto already_emitted = [&](const ArticleId& id) {
        for (const auto& e : out) {
            if (e.id == id) return true;
        }
        return false;
    };
    const auto advance = [&](std::size_t m) -> const ArticleId* {
        while (cursor[m] < lists[m].size()) {
            const ArticleId& id = lists[m][cursor[m]].id;
            if (!already_emitted(id)) return &id;
            ++cursor[m];
        }
        exhausted[m] = true;
        return nullptr;
    };

    while (out.size() < k) {
        double live_share = 0.0;
        for (std::size_t m = 0; m < lists.size(); ++m) {
            if (!exhausted[m] && shares[m] > 0.0 && advance(m) != nullptr) live_share += shares[m];
        }
        if (live_share <= 0.0) break; // every source exhausted: shorter output

        double target = rng.uniform() * live_share;
        std::size_t chosen = 0;
        for (std::size_t m = 0; m < lists.size(); ++m) {
            if (exhausted[m] || shares[m] <= 0.0) continue;
            chosen = m;
            target -= shares[m];
            if (target <= 0.0) break;
        }

        const ArticleId* id = advance(chosen);
        if (id == nullptr) continue;
        out.push_back({*id, 1.0 / static_cast<double>(out.size() + 1)});
        ++cursor[chosen];
    }
    return ScoredList(std::move(out), "proportional_random");
}

} // namespace newsmix
