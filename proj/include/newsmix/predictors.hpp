#pragma once

#include "newsmix/deep_model.hpp"
#include "newsmix/domain.hpp"
#include "newsmix/embedding.hpp"
#include "newsmix/event_log.hpp"
#include "newsmix/rng.hpp"
#include "newsmix/segmentation.hpp"
#include "newsmix/similarity.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>
#include <vector>

namespace newsmix {

struct TrainingSetOptions {
    bool kpi_weighting = false;
    std::uint64_t seed = 1;
    // Trailing window of a user's clicks that forms their profile.
    std::int64_t profile_window_seconds = 30LL * 24 * 3600;
};

struct TrainingSet {
    std::vector<TrainingSample> samples;
    FeatureNormalization normalization;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

// Click history per user within a trailing window; profiles reflect only
// events observed so far, so replaying a log yields leak-free features. The
// embedding table is an argument, not a member, so a hot-swapped table
// changes the derived profiles without touching the raw history.
class ClickHistory {
public:
    explicit ClickHistory(std::int64_t window_seconds) : window_(window_seconds) {}

    std::optional<Vector> profile_at(const UserId& user, Timestamp now,
                                     const EmbeddingTable& table) const {
        const auto it = history_.find(user);
        if (it == history_.end()) return std::nullopt;
        std::vector<ArticleId> recent;
        for (const auto& [ts, article] : it->second) {
            if (now - ts <= window_ && ts <= now) recent.push_back(article);
        }
        return user_profile(recent, table);
    }

    std::optional<ArticleId> last_click(const UserId& user) const {
        const auto it = history_.find(user);
        if (it == history_.end() || it->second.empty()) return std::nullopt;
        return it->second.back().second;
    }

    void observe(const InteractionEvent& event) {
        if (!event.clicked) return;
        auto& h = history_[event.user];
        h.emplace_back(event.timestamp, event.article);
        // Drop entries that can never re-enter the window.
        while (!h.empty() && event.timestamp - h.front().first > window_) h.erase(h.begin());
    }

    void observe_all(const std::vector<InteractionEvent>& events) {
        for (const auto& e : events) observe(e);
    }

private:
    std::int64_t window_;
    std::unordered_map<UserId, std::vector<std::pair<Timestamp, ArticleId>>> history_;
};

// A session is one user's clicked articles in time order, split on long
// idle gaps. Feeds Item2Vec training.
inline std::vector<std::vector<ArticleId>> extract_click_sessions(
    std::vector<InteractionEvent> events, std::int64_t gap_seconds = 4 * 3600) {
    std::stable_sort(events.begin(), events.end(),
                     [](const InteractionEvent& a, const InteractionEvent& b) {
                         if (a.user != b.user) return a.user < b.user;
                         return a.timestamp < b.timestamp;
                     });
    std::vector<std::vector<ArticleId>> sessions;
    const UserId* current_user = nullptr;
    Timestamp last_ts = 0;
    for (const auto& e : events) {
        if (!e.clicked) continue;
        const bool new_session = current_user == nullptr || e.user != *current_user ||
                                 e.timestamp - last_ts > gap_seconds;
        if (new_session) sessions.emplace_back();
        sessions.back().push_back(e.article);
        current_user = &e.user;
        last_ts = e.timestamp;
    }
    return sessions;
}

// Balanced training set per the click-model recipe: every clicked impression
// is kept (label 1) and an equal-count uniform subsample of unclicked
// impressions joins it (label 0, weight 1). With kpi_weighting, positive
// weights are the click's KPI rescaled to mean 1; zero-KPI positives then
// carry no gradient and are dropped.
//
// Events must be sorted by timestamp. Impressions are usable only when both
// the user profile (from prior clicks) and the article embedding exist.
inline TrainingSet build_training_set(const std::vector<InteractionEvent>& events,
                                      const EmbeddingTable& embeddings,
                                      const ArticleCatalog& catalog,
                                      const TrainingSetOptions& options = {}) {
    struct RawSample {
        Vector user;
        const Vector* article;
        double length;
        double age;
        double kpi;
    };
    std::vector<RawSample> clicked;
    std::vector<RawSample> unclicked;

    ClickHistory tracker(options.profile_window_seconds);
    for (const auto& event : events) {
        const Vector* article_embedding = embeddings.find(event.article);
        const Article* article = catalog.find(event.article);
        if (article_embedding && article) {
            if (auto profile = tracker.profile_at(event.user, event.timestamp, embeddings)) {
                RawSample raw{std::move(*profile), article_embedding,
                              static_cast<double>(article->length),
                              static_cast<double>(event.timestamp - article->published_at),
                              event.kpi_value};
                (event.clicked ? clicked : unclicked).push_back(std::move(raw));
            }
        }
        tracker.observe(event);
    }

    if (clicked.empty() || unclicked.empty()) {
        throw std::invalid_argument("build_training_set: need at least one usable clicked and one "
                                    "unclicked impression");
    }

    // Equal-count negative subsample; with replacement only in the unusual
    // case of fewer negatives than positives.
    Rng rng(options.seed);
    std::vector<std::size_t> negative_indices;
    negative_indices.reserve(clicked.size());
    if (unclicked.size() >= clicked.size()) {
        std::vector<std::size_t> all(unclicked.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        rng.shuffle(all);
        negative_indices.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(clicked.size()));
    } else {
        for (std::size_t i = 0; i < clicked.size(); ++i) {
            negative_indices.push_back(rng.uniform_int(unclicked.size()));
        }
    }

    // Freeze auxiliary normalization over the selected samples.
    double length_sum = 0.0;
    double length_sq = 0.0;
    double age_sum = 0.0;
    double age_sq = 0.0;
    const double count = static_cast<double>(clicked.size() + negative_indices.size());
    const auto accumulate = [&](const RawSample& s) {
        length_sum += s.length;
        length_sq += s.length * s.length;
        age_sum += s.age;
        age_sq += s.age * s.age;
    };
    for (const auto& s : clicked) accumulate(s);
    for (const std::size_t i : negative_indices) accumulate(unclicked[i]);

    FeatureNormalization norm;
    norm.length_mean = length_sum / count;
    norm.age_mean = age_sum / count;
    const double length_var = length_sq / count - norm.length_mean * norm.length_mean;
    const double age_var = age_sq / count - norm.age_mean * norm.age_mean;
    norm.length_sd = length_var > 1e-12 ? std::sqrt(length_var) : 1.0;
    norm.age_sd = age_var > 1e-12 ? std::sqrt(age_var) : 1.0;

    double positive_weight_scale = 1.0;
    if (options.kpi_weighting) {
        double kpi_sum = 0.0;
        for (const auto& s : clicked) kpi_sum += s.kpi;
        const double mean = kpi_sum / static_cast<double>(clicked.size());
        positive_weight_scale = mean > 0.0 ? 1.0 / mean : 0.0;
    }

    TrainingSet set;
    set.normalization = norm;
    const auto emit = [&](const RawSample& s, double label, double weight) {
        if (weight <= 0.0) return;
        set.samples.push_back(
            {build_feature_vector(s.user, *s.article, s.length, s.age, norm), label, weight});
        (label > 0.5 ? set.positives : set.negatives) += 1;
    };
    for (const auto& s : clicked) {
        const double weight =
            options.kpi_weighting ? (positive_weight_scale > 0.0 ? s.kpi * positive_weight_scale : 1.0)
                                  : 1.0;
        emit(s, 1.0, weight);
    }
    for (const std::size_t i : negative_indices) emit(unclicked[i], 0.0, 1.0);
    return set;
}

// Scores each candidate by the model's click probability. The caller must
// supply a profile: cold users are handled upstream by the mixer giving the
// deep model zero weight.
inline ScoredList deep_rank(const DeepModel& model, const Vector& profile,
                            const std::vector<ArticleId>& candidates,
                            const EmbeddingTable& embeddings, const ArticleCatalog& catalog,
                            Timestamp now) {
    if (candidates.empty()) throw std::invalid_argument("deep_rank: empty candidate set");
    const auto& norm = model.normalization();
    const Vector zero(embeddings.dimension(), 0.0);
    std::vector<ScoredItem> items;
    items.reserve(candidates.size());
    for (const auto& id : candidates) {
        const Vector* embedding = embeddings.find(id);
        const Article* article = catalog.find(id);
        const double length = article ? static_cast<double>(article->length) : 0.0;
        const double age = article ? static_cast<double>(now - article->published_at) : 0.0;
        const Vector features =
            build_feature_vector(profile, embedding ? *embedding : zero, length, age, norm);
        items.push_back({id, model.predict(features)});
    }
    return ScoredList(std::move(items), "deep");
}

} // namespace newsmix
