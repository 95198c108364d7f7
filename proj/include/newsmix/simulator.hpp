#pragma once

#include "newsmix/abtest.hpp"
#include "newsmix/domain.hpp"
#include "newsmix/evaluation.hpp"
#include "newsmix/event_log.hpp"
#include "newsmix/item2vec.hpp"
#include "newsmix/pipeline.hpp"
#include "newsmix/predictors.hpp"
#include "newsmix/rng.hpp"
#include "newsmix/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

namespace newsmix {

// A fixed epoch keeps generated timestamps positive and reproducible.
constexpr Timestamp kWorldEpoch = 1700000000;
constexpr Timestamp kSecondsPerDay = 86400;

struct WorldConfig {
    std::size_t num_users = 2000;
    std::size_t articles_per_day = 50;
    std::size_t num_topics = 4;
    std::size_t horizon_days = 14;
    std::size_t dimension = 16;   // latent interest/topic dimension
    double topic_noise = 0.25;    // spread of users/articles around topic centers
    double affinity_coeff = 4.0;  // a in sigmoid(a*affinity + b*quality + c)
    double quality_coeff = 2.0;   // b
    double click_bias = -3.0;     // c
    double freshness_half_life_hours = 30.0;
    double kpi_location = 1.0;    // lognormal location = kpi_location + kpi_affinity_scale*affinity
    double kpi_affinity_scale = 1.0;
    double kpi_sigma = 0.5;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_users < 1 || articles_per_day < 1 || num_topics < 1 || horizon_days < 1) {
            throw std::invalid_argument("WorldConfig: counts must be >= 1");
        }
        if (dimension < 2) throw std::invalid_argument("WorldConfig: dimension must be >= 2");
        if (num_topics > dimension) {
            throw std::invalid_argument("WorldConfig: num_topics must be <= dimension");
        }
    }
};

struct SyntheticUser {
    UserId id;
    Vector interest;          // unit norm
    double activity_rate = 1.0; // expected sessions/day multiplier
    double noise_temperature = 1.0;
    std::size_t topic_index = 0; // ground truth, for diagnostics only
};

struct SyntheticArticle {
    ArticleId id;
    Vector topic; // unit norm
    double quality = 0.5;
    Timestamp published_at = 0;
    double freshness_half_life_seconds = 0.0;
    std::int64_t length = 0;
    std::size_t topic_index = 0;
};

class World {
public:
    WorldConfig config;
    std::vector<SyntheticUser> users;
    std::vector<SyntheticArticle> articles; // ascending publish time
    std::vector<Vector> topic_centers;

    Timestamp start_time() const { return kWorldEpoch; }
    Timestamp day_start(std::size_t day) const {
        return kWorldEpoch + static_cast<Timestamp>(day) * kSecondsPerDay;
    }

    const SyntheticArticle* find_article(const ArticleId& id) const {
        const auto it = article_index_.find(id);
        return it != article_index_.end() ? &articles[it->second] : nullptr;
    }

    // Articles already published and at most `window_days` old.
    std::vector<ArticleId> live_pool(Timestamp now, double window_days) const {
        std::vector<ArticleId> pool;
        const auto horizon = static_cast<Timestamp>(window_days * kSecondsPerDay);
        for (const auto& a : articles) {
            if (a.published_at > now) break;
            if (now - a.published_at <= horizon) pool.push_back(a.id);
        }
        return pool;
    }

    // Metadata catalog for the recommenders; ground-truth topic vectors are
    // deliberately not exposed as embeddings.
    ArticleCatalog catalog() const {
        ArticleCatalog catalog;
        for (const auto& a : articles) {
            catalog.put(Article{a.id, a.published_at, a.length, std::nullopt});
        }
        return catalog;
    }

    void rebuild_index() {
        article_index_.clear();
        for (std::size_t i = 0; i < articles.size(); ++i) article_index_[articles[i].id] = i;
    }

private:
    std::unordered_map<ArticleId, std::size_t> article_index_;
};

namespace detail {

inline Vector random_unit_vector(std::size_t dim, Rng& rng) {
    Vector v(dim);
    double norm_sq = 0.0;
    do {
        norm_sq = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm_sq += x * x;
        }
    } while (norm_sq < 1e-12);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : v) x *= inv;
    return v;
}

// Orthonormal topic centers via Gram-Schmidt on random directions.
inline std::vector<Vector> make_topic_centers(std::size_t count, std::size_t dim, Rng& rng) {
    std::vector<Vector> centers;
    while (centers.size() < count) {
        Vector v = random_unit_vector(dim, rng);
        for (const auto& c : centers) {
            const double proj = dot(v, c);
            for (std::size_t i = 0; i < dim; ++i) v[i] -= proj * c[i];
        }
        const double n = norm(v);
        if (n < 1e-6) continue;
        for (auto& x : v) x /= n;
        centers.push_back(std::move(v));
    }
    return centers;
}

inline Vector around_center(const Vector& center, double noise, Rng& rng) {
    Vector v = center;
    for (auto& x : v) x += noise * rng.normal();
    const double n = norm(v);
    for (auto& x : v) x /= n;
    return v;
}

} // namespace detail

// Users drawn from a mixture of orthonormal topic centers; articles stream
// in daily from the same centers. Deterministic given the seed.
inline World generate_world(const WorldConfig& config) {
    config.validate();
    World world;
    world.config = config;
    Rng rng(config.seed);

    world.topic_centers = detail::make_topic_centers(config.num_topics, config.dimension, rng);

    world.users.reserve(config.num_users);
    for (std::size_t u = 0; u < config.num_users; ++u) {
        SyntheticUser user;
        user.id = "u" + std::to_string(u);
        user.topic_index = rng.uniform_int(config.num_topics);
        user.interest =
            detail::around_center(world.topic_centers[user.topic_index], config.topic_noise, rng);
        user.activity_rate = std::exp(0.25 * rng.normal());
        user.noise_temperature = 0.8 + 0.4 * rng.uniform();
        world.users.push_back(std::move(user));
    }

    std::size_t article_counter = 0;
    for (std::size_t day = 0; day < config.horizon_days; ++day) {
        for (std::size_t i = 0; i < config.articles_per_day; ++i) {
            SyntheticArticle a;
            a.id = "a" + std::to_string(article_counter++);
            a.topic_index = rng.uniform_int(config.num_topics);
            a.topic =
                detail::around_center(world.topic_centers[a.topic_index], config.topic_noise, rng);
            a.quality = rng.uniform();
            // Article length correlates with quality so the click model's
            // auxiliary features carry real signal.
            a.length = std::max<std::int64_t>(
                50, static_cast<std::int64_t>(std::lround(200.0 + 1600.0 * a.quality +
                                                          150.0 * rng.normal())));
            a.published_at = world.day_start(day) +
                             static_cast<Timestamp>((static_cast<double>(i) + 0.5) /
                                                    static_cast<double>(config.articles_per_day) *
                                                    kSecondsPerDay);
            a.freshness_half_life_seconds = config.freshness_half_life_hours * 3600.0;
            world.articles.push_back(std::move(a));
        }
    }
    world.rebuild_index();
    return world;
}

// Ground-truth click model: logistic in affinity and quality, multiplied by
// an exponential freshness decay so the age-zero formula stays exact.
inline double click_probability(const World& world, const SyntheticUser& user,
                                const SyntheticArticle& article, Timestamp now) {
    if (now < article.published_at) {
        throw std::invalid_argument("click_probability: article not yet published");
    }
    const auto& c = world.config;
    const double affinity = dot(user.interest, article.topic);
    const double z =
        (c.affinity_coeff * affinity + c.quality_coeff * article.quality + c.click_bias) /
        user.noise_temperature;
    const double base = sigmoid(z);
    const double age = static_cast<double>(now - article.published_at);
    return base * std::exp2(-age / article.freshness_half_life_seconds);
}

// KPI for a consumed article: lognormal with location rising in affinity.
// Unclicked impressions accrue nothing.
inline double kpi_sample(const World& world, const SyntheticUser& user,
                         const SyntheticArticle& article, bool clicked, Rng& rng) {
    if (!clicked) return 0.0;
    const auto& c = world.config;
    const double affinity = dot(user.interest, article.topic);
    return rng.lognormal(c.kpi_location + c.kpi_affinity_scale * affinity, c.kpi_sigma);
}

struct RequestSchedule {
    std::size_t user_index = 0;
    Timestamp at = 0;
};

// Deterministic request stream: each user fires Poisson(rate * activity)
// requests per day at uniform times, then everything is ordered by
// (time, user).
inline std::vector<RequestSchedule> schedule_requests(const World& world, std::size_t from_day,
                                                      std::size_t to_day,
                                                      double requests_per_user_day, Rng& rng) {
    std::vector<RequestSchedule> requests;
    for (std::size_t day = from_day; day < to_day; ++day) {
        const Timestamp base = world.day_start(day);
        for (std::size_t u = 0; u < world.users.size(); ++u) {
            const int count =
                rng.poisson(requests_per_user_day * world.users[u].activity_rate);
            for (int i = 0; i < count; ++i) {
                const auto offset = static_cast<Timestamp>(rng.uniform() * kSecondsPerDay);
                requests.push_back({u, base + offset});
            }
        }
    }
    std::sort(requests.begin(), requests.end(), [&](const RequestSchedule& a, const RequestSchedule& b) {
        if (a.at != b.at) return a.at < b.at;
        return world.users[a.user_index].id < world.users[b.user_index].id;
    });
    return requests;
}

struct LoggingPolicyConfig {
    std::size_t from_day = 0;
    std::size_t to_day = 4;
    double requests_per_user_day = 8.0;
    std::size_t slate_size = 5;
    double candidate_window_days = 3.0;
    std::uint64_t seed = 11;
};

// Uniform-random logging policy: shows `slate_size` random live articles per
// request and records the user's reactions. Produces unbiased training and
// evaluation logs.
inline std::vector<InteractionEvent> run_logging_policy(const World& world,
                                                        const LoggingPolicyConfig& config) {
    Rng rng(config.seed);
    std::vector<InteractionEvent> events;
    const auto requests = schedule_requests(world, config.from_day, config.to_day,
                                            config.requests_per_user_day, rng);
    for (const auto& request : requests) {
        const auto pool = world.live_pool(request.at, config.candidate_window_days);
        if (pool.empty()) continue;
        std::vector<std::size_t> indices(pool.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
        rng.shuffle(indices);
        const std::size_t shown = std::min(config.slate_size, pool.size());
        const auto& user = world.users[request.user_index];
        for (std::size_t i = 0; i < shown; ++i) {
            const auto& article = *world.find_article(pool[indices[i]]);
            const bool clicked = rng.bernoulli(click_probability(world, user, article, request.at));
            InteractionEvent event;
            event.user = user.id;
            event.article = article.id;
            event.timestamp = request.at;
            event.clicked = clicked;
            event.kpi_value = kpi_sample(world, user, article, clicked, rng);
            events.push_back(std::move(event));
        }
    }
    return events;
}

struct LiveExperimentConfig {
    std::size_t from_day = 4;
    std::size_t to_day = 14;
    double requests_per_user_day = 10.0;
    std::size_t slate_size = 5;
    double candidate_window_days = 3.0;
    std::int64_t profile_window_seconds = 30LL * kSecondsPerDay;
    std::uint64_t seed = 17;
};

// Closed loop: assign variant, build the live slate, rank with the
// variant's pipeline, draw clicks and KPI from the ground truth, append the
// events and feed them straight back into the variant's bandit.
inline std::vector<InteractionEvent> run_experiment(const World& world,
                                                    std::vector<VariantPipeline>& variants,
                                                    const Experiment& experiment,
                                                    const EmbeddingTable& embeddings,
                                                    const SegmentModel* segments,
                                                    const std::vector<InteractionEvent>& warmup,
                                                    const LiveExperimentConfig& config) {
    experiment.validate();
    std::unordered_map<std::string, VariantPipeline*> by_name;
    for (auto& v : variants) by_name[v.name] = &v;
    for (const auto& v : experiment.variants) {
        if (by_name.find(v.name) == by_name.end()) {
            throw std::invalid_argument("run_experiment: no pipeline for variant '" + v.name + "'");
        }
    }

    ClickHistory history(config.profile_window_seconds);
    history.observe_all(warmup);

    Rng rng(config.seed);
    std::vector<InteractionEvent> events;
    const auto requests =
        schedule_requests(world, config.from_day, config.to_day, config.requests_per_user_day, rng);
    for (const auto& request : requests) {
        const auto pool = world.live_pool(request.at, config.candidate_window_days);
        if (pool.empty()) continue;
        const auto& user = world.users[request.user_index];
        const std::string& variant_name = assign_variant(user.id, experiment);
        VariantPipeline& variant = *by_name[variant_name];

        const RecContext ctx = build_context(user.id, request.at, history, embeddings, segments,
                                             variant.use_segments);
        const auto result = variant.pipeline.run(ctx, pool, rng);
        const ScoredList slate = result.list.top(config.slate_size);

        for (const auto& item : slate.items()) {
            const auto& article = *world.find_article(item.id);
            const bool clicked = rng.bernoulli(click_probability(world, user, article, request.at));
            InteractionEvent event;
            event.user = user.id;
            event.article = article.id;
            event.timestamp = request.at;
            event.clicked = clicked;
            event.kpi_value = kpi_sample(world, user, article, clicked, rng);
            event.variant = variant_name;
            if (variant.bank) variant.bank->record(ctx.segment, event);
            history.observe(event);
            events.push_back(std::move(event));
        }
    }
    return events;
}

} // namespace newsmix
