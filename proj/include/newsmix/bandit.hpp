#pragma once

#include "newsmix/domain.hpp"
#include "newsmix/rng.hpp"
#include "newsmix/serialize.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace newsmix {

enum class BanditPolicy { TS, UCB };
enum class BanditObjective { CLICKS, KPI };

inline const char* to_string(BanditPolicy p) { return p == BanditPolicy::TS ? "ts" : "ucb"; }
inline const char* to_string(BanditObjective o) {
    return o == BanditObjective::CLICKS ? "clicks" : "kpi";
}

inline BanditPolicy bandit_policy_from_string(std::string_view s) {
    if (s == "ts") return BanditPolicy::TS;
    if (s == "ucb") return BanditPolicy::UCB;
    throw std::invalid_argument("unknown bandit policy '" + std::string(s) + "'");
}

inline BanditObjective bandit_objective_from_string(std::string_view s) {
    if (s == "clicks") return BanditObjective::CLICKS;
    if (s == "kpi") return BanditObjective::KPI;
    throw std::invalid_argument("unknown bandit objective '" + std::string(s) + "'");
}

// Exponentially decayed sufficient statistics for one article within one
// segment. All counters halve every half-life of inactivity.
struct ArmStats {
    double impressions = 0.0;
    double clicks = 0.0;
    double kpi_sum = 0.0;
    double kpi_sq_sum = 0.0;
    Timestamp last_update = 0;

    void decay_to(Timestamp now, double half_life_seconds) {
        if (now < last_update) {
            throw std::invalid_argument("ArmStats: events must be applied in time order per arm");
        }
        const double dt = static_cast<double>(now - last_update);
        if (dt > 0.0) {
            const double factor = std::exp2(-dt / half_life_seconds);
            impressions *= factor;
            clicks *= factor;
            kpi_sum *= factor;
            kpi_sq_sum *= factor;
        }
        last_update = now;
    }

    // Copy decayed to `now` without mutating stored state.
    ArmStats decayed(Timestamp now, double half_life_seconds) const {
        ArmStats copy = *this;
        copy.decay_to(now, half_life_seconds);
        return copy;
    }

    double click_rate() const { return impressions > 0.0 ? clicks / impressions : 0.0; }

    double kpi_mean() const { return kpi_sum / std::max(impressions, 1.0); }

    double kpi_stddev() const {
        if (impressions <= 0.0) return 0.0;
        const double mean = kpi_sum / impressions;
        const double var = kpi_sq_sum / impressions - mean * mean;
        return var > 0.0 ? std::sqrt(var) : 0.0;
    }
};

// One draw from the arm's posterior. CLICKS uses a Beta(1 + clicks,
// 1 + impressions - clicks) posterior; KPI uses a Gaussian approximation
// with the empirical standard deviation floored at `kpi_sd_floor` to avoid
// premature lock-in on low-variance arms.
inline double ts_score(const ArmStats& arm, BanditObjective objective, Rng& rng,
                       double kpi_sd_floor = 0.1) {
    if (objective == BanditObjective::CLICKS) {
        const double alpha = 1.0 + arm.clicks;
        const double beta = 1.0 + std::max(arm.impressions - arm.clicks, 0.0);
        return rng.beta(alpha, beta);
    }
    const double mean = arm.kpi_mean();
    const double sd = std::max(arm.kpi_stddev(), kpi_sd_floor);
    return rng.normal(mean, sd / std::sqrt(arm.impressions + 1.0));
}

// UCB1 score: objective mean plus sqrt(2 ln(total) / n). A never-shown arm
// scores +infinity so it is always explored first.
inline double ucb_score(const ArmStats& arm, double total_pulls,
                        BanditObjective objective = BanditObjective::CLICKS) {
    if (arm.impressions <= 0.0) return std::numeric_limits<double>::infinity();
    const double mean =
        objective == BanditObjective::CLICKS ? arm.click_rate() : arm.kpi_sum / arm.impressions;
    const double bonus = std::sqrt(2.0 * std::max(std::log(total_pulls), 0.0) / arm.impressions);
    return mean + bonus;
}

using SegmentId = int;

// Per-segment bandits over the live article pool. Arms are created lazily
// and garbage-collected once their decayed impressions drop below
// `gc_threshold`.
class BanditBank {
public:
    struct Config {
        BanditPolicy policy = BanditPolicy::TS;
        BanditObjective objective = BanditObjective::CLICKS;
        double half_life_seconds = 6.0 * 3600.0;
        double gc_threshold = 0.01;

        void validate() const {
            if (!(half_life_seconds > 0.0)) {
                throw std::invalid_argument("BanditBank: half-life must be positive");
            }
        }
    };

    explicit BanditBank(Config config = {}) : config_(config) { config_.validate(); }

    const Config& config() const { return config_; }

    // Decays the arm to the event time, then applies the impression.
    void record(SegmentId segment, const InteractionEvent& event) {
        event.validate();
        ArmStats& arm = arms_[Key{segment, event.article}];
        if (arm.impressions == 0.0 && arm.last_update == 0) arm.last_update = event.timestamp;
        arm.decay_to(event.timestamp, config_.half_life_seconds);
        arm.impressions += 1.0;
        if (event.clicked) arm.clicks += 1.0;
        arm.kpi_sum += event.kpi_value;
        arm.kpi_sq_sum += event.kpi_value * event.kpi_value;
        total_impressions_ += 1.0;
        total_kpi_ += event.kpi_value;
    }

    // Unknown arms are scored as zero-stat arms (cold-start exploration).
    // Candidates are ranked in ascending id order before any sampling so TS
    // output depends only on (bank, candidates, seed), not on caller order.
    ScoredList rank(SegmentId segment, std::vector<ArticleId> candidates, Rng& rng,
                    Timestamp now) const {
        if (candidates.empty()) throw std::invalid_argument("BanditBank::rank: empty candidate set");
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

        double total_pulls = 0.0;
        std::vector<ArmStats> stats;
        stats.reserve(candidates.size());
        for (const auto& id : candidates) {
            const auto it = arms_.find(Key{segment, id});
            ArmStats arm =
                it != arms_.end() ? it->second.decayed(now, config_.half_life_seconds) : ArmStats{};
            total_pulls += arm.impressions;
            stats.push_back(arm);
        }
        total_pulls = std::max(total_pulls, 1.0);

        std::vector<ScoredItem> items;
        items.reserve(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            double score = 0.0;
            if (config_.policy == BanditPolicy::TS) {
                score = ts_score(stats[i], config_.objective, rng, kpi_sd_floor());
            } else {
                score = ucb_score(stats[i], total_pulls, config_.objective);
            }
            items.push_back({candidates[i], score});
        }
        return ScoredList(std::move(items), std::string("bandit-") + to_string(config_.policy));
    }

    const ArmStats* find(SegmentId segment, const ArticleId& article) const {
        const auto it = arms_.find(Key{segment, article});
        return it != arms_.end() ? &it->second : nullptr;
    }

    std::size_t arm_count() const { return arms_.size(); }

    // Retires arms whose decayed impressions fell below the threshold.
    std::size_t sweep(Timestamp now) {
        std::size_t removed = 0;
        for (auto it = arms_.begin(); it != arms_.end();) {
            const ArmStats decayed = it->second.decayed(now, config_.half_life_seconds);
            if (decayed.impressions < config_.gc_threshold) {
                it = arms_.erase(it);
                ++removed;
            } else {
                ++it;
            }
        }
        return removed;
    }

    // Floor for the Gaussian TS posterior: 0.1 x global KPI mean, with a
    // small default before any data arrives.
    double kpi_sd_floor() const {
        if (total_impressions_ <= 0.0) return 0.1;
        const double global_mean = total_kpi_ / total_impressions_;
        return std::max(0.1 * global_mean, 1e-9);
    }

    // Snapshot format (version 1):
    //   newsmix-bandit-bank v1
    //   policy <ts|ucb> objective <clicks|kpi> half_life <double> gc <double>
    //   totals impressions <double> kpi <double>
    //   arms <count>
    //   <segment> <escaped article id> <impressions> <clicks> <kpi_sum> <kpi_sq_sum> <last_update>
    std::string serialize() const {
        std::string out = "newsmix-bandit-bank v1\n";
        out += "policy ";
        out += to_string(config_.policy);
        out += " objective ";
        out += to_string(config_.objective);
        out += " half_life " + format_double(config_.half_life_seconds);
        out += " gc " + format_double(config_.gc_threshold) + "\n";
        out += "totals impressions " + format_double(total_impressions_) + " kpi " +
               format_double(total_kpi_) + "\n";
        out += "arms " + std::to_string(arms_.size()) + "\n";
        std::map<Key, const ArmStats*> ordered;
        for (const auto& [key, arm] : arms_) ordered.emplace(key, &arm);
        for (const auto& [key, arm] : ordered) {
            out += std::to_string(key.segment) + " " + escape_field(key.article) + " " +
                   format_double(arm->impressions) + " " + format_double(arm->clicks) + " " +
                   format_double(arm->kpi_sum) + " " + format_double(arm->kpi_sq_sum) + " " +
                   std::to_string(arm->last_update) + "\n";
        }
        return out;
    }

    static BanditBank deserialize(const std::string& text) {
        const auto lines = split_view(text, '\n');
        std::size_t n = 0;
        const auto next_line = [&]() -> std::string_view {
            while (n < lines.size() && lines[n].empty()) ++n;
            if (n >= lines.size()) throw std::invalid_argument("bandit snapshot: truncated");
            return lines[n++];
        };
        if (next_line() != "newsmix-bandit-bank v1") {
            throw std::invalid_argument("bandit snapshot: bad header");
        }
        const auto cfg_tokens = split_view(next_line(), ' ');
        if (cfg_tokens.size() != 8 || cfg_tokens[0] != "policy" || cfg_tokens[2] != "objective" ||
            cfg_tokens[4] != "half_life" || cfg_tokens[6] != "gc") {
            throw std::invalid_argument("bandit snapshot: bad config line");
        }
        Config config;
        config.policy = bandit_policy_from_string(cfg_tokens[1]);
        config.objective = bandit_objective_from_string(cfg_tokens[3]);
        config.half_life_seconds = parse_double(cfg_tokens[5]);
        config.gc_threshold = parse_double(cfg_tokens[7]);
        BanditBank bank(config);

        const auto totals = split_view(next_line(), ' ');
        if (totals.size() != 5 || totals[0] != "totals" || totals[1] != "impressions" ||
            totals[3] != "kpi") {
            throw std::invalid_argument("bandit snapshot: bad totals line");
        }
        bank.total_impressions_ = parse_double(totals[2]);
        bank.total_kpi_ = parse_double(totals[4]);

        const auto arms_header = split_view(next_line(), ' ');
        if (arms_header.size() != 2 || arms_header[0] != "arms") {
            throw std::invalid_argument("bandit snapshot: bad arms header");
        }
        const auto count = static_cast<std::size_t>(parse_int64(arms_header[1]));
        for (std::size_t i = 0; i < count; ++i) {
            const auto fields = split_view(next_line(), ' ');
            if (fields.size() != 7) throw std::invalid_argument("bandit snapshot: bad arm line");
            Key key{static_cast<SegmentId>(parse_int64(fields[0])), unescape_field(fields[1])};
            ArmStats arm;
            arm.impressions = parse_double(fields[2]);
            arm.clicks = parse_double(fields[3]);
            arm.kpi_sum = parse_double(fields[4]);
            arm.kpi_sq_sum = parse_double(fields[5]);
            arm.last_update = parse_int64(fields[6]);
            if (arm.impressions < 0.0 || arm.clicks < 0.0 || arm.clicks > arm.impressions + 1e-9) {
                throw std::invalid_argument("bandit snapshot: invalid arm stats");
            }
            bank.arms_.emplace(std::move(key), arm);
        }
        return bank;
    }

    void save(const std::string& path) const { write_text_file(path, serialize()); }

    static BanditBank load(const std::string& path) { return deserialize(read_text_file(path)); }

private:
    struct Key {
        SegmentId segment;
        ArticleId article;

        bool operator==(const Key&) const = default;
        bool operator<(const Key& other) const {
            if (segment != other.segment) return segment < other.segment;
            return article < other.article;
        }
    };

    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint64_t h = fnv1a64(&k.segment, sizeof(k.segment));
            return static_cast<std::size_t>(fnv1a64(k.article, h));
        }
    };

    Config config_;
    std::unordered_map<Key, ArmStats, KeyHash> arms_;
    double total_impressions_ = 0.0;
    double total_kpi_ = 0.0;
};

} // namespace newsmix
