#pragma once

#include "newsmix/harness.hpp"
#include "newsmix/service.hpp"

#include <json.hpp>

#include <string>

namespace newsmix {

using json = nlohmann::json;

// Service config schema (JSON, documented in the README):
//
// {
//   "listen": "127.0.0.1", "port": 8080,
//   "latency_budget_ms": 50.0, "default_k": 10,
//   "profile_window_days": 30, "seed": 1,
//   "event_log": "events.log",
//   "snapshots": {"embeddings": "...", "segments": "...",
//                 "deep_model": "...", "catalog": "..."},
//   "bandit": {"policy": "ts", "objective": "clicks", "half_life_hours": 6},
//   "experiment": {"test_id": "...", "baseline": "...",
//                  "variants": [{"name": "...", "weight": 0.5}, ...]},
//   "variants": [{"name": "...", "use_segments": true,
//                 "strategy": "weighted_average",
//                 "sources": [{"kind": "bandit", "weight": 0.4}, ...]}, ...]
// }

inline Experiment experiment_from_json(const json& j) {
    Experiment experiment;
    experiment.test_id = j.at("test_id").get<std::string>();
    experiment.baseline = j.at("baseline").get<std::string>();
    for (const auto& v : j.at("variants")) {
        experiment.variants.push_back(
            {v.at("name").get<std::string>(), v.at("weight").get<double>()});
    }
    experiment.validate();
    return experiment;
}

inline BanditBank::Config bandit_config_from_json(const json& j) {
    BanditBank::Config config;
    if (j.contains("policy")) config.policy = bandit_policy_from_string(j.at("policy").get<std::string>());
    if (j.contains("objective")) {
        config.objective = bandit_objective_from_string(j.at("objective").get<std::string>());
    }
    if (j.contains("half_life_hours")) {
        config.half_life_seconds = j.at("half_life_hours").get<double>() * 3600.0;
    }
    if (j.contains("gc_threshold")) config.gc_threshold = j.at("gc_threshold").get<double>();
    config.validate();
    return config;
}

inline ServiceConfig service_config_from_json(const json& j) {
    ServiceConfig config;
    if (j.contains("listen")) config.listen_address = j.at("listen").get<std::string>();
    if (j.contains("port")) config.port = j.at("port").get<int>();
    if (j.contains("latency_budget_ms")) {
        config.latency_budget_ms = j.at("latency_budget_ms").get<double>();
    }
    if (j.contains("default_k")) config.default_k = j.at("default_k").get<std::size_t>();
    if (j.contains("profile_window_days")) {
        config.profile_window_seconds =
            static_cast<std::int64_t>(j.at("profile_window_days").get<double>() * 86400.0);
    }
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("event_log")) config.event_log_path = j.at("event_log").get<std::string>();

    if (j.contains("snapshots")) {
        const auto& s = j.at("snapshots");
        if (s.contains("embeddings")) config.embeddings_path = s.at("embeddings").get<std::string>();
        if (s.contains("segments")) config.segments_path = s.at("segments").get<std::string>();
        if (s.contains("deep_model")) config.deep_model_path = s.at("deep_model").get<std::string>();
        if (s.contains("catalog")) config.catalog_path = s.at("catalog").get<std::string>();
    }
    if (j.contains("bandit")) config.bandit = bandit_config_from_json(j.at("bandit"));
    config.experiment = experiment_from_json(j.at("experiment"));

    for (const auto& v : j.at("variants")) {
        VariantSpec spec;
        spec.name = v.at("name").get<std::string>();
        if (v.contains("use_segments")) spec.use_segments = v.at("use_segments").get<bool>();
        if (v.contains("strategy")) {
            spec.strategy = mix_strategy_from_string(v.at("strategy").get<std::string>());
        }
        for (const auto& s : v.at("sources")) {
            SourceSpec source;
            source.kind = source_kind_from_string(s.at("kind").get<std::string>());
            if (s.contains("weight")) source.weight = s.at("weight").get<double>();
            spec.sources.push_back(source);
        }
        config.variants.push_back(std::move(spec));
    }
    config.validate();
    return config;
}

inline ServiceConfig load_service_config(const std::string& path) {
    return service_config_from_json(json::parse(read_text_file(path)));
}

// Simulation config schema:
//
// {
//   "world": {"num_users": 2000, "articles_per_day": 50, "num_topics": 4,
//             "horizon_days": 14, "dimension": 16, "topic_noise": 0.25, ...},
//   "warmup": {"to_day": 4, "requests_per_user_day": 8, "slate_size": 5},
//   "live": {"requests_per_user_day": 10, "slate_size": 5},
//   "training": {"segment_count": 4, "kpi_weighting": true, ...},
//   "seed": 1
// }

inline SynergyRunConfig synergy_config_from_json(const json& j) {
    SynergyRunConfig config;
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("world")) {
        const auto& w = j.at("world");
        auto& world = config.world;
        if (w.contains("num_users")) world.num_users = w.at("num_users").get<std::size_t>();
        if (w.contains("articles_per_day")) {
            world.articles_per_day = w.at("articles_per_day").get<std::size_t>();
        }
        if (w.contains("num_topics")) world.num_topics = w.at("num_topics").get<std::size_t>();
        if (w.contains("horizon_days")) world.horizon_days = w.at("horizon_days").get<std::size_t>();
        if (w.contains("dimension")) world.dimension = w.at("dimension").get<std::size_t>();
        if (w.contains("topic_noise")) world.topic_noise = w.at("topic_noise").get<double>();
        if (w.contains("freshness_half_life_hours")) {
            world.freshness_half_life_hours = w.at("freshness_half_life_hours").get<double>();
        }
        if (w.contains("kpi_affinity_scale")) {
            world.kpi_affinity_scale = w.at("kpi_affinity_scale").get<double>();
        }
    }
    if (j.contains("warmup")) {
        const auto& w = j.at("warmup");
        if (w.contains("to_day")) config.warmup.to_day = w.at("to_day").get<std::size_t>();
        if (w.contains("requests_per_user_day")) {
            config.warmup.requests_per_user_day = w.at("requests_per_user_day").get<double>();
        }
        if (w.contains("slate_size")) config.warmup.slate_size = w.at("slate_size").get<std::size_t>();
    }
    if (j.contains("live")) {
        const auto& l = j.at("live");
        if (l.contains("requests_per_user_day")) {
            config.live.requests_per_user_day = l.at("requests_per_user_day").get<double>();
        }
        if (l.contains("slate_size")) config.live.slate_size = l.at("slate_size").get<std::size_t>();
    }
    if (j.contains("training")) {
        const auto& t = j.at("training");
        if (t.contains("segment_count")) {
            config.training.segment_count = t.at("segment_count").get<std::size_t>();
        }
        if (t.contains("kpi_weighting")) {
            config.training.kpi_weighting = t.at("kpi_weighting").get<bool>();
        }
        if (t.contains("embedding_dimension")) {
            config.training.item2vec.dimension = t.at("embedding_dimension").get<std::size_t>();
        }
        if (t.contains("epochs")) config.training.item2vec.epochs = t.at("epochs").get<std::size_t>();
        if (t.contains("deep_hidden")) {
            config.training.deep.hidden = t.at("deep_hidden").get<std::size_t>();
        }
        if (t.contains("deep_epochs")) {
            config.training.deep.epochs = t.at("deep_epochs").get<std::size_t>();
        }
    }
    return config;
}

inline SynergyRunConfig load_synergy_config(const std::string& path) {
    return synergy_config_from_json(json::parse(read_text_file(path)));
}

} // namespace newsmix
