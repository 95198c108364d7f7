#pragma once

#include "newsmix/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <memory>
#include <string>

namespace newsmix {

// HTTP facade over RecoService:
//   POST /v1/events                           one event, event-log field schema
//   GET  /v1/recommendations?user=&k=&candidates=   comma-separated candidates
//   GET  /v1/variants/{user}?test=            stable variant lookup
//   GET  /v1/health
//   GET  /v1/metrics
//   POST /v1/snapshots/{kind}                 body: {"path": ...} hot swap
class HttpServer {
public:
    explicit HttpServer(RecoService& service) : service_(service) { route(); }

    bool listen(const std::string& address, int port) { return server_.listen(address, port); }

    bool bind_to_port(const std::string& address, int port) {
        return server_.bind_to_port(address, port);
    }

    bool listen_after_bind() { return server_.listen_after_bind(); }

    void stop() { server_.stop(); }

    httplib::Server& raw() { return server_; }

private:
    static nlohmann::json error_body(const std::string& message) {
        return nlohmann::json{{"error", message}};
    }

    static Timestamp now_seconds() {
        return static_cast<Timestamp>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
    }

    void route() {
        server_.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok"})", "application/json");
        });

        server_.Post("/v1/events", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const auto j = nlohmann::json::parse(req.body);
                InteractionEvent event;
                event.timestamp = j.at("timestamp").get<Timestamp>();
                event.user = j.at("user").get<std::string>();
                event.article = j.at("article").get<std::string>();
                event.clicked = j.at("clicked").get<bool>();
                event.kpi_value = j.value("kpi_value", 0.0);
                event.variant = j.value("variant", std::string());
                service_.ingest(event);
                res.set_content(R"({"status":"accepted"})", "application/json");
            } catch (const std::exception& ex) {
                res.status = 400;
                res.set_content(error_body(ex.what()).dump(), "application/json");
            }
        });

        server_.Get("/v1/recommendations",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        try {
                            const std::string user = req.get_param_value("user");
                            const std::string candidates_raw = req.get_param_value("candidates");
                            std::size_t k = service_.config().default_k;
                            if (req.has_param("k")) {
                                k = static_cast<std::size_t>(
                                    std::stoull(req.get_param_value("k")));
                            }
                            Timestamp now = now_seconds();
                            if (req.has_param("now")) {
                                now = static_cast<Timestamp>(
                                    std::stoll(req.get_param_value("now")));
                            }
                            std::vector<ArticleId> candidates;
                            for (const auto part : split_view(candidates_raw, ',')) {
                                if (!part.empty()) candidates.emplace_back(part);
                            }
                            const auto response = service_.recommend(user, candidates, k, now);

                            nlohmann::json body;
                            body["variant"] = response.variant;
                            body["segment"] = response.segment;
                            body["fallback"] = response.fallback;
                            body["latency_ms"] = response.latency_ms;
                            auto& articles = body["articles"] = nlohmann::json::array();
                            for (const auto& item : response.list.items()) {
                                articles.push_back({{"id", item.id}, {"score", item.score}});
                            }
                            res.set_content(body.dump(), "application/json");
                        } catch (const std::invalid_argument& ex) {
                            res.status = 400;
                            res.set_content(error_body(ex.what()).dump(), "application/json");
                        } catch (const std::exception& ex) {
                            res.status = 500;
                            res.set_content(error_body(ex.what()).dump(), "application/json");
                        }
                    });

        server_.Get(R"(/v1/variants/(.+))",
                    [this](const httplib::Request& req, httplib::Response& res) {
                        try {
                            const UserId user = req.matches[1];
                            nlohmann::json body;
                            body["user"] = user;
                            body["test_id"] = service_.config().experiment.test_id;
                            body["variant"] = service_.variant_for(user);
                            res.set_content(body.dump(), "application/json");
                        } catch (const std::exception& ex) {
                            res.status = 400;
                            res.set_content(error_body(ex.what()).dump(), "application/json");
                        }
                    });

        server_.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
            const auto m = service_.metrics_snapshot();
            nlohmann::json body;
            body["requests_total"] = m.requests_total;
            body["fallbacks"] = m.fallbacks;
            body["events_ingested"] = m.events_ingested;
            body["events_rejected"] = m.events_rejected;
            body["latency_p50_ms"] = m.latency_p50_ms;
            body["latency_p90_ms"] = m.latency_p90_ms;
            body["latency_p99_ms"] = m.latency_p99_ms;
            body["snapshot_epoch"] = m.snapshot_epoch;
            auto& variants = body["variants"] = nlohmann::json::object();
            for (const auto& [name, vm] : m.variants) {
                nlohmann::json v;
                v["requests"] = vm.requests;
                v["events"] = vm.events;
                if (const auto mean = vm.mean_kpi()) v["mean_kpi"] = *mean;
                variants[name] = std::move(v);
            }
            res.set_content(body.dump(), "application/json");
        });

        server_.Post(R"(/v1/snapshots/(embeddings|segments|deep-model|catalog))",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         try {
                             const auto kind =
                                 RecoService::snapshot_kind_from_string(std::string(req.matches[1]));
                             const auto j = nlohmann::json::parse(req.body);
                             service_.swap_snapshot(kind, j.at("path").get<std::string>());
                             nlohmann::json body;
                             body["status"] = "swapped";
                             body["epoch"] = service_.snapshot_epoch();
                             res.set_content(body.dump(), "application/json");
                         } catch (const std::exception& ex) {
                             res.status = 400;
                             res.set_content(error_body(ex.what()).dump(), "application/json");
                         }
                     });
    }

    RecoService& service_;
    httplib::Server server_;
};

} // namespace newsmix
