#pragma once

#include "newsmix/domain.hpp"
#include "newsmix/evaluation.hpp"
#include "newsmix/rng.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace newsmix {

constexpr int kAssignmentBuckets = 10000;

struct Variant {
    std::string name;
    double weight = 0.0;
};

struct Experiment {
    std::string test_id;
    std::vector<Variant> variants;
    std::string baseline;

    void validate() const {
        if (test_id.empty()) throw std::invalid_argument("Experiment: empty test id");
        if (variants.size() < 2) throw std::invalid_argument("Experiment: need >= 2 variants");
        double total = 0.0;
        bool baseline_found = false;
        for (const auto& v : variants) {
            if (v.name.empty()) throw std::invalid_argument("Experiment: empty variant name");
            if (!(v.weight >= 0.0)) throw std::invalid_argument("Experiment: negative weight");
            total += v.weight;
            baseline_found |= v.name == baseline;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw std::invalid_argument("Experiment: weights must sum to 1");
        }
        if (!baseline_found) throw std::invalid_argument("Experiment: baseline not a variant");
    }

    const Variant* find(const std::string& name) const {
        for (const auto& v : variants) {
            if (v.name == name) return &v;
        }
        return nullptr;
    }
};

// Stable, attribute-independent assignment: FNV-1a over
// test_id || 0x1F || user_id picks one of 10 000 buckets, and buckets are
// partitioned by cumulative variant weights. The separator byte keeps
// ("ab","c") and ("a","bc") distinct.
inline int assignment_bucket(const std::string& test_id, const UserId& user) {
    std::uint64_t h = fnv1a64(test_id);
    const unsigned char sep = 0x1F;
    h = fnv1a64(&sep, 1, h);
    h = fnv1a64(user, h);
    return static_cast<int>(h % kAssignmentBuckets);
}

inline const std::string& assign_variant(const UserId& user, const Experiment& experiment) {
    experiment.validate();
    const int bucket = assignment_bucket(experiment.test_id, user);
    double cumulative = 0.0;
    for (std::size_t i = 0; i < experiment.variants.size(); ++i) {
        cumulative += experiment.variants[i].weight;
        // The final boundary is pinned to the bucket count so float error in
        // the cumulative sum can never leave a bucket unassigned.
        const int boundary = i + 1 == experiment.variants.size()
                                 ? kAssignmentBuckets
                                 : static_cast<int>(std::floor(cumulative * kAssignmentBuckets));
        if (bucket < boundary) return experiment.variants[i].name;
    }
    return experiment.variants.back().name;
}

struct VariantAggregate {
    std::size_t count = 0;
    double kpi_sum = 0.0;

    std::optional<double> mean_kpi() const {
        if (count == 0) return std::nullopt;
        return kpi_sum / static_cast<double>(count);
    }
};

// Exact per-variant counts and KPI means. Order-independent; an event tagged
// with a variant outside the experiment is an error naming the tag.
inline std::map<std::string, VariantAggregate> aggregate_variants(
    const std::vector<InteractionEvent>& events, const Experiment& experiment) {
    experiment.validate();
    std::map<std::string, VariantAggregate> aggregates;
    for (const auto& v : experiment.variants) aggregates[v.name];
    for (const auto& event : events) {
        const auto it = aggregates.find(event.variant);
        if (it == aggregates.end()) {
            throw std::invalid_argument("aggregate_variants: unknown variant tag '" +
                                        event.variant + "'");
        }
        it->second.count += 1;
        it->second.kpi_sum += event.kpi_value;
    }
    return aggregates;
}

struct UpliftRow {
    std::string variant;
    std::size_t sample_size = 0;
    std::optional<double> mean_kpi;
    std::optional<double> uplift_percent; // absent for the baseline row
};

struct UpliftReport {
    std::string baseline;
    std::vector<UpliftRow> rows; // in experiment variant order
};

inline UpliftReport uplift_report(const std::map<std::string, VariantAggregate>& aggregates,
                                  const Experiment& experiment) {
    experiment.validate();
    const auto baseline_it = aggregates.find(experiment.baseline);
    if (baseline_it == aggregates.end() || baseline_it->second.count == 0) {
        throw std::invalid_argument("uplift_report: baseline variant has no events");
    }
    const auto baseline_mean = baseline_it->second.mean_kpi();
    if (!baseline_mean || !(*baseline_mean > 0.0)) {
        throw std::invalid_argument("uplift_report: baseline mean KPI must be positive");
    }

    UpliftReport report;
    report.baseline = experiment.baseline;
    for (const auto& v : experiment.variants) {
        UpliftRow row;
        row.variant = v.name;
        const auto it = aggregates.find(v.name);
        if (it != aggregates.end()) {
            row.sample_size = it->second.count;
            row.mean_kpi = it->second.mean_kpi();
        }
        if (v.name != experiment.baseline && row.mean_kpi) {
            row.uplift_percent = uplift(*row.mean_kpi, *baseline_mean);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

// Table-shaped text rendering of the uplift report; the baseline row shows
// an em-dash placeholder.
inline std::string render_uplift_report(const UpliftReport& report) {
    std::string out;
    out += "variant                                    uplift      events\n";
    for (const auto& row : report.rows) {
        char line[160];
        std::string uplift_text = "---";
        if (row.uplift_percent) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%+.1f%%", *row.uplift_percent);
            uplift_text = buf;
        }
        std::snprintf(line, sizeof(line), "%-40s %9s %11zu\n", row.variant.c_str(),
                      uplift_text.c_str(), row.sample_size);
        out += line;
    }
    return out;
}

} // namespace newsmix
