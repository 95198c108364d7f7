#pragma once

#include "newsmix/embedding.hpp"
#include "newsmix/rng.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace newsmix {

// Arithmetic mean of the embeddings of the given articles; articles missing
// from the table are ignored. Returns nullopt when nothing usable remains
// (cold user) — that is a value, not an error.
inline std::optional<Vector> user_profile(const std::vector<ArticleId>& read_articles,
                                          const EmbeddingTable& table) {
    Vector sum(table.dimension(), 0.0);
    std::size_t found = 0;
    for (const auto& id : read_articles) {
        if (const Vector* v = table.find(id)) {
            for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += (*v)[k];
            ++found;
        }
    }
    if (found == 0) return std::nullopt;
    for (double& x : sum) x /= static_cast<double>(found);
    return sum;
}

// k centroids over user profiles. Segment 0 is reserved for cold users, so
// centroid i serves segment i + 1.
struct SegmentModel {
    std::vector<Vector> centroids;

    std::size_t k() const { return centroids.size(); }
    std::size_t dimension() const { return centroids.empty() ? 0 : centroids.front().size(); }

    void validate() const {
        if (centroids.empty()) throw std::invalid_argument("SegmentModel: k must be >= 1");
        const std::size_t d = centroids.front().size();
        for (const auto& c : centroids) {
            if (c.size() != d) throw std::invalid_argument("SegmentModel: centroid dim mismatch");
            if (!all_finite(c)) throw std::invalid_argument("SegmentModel: non-finite centroid");
        }
    }

    // Snapshot format (version 1):
    //   newsmix-segments v1
    //   dim <d> k <k>
    //   <c0> ... <c{d-1}>        (one line per centroid)
    std::string serialize() const {
        validate();
        std::string out = "newsmix-segments v1\n";
        out += "dim " + std::to_string(dimension()) + " k " + std::to_string(k()) + "\n";
        for (const auto& c : centroids) {
            for (std::size_t j = 0; j < c.size(); ++j) {
                if (j > 0) out += ' ';
                out += format_double(c[j]);
            }
            out += '\n';
        }
        return out;
    }

    static SegmentModel deserialize(const std::string& text) {
        const auto lines = split_view(text, '\n');
        std::size_t n = 0;
        const auto next_line = [&]() -> std::string_view {
            while (n < lines.size() && lines[n].empty()) ++n;
            if (n >= lines.size()) throw std::invalid_argument("segment snapshot: truncated");
            return lines[n++];
        };
        if (next_line() != "newsmix-segments v1") {
            throw std::invalid_argument("segment snapshot: bad header");
        }
        const auto meta = split_view(next_line(), ' ');
        if (meta.size() != 4 || meta[0] != "dim" || meta[2] != "k") {
            throw std::invalid_argument("segment snapshot: bad meta line");
        }
        const auto dim = static_cast<std::size_t>(parse_int64(meta[1]));
        const auto k = static_cast<std::size_t>(parse_int64(meta[3]));
        SegmentModel model;
        for (std::size_t i = 0; i < k; ++i) {
            const auto fields = split_view(next_line(), ' ');
            if (fields.size() != dim) throw std::invalid_argument("segment snapshot: bad centroid");
            Vector c(dim);
            for (std::size_t j = 0; j < dim; ++j) c[j] = parse_double(fields[j]);
            model.centroids.push_back(std::move(c));
        }
        model.validate();
        return model;
    }

    void save(const std::string& path) const { write_text_file(path, serialize()); }
    static SegmentModel load(const std::string& path) { return deserialize(read_text_file(path)); }
};

struct KMeansResult {
    SegmentModel model;
    std::vector<std::size_t> assignments;  // final cluster per input point
    std::vector<double> wcss_per_iteration; // non-increasing by construction
    std::size_t iterations = 0;
};

namespace detail {

inline std::size_t nearest_centroid(const Vector& point, const std::vector<Vector>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(point, centroids[c]);
        if (d < best_d) { // strict: ties stay with the lowest index
            best_d = d;
            best = c;
        }
    }
    return best;
}

} // namespace detail

// Lloyd's iterations from k-means++ seeding. Stops when assignments are
// stable or max_iters is reached; a cluster that loses every point keeps its
// previous centroid. Deterministic given the seed.
inline KMeansResult kmeans(const std::vector<Vector>& profiles, std::size_t k,
                           std::size_t max_iters, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (profiles.size() < k) {
        throw std::invalid_argument("kmeans: fewer profiles than clusters");
    }
    const std::size_t dim = profiles.front().size();
    for (const auto& p : profiles) {
        if (p.size() != dim) throw std::invalid_argument("kmeans: dimension mismatch");
    }

    Rng rng(seed);
    std::vector<Vector> centroids;
    centroids.reserve(k);

    // k-means++ seeding.
    centroids.push_back(profiles[rng.uniform_int(profiles.size())]);
    std::vector<double> min_dist(profiles.size(), 0.0);
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            double d = squared_distance(profiles[i], centroids[0]);
            for (std::size_t c = 1; c < centroids.size(); ++c) {
                d = std::min(d, squared_distance(profiles[i], centroids[c]));
            }
            min_dist[i] = d;
            total += d;
        }
        if (total <= 0.0) {
            // All remaining mass is on already-chosen positions (duplicates).
            centroids.push_back(profiles[rng.uniform_int(profiles.size())]);
            continue;
        }
        double target = rng.uniform() * total;
        std::size_t chosen = profiles.size() - 1;
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            target -= min_dist[i];
            if (target <= 0.0) {
                chosen = i;
                break;
            }
        }
        centroids.push_back(profiles[chosen]);
    }

    KMeansResult result;
    std::vector<std::size_t> assignment(profiles.size(), 0);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        bool changed = false;
        double wcss = 0.0;
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            const std::size_t c = detail::nearest_centroid(profiles[i], centroids);
            wcss += squared_distance(profiles[i], centroids[c]);
            if (c != assignment[i]) {
                assignment[i] = c;
                changed = true;
            }
        }
        result.wcss_per_iteration.push_back(wcss);
        result.iterations = iter + 1;
        if (!changed && iter > 0) break;

        std::vector<Vector> sums(k, Vector(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < profiles.size(); ++i) {
            const std::size_t c = assignment[i];
            for (std::size_t j = 0; j < dim; ++j) sums[c][j] += profiles[i][j];
            ++counts[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t j = 0; j < dim; ++j) {
                centroids[c][j] = sums[c][j] / static_cast<double>(counts[c]);
            }
        }
    }

    result.model.centroids = std::move(centroids);
    result.assignments = std::move(assignment);
    result.model.validate();
    return result;
}

// Cold users (absent profile) go to the global segment 0; everyone else to
// 1 + nearest centroid, ties to the lowest index.
inline SegmentId assign_segment(const std::optional<Vector>& profile, const SegmentModel& model) {
    if (!profile) return 0;
    if (profile->size() != model.dimension()) {
        throw std::invalid_argument("assign_segment: profile dimension mismatch");
    }
    return static_cast<SegmentId>(1 + detail::nearest_centroid(*profile, model.centroids));
}

} // namespace newsmix
