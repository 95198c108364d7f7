#pragma once

#include "newsmix/domain.hpp"
#include "newsmix/embedding.hpp"

#include <cmath>
#include <vector>

namespace newsmix {

// Cosine similarity in [-1, 1]. A zero vector on either side scores 0: a
// neutral value instead of NaN for articles with missing embeddings.
inline double cosine_similarity(const Vector& u, const Vector& v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine_similarity: dimension mismatch");
    double uv = 0.0;
    double uu = 0.0;
    double vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) return 0.0;
    const double c = uv / (std::sqrt(uu) * std::sqrt(vv));
    return std::clamp(c, -1.0, 1.0);
}

// Scores each candidate by cosine to the profile vector; candidates without
// an embedding score 0. The profile can be a user average (user-to-item) or
// a single article's embedding (item-to-item).
inline ScoredList similarity_rank(const Vector& profile, const std::vector<ArticleId>& candidates,
                                  const EmbeddingTable& table) {
    if (candidates.empty()) throw std::invalid_argument("similarity_rank: empty candidate set");
    std::vector<ScoredItem> items;
    items.reserve(candidates.size());
    for (const auto& id : candidates) {
        const Vector* embedding = table.find(id);
        items.push_back({id, embedding ? cosine_similarity(profile, *embedding) : 0.0});
    }
    return ScoredList(std::move(items), "similarity");
}

} // namespace newsmix
