#pragma once

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace newsmix {

// Identifiers are opaque byte strings: equality and hashing are byte-exact
// and case-sensitive. Non-empty, at most 256 bytes.
using ArticleId = std::string;
using UserId = std::string;

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

constexpr std::size_t kMaxIdBytes = 256;

inline bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= kMaxIdBytes;
}

inline void require_valid_id(const std::string& id, const char* what) {
    if (!valid_id(id)) {
        throw std::invalid_argument(std::string(what) + ": id must be non-empty and <= 256 bytes");
    }
}

using Vector = std::vector<double>;

inline bool all_finite(const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Article {
    ArticleId id;
    Timestamp published_at = 0; // must be > 0
    std::int64_t length = 0;    // characters or tokens, consistent per corpus
    std::optional<Vector> embedding;

    void validate(std::size_t expected_dim = 0) const {
        require_valid_id(id, "Article");
        if (published_at <= 0) throw std::invalid_argument("Article: published_at must be > 0");
        if (length < 0) throw std::invalid_argument("Article: length must be >= 0");
        if (embedding) {
            if (!all_finite(*embedding)) throw std::invalid_argument("Article: embedding not finite");
            if (expected_dim != 0 && embedding->size() != expected_dim) {
                throw std::invalid_argument("Article: embedding dimension mismatch");
            }
        }
    }
};

// One user-article exposure; the atom of all training and evaluation.
// An unclicked impression accrues no KPI, so clicked == false forces
// kpi_value == 0.
struct InteractionEvent {
    UserId user;
    ArticleId article;
    Timestamp timestamp = 0;
    bool clicked = false;
    double kpi_value = 0.0;
    std::string variant; // empty = untagged

    bool operator==(const InteractionEvent&) const = default;

    void validate() const {
        require_valid_id(user, "InteractionEvent.user");
        require_valid_id(article, "InteractionEvent.article");
        if (!(kpi_value >= 0.0) || !std::isfinite(kpi_value)) {
            throw std::invalid_argument("InteractionEvent: kpi_value must be finite and >= 0");
        }
        if (!clicked && kpi_value != 0.0) {
            throw std::invalid_argument("InteractionEvent: unclicked impression must have kpi_value 0");
        }
        if (!variant.empty() && variant.size() > kMaxIdBytes) {
            throw std::invalid_argument("InteractionEvent: variant label too long");
        }
    }
};

struct ScoredItem {
    ArticleId id;
    double score = 0.0;

    bool operator==(const ScoredItem&) const = default;
};

// Ordered (article, score) pairs: descending score, ties broken by ascending
// byte order of the id. No duplicate articles. `source` names the producing
// model.
class ScoredList {
public:
    ScoredList() = default;

    ScoredList(std::vector<ScoredItem> items, std::string source)
        : items_(std::move(items)), source_(std::move(source)) {
        sort_and_check();
    }

    const std::vector<ScoredItem>& items() const { return items_; }
    const std::string& source() const { return source_; }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const ScoredItem& operator[](std::size_t i) const { return items_[i]; }

    ScoredList top(std::size_t k) const {
        std::vector<ScoredItem> head(items_.begin(),
                                     items_.begin() + std::min(k, items_.size()));
        return ScoredList(std::move(head), source_);
    }

    // Order-preserving score transform; the mapping must be monotone
    // non-decreasing or the rebuilt list will legitimately re-sort.
    template <typename Fn>
    ScoredList transformed(Fn&& fn, std::string source) const {
        std::vector<ScoredItem> out = items_;
        for (auto& item : out) item.score = fn(item.score);
        return ScoredList(std::move(out), std::move(source));
    }

    bool operator==(const ScoredList& other) const { return items_ == other.items_; }

private:
    void sort_and_check() {
        std::sort(items_.begin(), items_.end(), [](const ScoredItem& a, const ScoredItem& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        std::vector<const ArticleId*> ids;
        ids.reserve(items_.size());
        for (const auto& item : items_) ids.push_back(&item.id);
        std::sort(ids.begin(), ids.end(), [](const ArticleId* a, const ArticleId* b) { return *a < *b; });
        for (std::size_t i = 1; i < ids.size(); ++i) {
            if (*ids[i] == *ids[i - 1]) {
                throw std::invalid_argument("ScoredList: duplicate article id '" + *ids[i] + "'");
            }
        }
        for (const auto& item : items_) {
            if (std::isnan(item.score)) throw std::invalid_argument("ScoredList: NaN score");
        }
    }

    std::vector<ScoredItem> items_;
    std::string source_;
};

} // namespace newsmix
