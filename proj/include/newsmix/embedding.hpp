#pragma once

#include "newsmix/domain.hpp"
#include "newsmix/serialize.hpp"

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace newsmix {

// Dense article vectors, all of one fixed dimension, no NaN/Inf entries.
class EmbeddingTable {
public:
    EmbeddingTable() = default;

    explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
        if (dimension_ == 0) throw std::invalid_argument("EmbeddingTable: dimension must be >= 1");
    }

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }

    void put(const ArticleId& id, Vector v) {
        require_valid_id(id, "EmbeddingTable");
        if (v.size() != dimension_) {
            throw std::invalid_argument("EmbeddingTable: vector dimension mismatch");
        }
        if (!all_finite(v)) throw std::invalid_argument("EmbeddingTable: non-finite entry");
        vectors_[id] = std::move(v);
    }

    const Vector* find(const ArticleId& id) const {
        const auto it = vectors_.find(id);
        return it != vectors_.end() ? &it->second : nullptr;
    }

    bool contains(const ArticleId& id) const { return vectors_.count(id) > 0; }

    const std::unordered_map<ArticleId, Vector>& vectors() const { return vectors_; }

    // Snapshot format (version 1):
    //   newsmix-embeddings v1
    //   dim <d> count <n>
    //   <escaped id> <v0> ... <v{d-1}>
    std::string serialize() const {
        std::string out = "newsmix-embeddings v1\n";
        out += "dim " + std::to_string(dimension_) + " count " + std::to_string(vectors_.size()) + "\n";
        std::map<ArticleId, const Vector*> ordered;
        for (const auto& [id, v] : vectors_) ordered.emplace(id, &v);
        for (const auto& [id, v] : ordered) {
            out += escape_field(id);
            for (double x : *v) {
                out += ' ';
                out += format_double(x);
            }
            out += '\n';
        }
        return out;
    }

    static EmbeddingTable deserialize(const std::string& text) {
        const auto lines = split_view(text, '\n');
        std::size_t n = 0;
        const auto next_line = [&]() -> std::string_view {
            while (n < lines.size() && lines[n].empty()) ++n;
            if (n >= lines.size()) throw std::invalid_argument("embedding snapshot: truncated");
            return lines[n++];
        };
        if (next_line() != "newsmix-embeddings v1") {
            throw std::invalid_argument("embedding snapshot: bad header");
        }
        const auto meta = split_view(next_line(), ' ');
        if (meta.size() != 4 || meta[0] != "dim" || meta[2] != "count") {
            throw std::invalid_argument("embedding snapshot: bad meta line");
        }
        EmbeddingTable table(static_cast<std::size_t>(parse_int64(meta[1])));
        const auto count = static_cast<std::size_t>(parse_int64(meta[3]));
        for (std::size_t i = 0; i < count; ++i) {
            const auto fields = split_view(next_line(), ' ');
            if (fields.size() != table.dimension_ + 1) {
                throw std::invalid_argument("embedding snapshot: bad vector line");
            }
            Vector v(table.dimension_);
            for (std::size_t j = 0; j < table.dimension_; ++j) v[j] = parse_double(fields[j + 1]);
            table.put(unescape_field(fields[0]), std::move(v));
        }
        return table;
    }

    void save(const std::string& path) const { write_text_file(path, serialize()); }

    static EmbeddingTable load(const std::string& path) {
        return deserialize(read_text_file(path));
    }

private:
    std::size_t dimension_ = 1;
    std::unordered_map<ArticleId, Vector> vectors_;
};

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double squared_distance(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

} // namespace newsmix
