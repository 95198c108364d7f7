#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace newsmix {

// Parse error with a 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// 17 significant digits round-trip any finite double exactly.
inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline double parse_double(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty number");
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    const double x = std::strtod(tmp.c_str(), &end);
    if (errno == ERANGE || end != tmp.c_str() + tmp.size()) {
        throw std::invalid_argument("bad number '" + tmp + "'");
    }
    return x;
}

inline std::int64_t parse_int64(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty integer");
    std::string tmp(s);
    char* end = nullptr;
    errno = 0;
    const long long x = std::strtoll(tmp.c_str(), &end, 10);
    if (errno == ERANGE || end != tmp.c_str() + tmp.size()) {
        throw std::invalid_argument("bad integer '" + tmp + "'");
    }
    return x;
}

// Percent-encoding for id-like values embedded in line-oriented text files.
// Escapes '%', all bytes <= 0x20 (space and controls) and 0x7F; multi-byte
// UTF-8 passes through untouched.
inline std::string escape_field(std::string_view raw) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    out.reserve(raw.size());
    for (unsigned char c : raw) {
        if (c == '%' || c <= 0x20 || c == 0x7F) {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        } else {
            out.push_back(static_cast<char>(c));
        }
    }
    return out;
}

inline int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

inline std::string unescape_field(std::string_view escaped) {
    std::string out;
    out.reserve(escaped.size());
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        if (escaped[i] == '%') {
            if (i + 2 >= escaped.size()) throw std::invalid_argument("truncated escape");
            const int hi = hex_value(escaped[i + 1]);
            const int lo = hex_value(escaped[i + 2]);
            if (hi < 0 || lo < 0) throw std::invalid_argument("bad escape");
            out.push_back(static_cast<char>((hi << 4) | lo));
            i += 2;
        } else {
            out.push_back(escaped[i]);
        }
    }
    return out;
}

// "key=value" with value possibly empty; the key must match exactly.
inline std::string_view expect_field(std::string_view token, std::string_view key) {
    if (token.size() < key.size() + 1 || token.substr(0, key.size()) != key ||
        token[key.size()] != '=') {
        throw std::invalid_argument("expected field '" + std::string(key) + "'");
    }
    return token.substr(key.size() + 1);
}

inline std::vector<std::string_view> split_view(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

} // namespace newsmix
