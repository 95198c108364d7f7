#pragma once

#include "newsmix/domain.hpp"
#include "newsmix/serialize.hpp"

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace newsmix {

// Event-log wire format, one record per line:
//
//   ts=<int64> user=<id> article=<id> clicked=<0|1> kpi=<double> variant=<label>
//
// Fields are separated by single spaces and appear in exactly this order.
// Ids and variant labels are percent-escaped (escape_field); an empty variant
// value means the event is untagged. kpi is printed with 17 significant
// digits so the round trip is exact. UTF-8 throughout.

inline std::string format_event(const InteractionEvent& e) {
    std::string line;
    line += "ts=" + std::to_string(e.timestamp);
    line += " user=" + escape_field(e.user);
    line += " article=" + escape_field(e.article);
    line += " clicked=";
    line += e.clicked ? '1' : '0';
    line += " kpi=" + format_double(e.kpi_value);
    line += " variant=" + escape_field(e.variant);
    return line;
}

inline InteractionEvent parse_event_line(std::string_view line, std::size_t line_no) {
    try {
        const auto tokens = split_view(line, ' ');
        if (tokens.size() != 6) throw std::invalid_argument("expected 6 fields");
        InteractionEvent e;
        e.timestamp = parse_int64(expect_field(tokens[0], "ts"));
        e.user = unescape_field(expect_field(tokens[1], "user"));
        e.article = unescape_field(expect_field(tokens[2], "article"));
        const auto clicked = expect_field(tokens[3], "clicked");
        if (clicked == "1") {
            e.clicked = true;
        } else if (clicked == "0") {
            e.clicked = false;
        } else {
            throw std::invalid_argument("clicked must be 0 or 1");
        }
        e.kpi_value = parse_double(expect_field(tokens[4], "kpi"));
        e.variant = unescape_field(expect_field(tokens[5], "variant"));
        e.validate();
        return e;
    } catch (const std::exception& ex) {
        throw ParseError(line_no, ex.what());
    }
}

// Returns events in file order. An empty stream yields an empty sequence;
// malformed lines raise ParseError carrying the 1-based line number.
inline std::vector<InteractionEvent> parse_event_log(std::istream& in) {
    std::vector<InteractionEvent> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        events.push_back(parse_event_line(line, line_no));
    }
    return events;
}

inline std::vector<InteractionEvent> parse_event_log_string(const std::string& text) {
    std::istringstream in(text);
    return parse_event_log(in);
}

inline std::vector<InteractionEvent> load_event_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open event log '" + path + "'");
    return parse_event_log(in);
}

// Validates every event before emitting anything.
inline void write_event_log(std::ostream& out, const std::vector<InteractionEvent>& events) {
    for (const auto& e : events) e.validate();
    for (const auto& e : events) out << format_event(e) << '\n';
}

inline std::string write_event_log_string(const std::vector<InteractionEvent>& events) {
    std::ostringstream out;
    write_event_log(out, events);
    return out.str();
}

inline void save_event_log(const std::string& path, const std::vector<InteractionEvent>& events) {
    write_text_file(path, write_event_log_string(events));
}

} // namespace newsmix
