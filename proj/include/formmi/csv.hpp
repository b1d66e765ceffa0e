#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "formmi/errors.hpp"

namespace formmi {

// Shortest round-trip decimal form; deterministic across runs.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int digits) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return std::string(buf);
}

// RFC-4180: quote fields containing comma, quote or newline; CRLF row breaks.
inline std::string csv_escape(const std::string& field) {
    bool needs_quote = false;
    for (char c : field) {
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs_quote = true;
            break;
        }
    }
    if (!needs_quote) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

inline void csv_write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os << ',';
        os << csv_escape(fields[i]);
    }
    os << "\r\n";
}

// Reader accepts LF or CRLF and quoted fields (quotes may contain newlines).
inline bool csv_read_row(std::istream& is, std::vector<std::string>& fields) {
    fields.clear();
    int c = is.get();
    if (c == EOF) return false;
    std::string cur;
    bool in_quotes = false;
    while (true) {
        if (c == EOF) {
            fields.push_back(cur);
            return true;
        }
        char ch = static_cast<char>(c);
        if (in_quotes) {
            if (ch == '"') {
                int peek = is.peek();
                if (peek == '"') {
                    cur += '"';
                    is.get();
                } else {
                    in_quotes = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"' && cur.empty()) {
            in_quotes = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch == '\n') {
            fields.push_back(cur);
            return true;
        } else if (ch == '\r') {
            int peek = is.peek();
            if (peek == '\n') is.get();
            fields.push_back(cur);
            return true;
        } else {
            cur += ch;
        }
        c = is.get();
    }
}

inline double parse_double_field(const std::string& s, const std::string& what) {
    if (s.empty()) return std::nan("");
    const char* begin = s.data();
    const char* end = begin + s.size();
    double v = 0.0;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) throw data_error("bad numeric field for " + what + ": '" + s + "'");
    return v;
}

inline long parse_long_field(const std::string& s, const std::string& what) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    long v = 0;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end) throw data_error("bad integer field for " + what + ": '" + s + "'");
    return v;
}

}  // namespace formmi
