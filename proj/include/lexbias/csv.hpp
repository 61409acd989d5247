#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lexbias/error.hpp"

namespace lexbias::csv {

/// Shortest decimal text that parses back to exactly the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

inline std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += escape(fields[i]);
    }
    return out;
}

/// Splits one CSV record. Quoted fields may contain commas and doubled quotes
/// but not newlines.
inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline double parse_double(const std::string& s, std::string_view what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw InputError("cannot parse " + std::string(what) + " from '" + s + "'");
    return v;
}

inline std::int64_t parse_int(const std::string& s, std::string_view what) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw InputError("cannot parse " + std::string(what) + " from '" + s + "'");
    return v;
}

/// A CSV file whose leading "# key=value" lines are metadata.
struct Document {
    std::vector<std::string> comments;  // without the leading "# "
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based file line per row

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw InputError("missing CSV column '" + std::string(name) + "'");
    }

    /// Value of a "# key=value" comment, or empty.
    std::string meta(std::string_view key) const {
        for (const auto& c : comments) {
            if (c.size() > key.size() && c.compare(0, key.size(), key) == 0 && c[key.size()] == '=')
                return c.substr(key.size() + 1);
        }
        return {};
    }
};

inline Document read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    Document doc;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header && line[0] == '#') {
            std::string_view body(line);
            body.remove_prefix(1);
            if (!body.empty() && body[0] == ' ') body.remove_prefix(1);
            doc.comments.emplace_back(body);
            continue;
        }
        auto fields = split(line);
        if (!have_header) {
            doc.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != doc.header.size())
            throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(doc.header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        doc.rows.push_back(std::move(fields));
        doc.line_numbers.push_back(lineno);
    }
    if (!have_header) throw InputError("'" + path + "' has no CSV header");
    return doc;
}

} // namespace lexbias::csv
