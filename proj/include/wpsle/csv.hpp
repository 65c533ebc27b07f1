#pragma once

#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace wpsle::csv {

/// Shortest form that reads back to the same double (17 significant digits).
inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string num(const std::optional<double>& x) { return x ? num(*x) : std::string(); }

inline std::string num(long x) { return std::to_string(x); }

inline std::string num(int x) { return std::to_string(x); }

using Row = std::vector<std::string>;

inline void write_row(std::ostream& os, const Row& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        os << row[i];
    }
    os << '\n';
}

struct Table {
    Row header;
    std::vector<Row> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return header.size();
    }
};

inline void write(std::ostream& os, const Table& t) {
    write_row(os, t.header);
    for (const auto& r : t.rows) write_row(os, r);
}

inline Row split(std::string_view line) {
    Row out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Reads a table; lines starting with '#' are report headers and are skipped.
inline Table read(std::istream& is) {
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (!have_header) {
            t.header = split(line);
            have_header = true;
        } else {
            t.rows.push_back(split(line));
        }
    }
    return t;
}

}  // namespace wpsle::csv
