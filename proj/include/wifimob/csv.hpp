#pragma once

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "wifimob/errors.hpp"

namespace wifimob {

// Delimiter-separated text plumbing shared by every file format in this
// project. Deliberately simple: one header row, no quoting (fields must not
// contain the delimiter or newlines), '#' lines are metadata comments.

inline std::vector<std::string> split_fields(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

/// Shortest round-trip decimal form; locale independent.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fmt_int(std::int64_t v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fmt_uint(std::uint64_t v) {
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Strict parse: the whole field must be consumed.
inline std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Reads delimited rows, skipping blank lines and '#' comments. The first
/// data row is the header.
class DelimitedReader {
public:
    DelimitedReader(std::istream& in, char delim) : in_(in), delim_(delim) {}

    /// Returns false at end of stream. line_number() refers to the returned row.
    bool next_row(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_number_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line.front() == '#') continue;
            fields = split_fields(line, delim_);
            return true;
        }
        return false;
    }

    std::size_t line_number() const { return line_number_; }

private:
    std::istream& in_;
    char delim_;
    std::size_t line_number_ = 0;
};

class DelimitedWriter {
public:
    DelimitedWriter(std::ostream& out, char delim) : out_(out), delim_(delim) {}

    void comment(std::string_view text) { out_ << "# " << text << "\n"; }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            check_field(fields[i]);
            if (i) out_ << delim_;
            out_ << fields[i];
        }
        out_ << "\n";
    }

private:
    void check_field(const std::string& f) const {
        if (f.find(delim_) != std::string::npos ||
            f.find('\n') != std::string::npos || f.find('\r') != std::string::npos) {
            throw DataError("field contains delimiter or newline: \"" + f + "\"");
        }
    }

    std::ostream& out_;
    char delim_;
};

}  // namespace wifimob
