#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wifimob/csv.hpp"
#include "wifimob/errors.hpp"
#include "wifimob/trace.hpp"

namespace wifimob {

// Parsers for the three per-user trace streams. Each parser is total over a
// well-formed file: every data row is either accepted or skipped with a
// diagnostic, so accepted_rows + skipped_rows = data_rows. A malformed row
// never aborts the file; only a header missing a required column does.

/// Maps logical field names to source columns. A value is matched against
/// header names first; a value that is a non-negative integer and matches no
/// header is used as a 0-based column index. Extra source columns are
/// ignored. Logical fields: timestamp, ap_id, rssi, frequency, latitude,
/// longitude, speed, accuracy, provider, label.
struct ColumnMapping {
    std::map<std::string, std::string> fields;

    static ColumnMapping wifi_default() {
        return {{{"timestamp", "timestamp"},
                 {"ap_id", "ap_id"},
                 {"rssi", "rssi"},
                 {"frequency", "frequency"}}};
    }
    static ColumnMapping gps_default() {
        return {{{"timestamp", "timestamp"},
                 {"latitude", "latitude"},
                 {"longitude", "longitude"},
                 {"speed", "speed"},
                 {"accuracy", "accuracy"},
                 {"provider", "provider"}}};
    }
    static ColumnMapping activity_default() {
        return {{{"timestamp", "timestamp"}, {"label", "label_code"}}};
    }
};

struct FilterConfig {
    bool drop_cell_provider = true;
    std::optional<double> max_accuracy_m;  // > 0 when present
    bool drop_unknown_activity = true;
};

/// Row accounting for one parse call. `diagnostics` holds one line per
/// skipped row, prefixed with the source line number.
struct ParseStats {
    std::size_t data_rows = 0;
    std::size_t accepted_rows = 0;
    std::size_t skipped_rows = 0;
    std::vector<std::string> diagnostics;
};

struct FilterStats {
    std::size_t fixes_dropped_provider = 0;
    std::size_t fixes_dropped_accuracy = 0;
    std::size_t activities_dropped_unknown = 0;
};

inline std::map<int, ActivityLabel> default_code_table() {
    return {{0, ActivityLabel::stationary},
            {1, ActivityLabel::walking},
            {2, ActivityLabel::running},
            {3, ActivityLabel::unknown}};
}

namespace detail {

/// Column positions for one stream, resolved against a concrete header.
/// Required fields missing from the header raise DataError; optional fields
/// resolve to "absent for every row" instead.
struct ResolvedColumns {
    std::map<std::string, std::size_t> index;

    bool has(const std::string& logical) const { return index.count(logical) != 0; }
    std::size_t at(const std::string& logical) const { return index.find(logical)->second; }
};

inline ResolvedColumns resolve_columns(const std::vector<std::string>& header,
                                       const ColumnMapping& mapping,
                                       const std::vector<std::string>& required) {
    ResolvedColumns out;
    for (const auto& [logical, source] : mapping.fields) {
        std::optional<std::size_t> pos;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == source) {
                pos = i;
                break;
            }
        }
        if (!pos) {
            auto idx = parse_int(source);
            if (idx && *idx >= 0 && static_cast<std::size_t>(*idx) < header.size())
                pos = static_cast<std::size_t>(*idx);
        }
        if (pos) out.index[logical] = *pos;
    }
    for (const auto& logical : required) {
        if (!out.has(logical)) {
            auto it = mapping.fields.find(logical);
            const std::string source = it == mapping.fields.end() ? "<unmapped>" : it->second;
            throw DataError("header has no column \"" + source + "\" for field " + logical);
        }
    }
    return out;
}

/// A cell is absent when its column is unresolved, the row is too short, or
/// the field is empty.
inline std::optional<std::string> cell(const std::vector<std::string>& row,
                                       const ResolvedColumns& cols, const std::string& logical) {
    if (!cols.has(logical)) return std::nullopt;
    std::size_t i = cols.at(logical);
    if (i >= row.size() || row[i].empty()) return std::nullopt;
    return row[i];
}

/// Timestamps are integral seconds; fractional input truncates toward zero.
inline std::optional<std::int64_t> parse_timestamp(const std::string& s) {
    if (auto i = parse_int(s)) return i;
    if (auto d = parse_double(s)) {
        if (!std::isfinite(*d)) return std::nullopt;
        return static_cast<std::int64_t>(*d);
    }
    return std::nullopt;
}

inline void note_skip(ParseStats* stats, std::size_t line, const std::string& why) {
    if (!stats) return;
    ++stats->skipped_rows;
    stats->diagnostics.push_back("line " + fmt_int(static_cast<std::int64_t>(line)) + ": " + why);
}

}  // namespace detail

/// Parses a Wi-Fi observation file (one row per AP sighting). Rows sharing a
/// timestamp merge into one scan; within a scan, a repeated ap_id keeps the
/// strongest (largest) rssi. Scans come out in timestamp order.
inline std::vector<WifiScan> parse_wifi(std::istream& in, const ColumnMapping& mapping,
                                        char delimiter = ',', ParseStats* stats = nullptr) {
    DelimitedReader reader(in, delimiter);
    std::vector<std::string> header;
    if (!reader.next_row(header)) return {};
    auto cols = detail::resolve_columns(header, mapping, {"timestamp", "ap_id", "rssi"});

    std::map<std::int64_t, std::vector<ApObservation>> by_time;
    std::vector<std::string> row;
    while (reader.next_row(row)) {
        if (stats) ++stats->data_rows;
        const std::size_t line = reader.line_number();

        auto ts_cell = detail::cell(row, cols, "timestamp");
        auto ts = ts_cell ? detail::parse_timestamp(*ts_cell) : std::nullopt;
        if (!ts || *ts < 0) {
            detail::note_skip(stats, line, "timestamp \"" + ts_cell.value_or("") + "\" invalid");
            continue;
        }
        auto ap = detail::cell(row, cols, "ap_id");
        if (!ap) {
            detail::note_skip(stats, line, "ap_id is empty");
            continue;
        }
        auto rssi_cell = detail::cell(row, cols, "rssi");
        auto rssi_d = rssi_cell ? parse_double(*rssi_cell) : std::nullopt;
        if (!rssi_d || !std::isfinite(*rssi_d)) {
            detail::note_skip(stats, line, "rssi \"" + rssi_cell.value_or("") + "\" unparsable");
            continue;
        }
        const int rssi = static_cast<int>(std::llround(*rssi_d));
        if (rssi < -120 || rssi > 0) {
            detail::note_skip(stats, line, "rssi " + fmt_int(rssi) + " outside [-120, 0]");
            continue;
        }
        std::optional<int> frequency;
        if (auto f = detail::cell(row, cols, "frequency")) {
            auto fi = parse_int(*f);
            if (!fi) {
                detail::note_skip(stats, line, "frequency \"" + *f + "\" unparsable");
                continue;
            }
            frequency = static_cast<int>(*fi);
        }

        auto& obs = by_time[*ts];
        bool merged = false;
        for (auto& o : obs) {
            if (o.ap_id == *ap) {
                if (rssi > o.rssi) {
                    o.rssi = rssi;
                    o.frequency = frequency;
                }
                merged = true;
                break;
            }
        }
        if (!merged) obs.push_back({*ap, rssi, frequency});
        if (stats) ++stats->accepted_rows;
    }

    std::vector<WifiScan> scans;
    scans.reserve(by_time.size());
    for (auto& [ts, obs] : by_time) scans.push_back({ts, std::move(obs)});
    return scans;
}

/// Parses a GPS fix file. Optional columns (speed, accuracy, provider) that
/// are unmapped, missing, or empty yield absent fields, never zeros.
inline std::vector<GpsFix> parse_gps(std::istream& in, const ColumnMapping& mapping,
                                     char delimiter = ',', ParseStats* stats = nullptr) {
    DelimitedReader reader(in, delimiter);
    std::vector<std::string> header;
    if (!reader.next_row(header)) return {};
    auto cols = detail::resolve_columns(header, mapping, {"timestamp", "latitude", "longitude"});

    std::vector<GpsFix> fixes;
    std::vector<std::string> row;
    while (reader.next_row(row)) {
        if (stats) ++stats->data_rows;
        const std::size_t line = reader.line_number();

        auto ts_cell = detail::cell(row, cols, "timestamp");
        auto ts = ts_cell ? detail::parse_timestamp(*ts_cell) : std::nullopt;
        if (!ts || *ts < 0) {
            detail::note_skip(stats, line, "timestamp \"" + ts_cell.value_or("") + "\" invalid");
            continue;
        }
        auto lat_cell = detail::cell(row, cols, "latitude");
        auto lat = lat_cell ? parse_double(*lat_cell) : std::nullopt;
        if (!lat || !std::isfinite(*lat) || *lat < -90.0 || *lat > 90.0) {
            detail::note_skip(stats, line,
                              "latitude \"" + lat_cell.value_or("") + "\" outside [-90, 90]");
            continue;
        }
        auto lon_cell = detail::cell(row, cols, "longitude");
        auto lon = lon_cell ? parse_double(*lon_cell) : std::nullopt;
        if (!lon || !std::isfinite(*lon) || *lon < -180.0 || *lon > 180.0) {
            detail::note_skip(stats, line,
                              "longitude \"" + lon_cell.value_or("") + "\" outside [-180, 180]");
            continue;
        }

        GpsFix fix;
        fix.timestamp = *ts;
        fix.latitude = *lat;
        fix.longitude = *lon;
        bool bad = false;
        if (auto s = detail::cell(row, cols, "speed")) {
            auto v = parse_double(*s);
            if (!v || !std::isfinite(*v) || *v < 0) {
                detail::note_skip(stats, line, "speed \"" + *s + "\" invalid");
                bad = true;
            } else {
                fix.reported_speed = *v;
            }
        }
        if (!bad) {
            if (auto a = detail::cell(row, cols, "accuracy")) {
                auto v = parse_double(*a);
                if (!v || !std::isfinite(*v) || *v < 0) {
                    detail::note_skip(stats, line, "accuracy \"" + *a + "\" invalid");
                    bad = true;
                } else {
                    fix.accuracy = *v;
                }
            }
        }
        if (bad) continue;
        if (auto p = detail::cell(row, cols, "provider")) fix.provider = provider_from_string(*p);

        fixes.push_back(std::move(fix));
        if (stats) ++stats->accepted_rows;
    }
    return fixes;
}

/// Parses an activity label file of (timestamp, integer code) rows. Codes
/// not present in `code_table` skip the row.
inline std::vector<ActivitySample> parse_activity(std::istream& in, const ColumnMapping& mapping,
                                                  const std::map<int, ActivityLabel>& code_table,
                                                  char delimiter = ',',
                                                  ParseStats* stats = nullptr) {
    DelimitedReader reader(in, delimiter);
    std::vector<std::string> header;
    if (!reader.next_row(header)) return {};
    auto cols = detail::resolve_columns(header, mapping, {"timestamp", "label"});

    std::vector<ActivitySample> samples;
    std::vector<std::string> row;
    while (reader.next_row(row)) {
        if (stats) ++stats->data_rows;
        const std::size_t line = reader.line_number();

        auto ts_cell = detail::cell(row, cols, "timestamp");
        auto ts = ts_cell ? detail::parse_timestamp(*ts_cell) : std::nullopt;
        if (!ts || *ts < 0) {
            detail::note_skip(stats, line, "timestamp \"" + ts_cell.value_or("") + "\" invalid");
            continue;
        }
        auto code_cell = detail::cell(row, cols, "label");
        auto code = code_cell ? parse_int(*code_cell) : std::nullopt;
        if (!code) {
            detail::note_skip(stats, line,
                              "label code \"" + code_cell.value_or("") + "\" unparsable");
            continue;
        }
        auto it = code_table.find(static_cast<int>(*code));
        if (it == code_table.end()) {
            detail::note_skip(stats, line, "label code " + fmt_int(*code) + " not in code table");
            continue;
        }
        samples.push_back({*ts, it->second});
        if (stats) ++stats->accepted_rows;
    }
    return samples;
}

/// Canonical Wi-Fi file: one row per observation, scans flattened in order.
/// A scan with no observations produces no rows, so only non-empty scans
/// round-trip; parse_wifi(write_wifi(scans)) == scans for such input.
inline void write_wifi(std::ostream& out, const std::vector<WifiScan>& scans,
                       char delimiter = ',', const std::vector<std::string>& comments = {}) {
    DelimitedWriter w(out, delimiter);
    for (const auto& c : comments) w.comment(c);
    w.row({"timestamp", "ap_id", "rssi", "frequency"});
    for (const auto& s : scans) {
        for (const auto& o : s.observations) {
            w.row({fmt_int(s.timestamp), o.ap_id, fmt_int(o.rssi),
                   o.frequency ? fmt_int(*o.frequency) : ""});
        }
    }
}

/// Canonical GPS file; absent optional fields serialize as empty cells.
inline void write_gps(std::ostream& out, const std::vector<GpsFix>& fixes, char delimiter = ',',
                      const std::vector<std::string>& comments = {}) {
    DelimitedWriter w(out, delimiter);
    for (const auto& c : comments) w.comment(c);
    w.row({"timestamp", "latitude", "longitude", "speed", "accuracy", "provider"});
    for (const auto& f : fixes) {
        w.row({fmt_int(f.timestamp), fmt_double(f.latitude), fmt_double(f.longitude),
               f.reported_speed ? fmt_double(*f.reported_speed) : "",
               f.accuracy ? fmt_double(*f.accuracy) : "", to_string(f.provider)});
    }
}

/// Canonical activity file; labels are written as the smallest code mapped
/// to them. A label absent from the table is a DataError.
inline void write_activity(std::ostream& out, const std::vector<ActivitySample>& samples,
                           const std::map<int, ActivityLabel>& code_table, char delimiter = ',',
                           const std::vector<std::string>& comments = {}) {
    DelimitedWriter w(out, delimiter);
    for (const auto& c : comments) w.comment(c);
    w.row({"timestamp", "label_code"});
    for (const auto& s : samples) {
        std::optional<int> code;
        for (const auto& [k, v] : code_table) {
            if (v == s.label) {
                code = k;
                break;
            }
        }
        if (!code)
            throw DataError(std::string("no code maps to label ") + to_string(s.label));
        w.row({fmt_int(s.timestamp), fmt_int(*code)});
    }
}

/// Drops low-trust records: cell-tower located fixes, fixes with accuracy
/// worse than the configured bound, and unknown-activity samples. Survivors
/// keep their order and content. Never fails.
inline UserTimeline apply_filters(const UserTimeline& timeline, const FilterConfig& config,
                                  FilterStats* stats = nullptr) {
    if (config.max_accuracy_m && *config.max_accuracy_m <= 0)
        throw ConfigError("max_accuracy_m must be > 0");

    UserTimeline out;
    out.user_id = timeline.user_id;
    out.scans = timeline.scans;
    for (const auto& f : timeline.fixes) {
        if (config.drop_cell_provider && f.provider == Provider::cell) {
            if (stats) ++stats->fixes_dropped_provider;
            continue;
        }
        if (config.max_accuracy_m && f.accuracy && *f.accuracy > *config.max_accuracy_m) {
            if (stats) ++stats->fixes_dropped_accuracy;
            continue;
        }
        out.fixes.push_back(f);
    }
    for (const auto& a : timeline.activities) {
        if (config.drop_unknown_activity && a.label == ActivityLabel::unknown) {
            if (stats) ++stats->activities_dropped_unknown;
            continue;
        }
        out.activities.push_back(a);
    }
    return out;
}

}  // namespace wifimob
