#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "wifimob/csv.hpp"
#include "wifimob/errors.hpp"
#include "wifimob/trace.hpp"

namespace wifimob {

// Stage-one feature extraction: scan-to-scan stability of the visible AP
// set, GPS-derived speeds, and fixed-grid window aggregates that feed the
// classifiers. All functions are pure.

/// Similarity of one consecutive scan pair. `coefficient` is empty when both
/// AP sets were empty (a Wi-Fi dead zone carries no stability signal).
struct StabilitySample {
    double t_mid = 0;  // midpoint of the two scan timestamps, seconds
    std::optional<double> coefficient;  // in [0, 1] when defined
    std::int64_t gap = 0;               // seconds between the two scans, > 0

    bool operator==(const StabilitySample&) const = default;
};

enum class SpeedSource { reported, derived };

struct SpeedSample {
    double t_mid = 0;  // seconds
    double speed = 0;  // m/s, >= 0
    SpeedSource source = SpeedSource::derived;

    bool operator==(const SpeedSample&) const = default;
};

/// Where a window's speed value came from: a GPS measurement in the window,
/// the regression stage, or nowhere.
enum class SpeedProvenance { observed, imputed, absent };

inline const char* to_string(SpeedProvenance p) {
    switch (p) {
        case SpeedProvenance::observed: return "observed";
        case SpeedProvenance::imputed: return "imputed";
        default: return "absent";
    }
}

inline std::optional<SpeedProvenance> provenance_from_string(std::string_view s) {
    if (s == "observed") return SpeedProvenance::observed;
    if (s == "imputed") return SpeedProvenance::imputed;
    if (s == "absent") return SpeedProvenance::absent;
    return std::nullopt;
}

/// One fused feature vector over a half-open time window. Statistics are
/// empty exactly when the window held no contributing samples for them.
struct FeatureRecord {
    std::int64_t window_start = 0;
    std::int64_t window_end = 0;
    std::optional<double> stability_mean;
    std::optional<double> stability_min;
    std::optional<double> ap_count_mean;
    std::optional<double> ap_count_std;
    std::optional<double> rssi_mean;
    std::optional<double> rssi_std;
    std::optional<double> speed;  // m/s
    SpeedProvenance speed_provenance = SpeedProvenance::absent;
    std::optional<ActivityLabel> label;

    bool operator==(const FeatureRecord&) const = default;
};

/// |X∩Y| / |X∪Y| over AP-identity sets; empty when both sets are empty.
inline std::optional<double> jaccard_stability(const std::set<std::string>& x,
                                               const std::set<std::string>& y) {
    if (x.empty() && y.empty()) return std::nullopt;
    std::size_t inter = 0;
    for (const auto& id : x) inter += y.count(id);
    const std::size_t uni = x.size() + y.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// One stability sample per consecutive scan pair no further apart than
/// max_gap_s. Pairs across longer outages (or at identical timestamps) are
/// skipped rather than scored.
inline std::vector<StabilitySample> stability_series(const std::vector<WifiScan>& scans,
                                                     std::int64_t max_gap_s) {
    if (max_gap_s <= 0) throw ConfigError("stability max_gap_s must be > 0");
    std::vector<StabilitySample> out;
    for (std::size_t i = 0; i + 1 < scans.size(); ++i) {
        const auto& a = scans[i];
        const auto& b = scans[i + 1];
        const std::int64_t gap = b.timestamp - a.timestamp;
        if (gap <= 0 || gap > max_gap_s) continue;
        std::set<std::string> x, y;
        for (const auto& o : a.observations) x.insert(o.ap_id);
        for (const auto& o : b.observations) y.insert(o.ap_id);
        StabilitySample s;
        s.t_mid = (static_cast<double>(a.timestamp) + static_cast<double>(b.timestamp)) / 2.0;
        s.coefficient = jaccard_stability(x, y);
        s.gap = gap;
        out.push_back(s);
    }
    return out;
}

/// Great-circle distance in meters on a sphere of radius 6 371 000 m.
inline double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
    const double phi1 = lat1 * kDegToRad;
    const double phi2 = lat2 * kDegToRad;
    const double dphi = (lat2 - lat1) * kDegToRad;
    const double dlam = (lon2 - lon1) * kDegToRad;
    const double sp = std::sin(dphi / 2.0);
    const double sl = std::sin(dlam / 2.0);
    const double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

/// Moving speed from the fix stream. With prefer_reported, a fix carrying a
/// measured speed emits it directly at the fix timestamp; a consecutive pair
/// no further apart than max_gap_s emits distance/gap at the pair midpoint
/// unless both endpoints already emitted measured speeds.
inline std::vector<SpeedSample> speed_series(const std::vector<GpsFix>& fixes,
                                             std::int64_t max_gap_s, bool prefer_reported) {
    if (max_gap_s <= 0) throw ConfigError("speed max_gap_s must be > 0");
    std::vector<SpeedSample> out;
    auto reported = [&](const GpsFix& f) { return prefer_reported && f.reported_speed; };
    for (std::size_t i = 0; i < fixes.size(); ++i) {
        const auto& f = fixes[i];
        if (reported(f))
            out.push_back({static_cast<double>(f.timestamp), *f.reported_speed,
                           SpeedSource::reported});
        if (i + 1 >= fixes.size()) continue;
        const auto& g = fixes[i + 1];
        if (reported(f) && reported(g)) continue;
        const std::int64_t gap = g.timestamp - f.timestamp;
        if (gap <= 0 || gap > max_gap_s) continue;
        const double dist = haversine_m(f.latitude, f.longitude, g.latitude, g.longitude);
        SpeedSample s;
        s.t_mid = (static_cast<double>(f.timestamp) + static_cast<double>(g.timestamp)) / 2.0;
        s.speed = dist / static_cast<double>(gap);
        s.source = SpeedSource::derived;
        out.push_back(s);
    }
    return out;
}

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    std::int64_t r = a % b;
    if (r != 0 && ((r < 0) != (b < 0))) --q;
    return q;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

/// Population standard deviation (divide by n).
inline double pop_std(const std::vector<double>& v, double mean) {
    double s = 0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

/// Index range [lo, hi) of sorted `times` falling inside [start, end).
template <typename T, typename GetTime>
std::pair<std::size_t, std::size_t> window_range(const std::vector<T>& items, GetTime time,
                                                 double start, double end) {
    auto lo = std::lower_bound(items.begin(), items.end(), start,
                               [&](const T& it, double v) { return time(it) < v; });
    auto hi = std::lower_bound(lo, items.end(), end,
                               [&](const T& it, double v) { return time(it) < v; });
    return {static_cast<std::size_t>(lo - items.begin()),
            static_cast<std::size_t>(hi - items.begin())};
}

}  // namespace detail

/// Aggregates the streams over the fixed grid of windows
/// [k*hop_s, k*hop_s + window_s), k integral, anchored at time 0. Only
/// windows overlapping at least one sample of any stream are emitted, in
/// increasing window_start order. Window speed is the mean of in-window
/// speed samples (provenance observed) or absent; the label is the majority
/// of in-window activity samples other than unknown, ties broken toward the
/// more mobile label.
inline std::vector<FeatureRecord> windowed_features(const UserTimeline& timeline,
                                                    const std::vector<StabilitySample>& stability,
                                                    const std::vector<SpeedSample>& speeds,
                                                    std::int64_t window_s, std::int64_t hop_s) {
    if (window_s <= 0) throw ConfigError("window_s must be > 0");
    if (hop_s <= 0) throw ConfigError("hop_s must be > 0");

    bool any = false;
    double t_min = 0, t_max = 0;
    auto feed = [&](double t) {
        if (!any) {
            t_min = t_max = t;
            any = true;
        } else {
            t_min = std::min(t_min, t);
            t_max = std::max(t_max, t);
        }
    };
    for (const auto& s : timeline.scans) feed(static_cast<double>(s.timestamp));
    for (const auto& s : stability) feed(s.t_mid);
    for (const auto& s : speeds) feed(s.t_mid);
    for (const auto& a : timeline.activities) feed(static_cast<double>(a.timestamp));
    if (!any) return {};

    // First and last grid windows able to contain a sample: start > t_min -
    // window and start <= t_max.
    const auto lo_i = static_cast<std::int64_t>(std::floor(t_min));
    const auto hi_i = static_cast<std::int64_t>(std::floor(t_max));
    const std::int64_t k_min = detail::floor_div(lo_i - window_s, hop_s) + 1;
    const std::int64_t k_max = detail::floor_div(hi_i, hop_s);

    std::vector<FeatureRecord> out;
    for (std::int64_t k = k_min; k <= k_max; ++k) {
        const std::int64_t start = k * hop_s;
        const std::int64_t end = start + window_s;
        const auto startd = static_cast<double>(start);
        const auto endd = static_cast<double>(end);

        auto [sc_lo, sc_hi] = detail::window_range(
            timeline.scans, [](const WifiScan& s) { return static_cast<double>(s.timestamp); },
            startd, endd);
        auto [st_lo, st_hi] = detail::window_range(
            stability, [](const StabilitySample& s) { return s.t_mid; }, startd, endd);
        auto [sp_lo, sp_hi] = detail::window_range(
            speeds, [](const SpeedSample& s) { return s.t_mid; }, startd, endd);
        auto [ac_lo, ac_hi] = detail::window_range(
            timeline.activities,
            [](const ActivitySample& a) { return static_cast<double>(a.timestamp); }, startd,
            endd);

        if (sc_lo == sc_hi && st_lo == st_hi && sp_lo == sp_hi && ac_lo == ac_hi) continue;

        FeatureRecord r;
        r.window_start = start;
        r.window_end = end;

        std::vector<double> coeffs;
        for (std::size_t i = st_lo; i < st_hi; ++i)
            if (stability[i].coefficient) coeffs.push_back(*stability[i].coefficient);
        if (!coeffs.empty()) {
            r.stability_mean = detail::mean_of(coeffs);
            r.stability_min = *std::min_element(coeffs.begin(), coeffs.end());
        }

        if (sc_lo != sc_hi) {
            std::vector<double> counts;
            std::vector<double> rssi;
            for (std::size_t i = sc_lo; i < sc_hi; ++i) {
                counts.push_back(static_cast<double>(timeline.scans[i].observations.size()));
                for (const auto& o : timeline.scans[i].observations)
                    rssi.push_back(static_cast<double>(o.rssi));
            }
            r.ap_count_mean = detail::mean_of(counts);
            r.ap_count_std = detail::pop_std(counts, *r.ap_count_mean);
            if (!rssi.empty()) {
                r.rssi_mean = detail::mean_of(rssi);
                r.rssi_std = detail::pop_std(rssi, *r.rssi_mean);
            }
        }

        if (sp_lo != sp_hi) {
            std::vector<double> vals;
            for (std::size_t i = sp_lo; i < sp_hi; ++i) vals.push_back(speeds[i].speed);
            r.speed = detail::mean_of(vals);
            r.speed_provenance = SpeedProvenance::observed;
        }

        std::size_t votes[3] = {0, 0, 0};
        for (std::size_t i = ac_lo; i < ac_hi; ++i) {
            const auto l = timeline.activities[i].label;
            if (l == ActivityLabel::unknown) continue;
            ++votes[static_cast<int>(l)];
        }
        // Scan from the most mobile label down so ties resolve toward it.
        std::size_t best = 0;
        std::optional<ActivityLabel> label;
        for (int l = 2; l >= 0; --l) {
            if (votes[l] > best) {
                best = votes[l];
                label = static_cast<ActivityLabel>(l);
            }
        }
        r.label = label;

        out.push_back(r);
    }
    return out;
}

inline const std::vector<std::string>& feature_columns() {
    static const std::vector<std::string> cols = {
        "window_start", "window_end", "stability_mean", "stability_min",
        "ap_count_mean", "ap_count_std", "rssi_mean",     "rssi_std",
        "speed",        "speed_provenance", "label"};
    return cols;
}

/// Canonical features file: one header row, one row per record, empty fields
/// for undefined values. `comments` lines are emitted first, '#'-prefixed.
inline void write_features(std::ostream& out, const std::vector<FeatureRecord>& records,
                           char delimiter = ',',
                           const std::vector<std::string>& comments = {}) {
    DelimitedWriter w(out, delimiter);
    for (const auto& c : comments) w.comment(c);
    w.row(feature_columns());
    auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
    for (const auto& r : records) {
        std::vector<std::string> row = {
            fmt_int(r.window_start),
            fmt_int(r.window_end),
            opt(r.stability_mean),
            opt(r.stability_min),
            opt(r.ap_count_mean),
            opt(r.ap_count_std),
            opt(r.rssi_mean),
            opt(r.rssi_std),
            opt(r.speed),
            to_string(r.speed_provenance),
            r.label ? to_string(*r.label) : ""};
        w.row(row);
    }
}

/// Strict reader for the canonical features file; any malformed row is a
/// DataError naming the line. Comment lines are skipped.
inline std::vector<FeatureRecord> read_features(std::istream& in, char delimiter = ',') {
    DelimitedReader reader(in, delimiter);
    std::vector<std::string> header;
    if (!reader.next_row(header)) throw DataError("features file is empty");
    if (header != feature_columns()) throw DataError("features file header mismatch");

    std::vector<FeatureRecord> records;
    std::vector<std::string> row;
    while (reader.next_row(row)) {
        const std::string at = "features line " + fmt_int(static_cast<std::int64_t>(reader.line_number()));
        if (row.size() != feature_columns().size())
            throw DataError(at + ": expected " +
                            fmt_int(static_cast<std::int64_t>(feature_columns().size())) +
                            " fields, got " + fmt_int(static_cast<std::int64_t>(row.size())));
        auto req_int = [&](std::size_t i, const char* name) {
            auto v = parse_int(row[i]);
            if (!v) throw DataError(at + ": " + name + " \"" + row[i] + "\" unparsable");
            return *v;
        };
        auto opt_dbl = [&](std::size_t i, const char* name) -> std::optional<double> {
            if (row[i].empty()) return std::nullopt;
            auto v = parse_double(row[i]);
            if (!v) throw DataError(at + ": " + name + " \"" + row[i] + "\" unparsable");
            return v;
        };
        FeatureRecord r;
        r.window_start = req_int(0, "window_start");
        r.window_end = req_int(1, "window_end");
        if (r.window_start >= r.window_end) throw DataError(at + ": window_start >= window_end");
        r.stability_mean = opt_dbl(2, "stability_mean");
        r.stability_min = opt_dbl(3, "stability_min");
        r.ap_count_mean = opt_dbl(4, "ap_count_mean");
        r.ap_count_std = opt_dbl(5, "ap_count_std");
        r.rssi_mean = opt_dbl(6, "rssi_mean");
        r.rssi_std = opt_dbl(7, "rssi_std");
        r.speed = opt_dbl(8, "speed");
        auto prov = provenance_from_string(row[9]);
        if (!prov) throw DataError(at + ": speed_provenance \"" + row[9] + "\" unrecognized");
        r.speed_provenance = *prov;
        if ((r.speed_provenance == SpeedProvenance::absent) == r.speed.has_value())
            throw DataError(at + ": speed and speed_provenance disagree");
        if (!row[10].empty()) {
            auto l = label_from_string(row[10]);
            if (!l) throw DataError(at + ": label \"" + row[10] + "\" unrecognized");
            r.label = *l;
        }
        records.push_back(r);
    }
    return records;
}

}  // namespace wifimob
