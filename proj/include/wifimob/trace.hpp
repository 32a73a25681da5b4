#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wifimob/csv.hpp"
#include "wifimob/errors.hpp"

namespace wifimob {

// Core domain model. All types are immutable values after construction and
// safe to share across threads; the operations below are pure functions.
// Timestamps are integral seconds; sub-second input precision is truncated
// at ingest.

enum class ActivityLabel { stationary, walking, running, unknown };

enum class Provider { gps, network, cell, other };

inline const char* to_string(ActivityLabel l) {
    switch (l) {
        case ActivityLabel::stationary: return "stationary";
        case ActivityLabel::walking: return "walking";
        case ActivityLabel::running: return "running";
        default: return "unknown";
    }
}

inline std::optional<ActivityLabel> label_from_string(std::string_view s) {
    if (s == "stationary") return ActivityLabel::stationary;
    if (s == "walking") return ActivityLabel::walking;
    if (s == "running") return ActivityLabel::running;
    if (s == "unknown") return ActivityLabel::unknown;
    return std::nullopt;
}

inline const char* to_string(Provider p) {
    switch (p) {
        case Provider::gps: return "gps";
        case Provider::network: return "network";
        case Provider::cell: return "cell";
        default: return "other";
    }
}

/// Unrecognized provider tokens map to `other` rather than failing the row;
/// only the exact token "cell" ever matters for filtering.
inline Provider provider_from_string(std::string_view s) {
    if (s == "gps") return Provider::gps;
    if (s == "network") return Provider::network;
    if (s == "cell") return Provider::cell;
    return Provider::other;
}

/// One access point sighting inside a scan. `ap_id` plays the BSSID role.
struct ApObservation {
    std::string ap_id;
    int rssi = 0;  // dBm, in [-120, 0]
    std::optional<int> frequency;  // MHz

    bool operator==(const ApObservation&) const = default;
};

/// One active-scan result: the set of APs visible at `timestamp`.
struct WifiScan {
    std::int64_t timestamp = 0;
    std::vector<ApObservation> observations;  // ap_id unique within one scan

    bool operator==(const WifiScan&) const = default;
};

struct GpsFix {
    std::int64_t timestamp = 0;
    double latitude = 0;   // degrees, [-90, 90]
    double longitude = 0;  // degrees, [-180, 180]
    std::optional<double> reported_speed;  // m/s, >= 0
    std::optional<double> accuracy;        // meters, >= 0
    Provider provider = Provider::other;

    bool operator==(const GpsFix&) const = default;
};

struct ActivitySample {
    std::int64_t timestamp = 0;
    ActivityLabel label = ActivityLabel::unknown;

    bool operator==(const ActivitySample&) const = default;
};

/// All streams of one user, each strictly non-decreasing in timestamp.
struct UserTimeline {
    std::string user_id;
    std::vector<WifiScan> scans;
    std::vector<GpsFix> fixes;
    std::vector<ActivitySample> activities;

    bool operator==(const UserTimeline&) const = default;
};

namespace detail {

inline void validate_scan(const WifiScan& s, std::size_t index) {
    const std::string at = "scans[" + fmt_int(static_cast<std::int64_t>(index)) + "]";
    if (s.timestamp < 0) throw DataError(at + ".timestamp is negative");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < s.observations.size(); ++i) {
        const auto& o = s.observations[i];
        const std::string oat = at + ".observations[" + fmt_int(static_cast<std::int64_t>(i)) + "]";
        if (o.ap_id.empty()) throw DataError(oat + ".ap_id is empty");
        if (o.rssi < -120 || o.rssi > 0)
            throw DataError(oat + ".rssi " + fmt_int(o.rssi) + " outside [-120, 0]");
        if (!seen.insert(o.ap_id).second)
            throw DataError(oat + ".ap_id \"" + o.ap_id + "\" duplicated within scan");
    }
}

inline void validate_fix(const GpsFix& f, std::size_t index) {
    const std::string at = "fixes[" + fmt_int(static_cast<std::int64_t>(index)) + "]";
    if (f.latitude < -90.0 || f.latitude > 90.0)
        throw DataError(at + ".latitude " + fmt_double(f.latitude) + " outside [-90, 90]");
    if (f.longitude < -180.0 || f.longitude > 180.0)
        throw DataError(at + ".longitude " + fmt_double(f.longitude) + " outside [-180, 180]");
    if (f.reported_speed && *f.reported_speed < 0)
        throw DataError(at + ".reported_speed is negative");
    if (f.accuracy && *f.accuracy < 0) throw DataError(at + ".accuracy is negative");
}

/// Stable sort by timestamp, then drop later exact duplicates (identical
/// timestamp and payload). Ties keep input order.
template <typename T>
std::vector<T> sort_dedup(std::vector<T> v) {
    std::stable_sort(v.begin(), v.end(),
                     [](const T& a, const T& b) { return a.timestamp < b.timestamp; });
    std::vector<T> out;
    out.reserve(v.size());
    std::size_t group_start = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0 && v[i].timestamp != v[i - 1].timestamp) group_start = out.size();
        bool dup = false;
        for (std::size_t j = group_start; j < out.size(); ++j) {
            if (out[j] == v[i]) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(std::move(v[i]));
    }
    return out;
}

}  // namespace detail

/// Assembles a timeline from unordered inputs: validates every record,
/// sorts each stream by timestamp (stable, so ties keep input order) and
/// removes exact duplicates. Throws DataError naming the offending record
/// index and field.
inline UserTimeline build_timeline(std::string user_id, std::vector<WifiScan> scans,
                                   std::vector<GpsFix> fixes,
                                   std::vector<ActivitySample> activities) {
    for (std::size_t i = 0; i < scans.size(); ++i) detail::validate_scan(scans[i], i);
    for (std::size_t i = 0; i < fixes.size(); ++i) detail::validate_fix(fixes[i], i);

    UserTimeline t;
    t.user_id = std::move(user_id);
    t.scans = detail::sort_dedup(std::move(scans));
    t.fixes = detail::sort_dedup(std::move(fixes));
    t.activities = detail::sort_dedup(std::move(activities));
    return t;
}

/// Half-open time slice: records with t_start <= timestamp < t_end, order
/// preserved. Throws ConfigError if t_start > t_end.
inline UserTimeline slice_timeline(const UserTimeline& timeline, std::int64_t t_start,
                                   std::int64_t t_end) {
    if (t_start > t_end)
        throw ConfigError("slice_timeline: t_start " + fmt_int(t_start) + " > t_end " +
                          fmt_int(t_end));
    auto in_range = [&](std::int64_t ts) { return ts >= t_start && ts < t_end; };
    UserTimeline out;
    out.user_id = timeline.user_id;
    for (const auto& s : timeline.scans)
        if (in_range(s.timestamp)) out.scans.push_back(s);
    for (const auto& f : timeline.fixes)
        if (in_range(f.timestamp)) out.fixes.push_back(f);
    for (const auto& a : timeline.activities)
        if (in_range(a.timestamp)) out.activities.push_back(a);
    return out;
}

}  // namespace wifimob
