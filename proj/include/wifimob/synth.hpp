#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wifimob/csv.hpp"
#include "wifimob/errors.hpp"
#include "wifimob/features.hpp"
#include "wifimob/rng.hpp"
#include "wifimob/trace.hpp"

namespace wifimob {

// Synthetic labelled corpus: a single agent performs a regime-switching
// walk (exponential segment durations, per-segment speed and heading,
// reflective square boundary) across a square grid of access points with
// log-distance path loss. Everything downstream of the seed is
// deterministic, including the exact order random draws are consumed, so a
// corpus is byte-identical across runs and platforms.

struct RegimeSpec {
    double mean_duration_s = 1800.0;  // 0 disables the regime
    double speed_lo = 0.0;            // m/s
    double speed_hi = 0.0;
};

struct SynthConfig {
    std::string user_id = "synth";
    // The area must comfortably exceed max speed x gps_period, or boundary
    // reflections compress the displacement-derived speeds toward zero.
    double area_m = 2400.0;       // square side
    double ap_spacing_m = 30.0;   // grid pitch
    double tx_power_dbm = -35.0;  // received level at 1 m
    double path_loss_exponent = 3.0;
    double rssi_noise_std = 0.5;          // dB
    double visibility_floor_dbm = -90.0;  // detection cutoff
    std::int64_t scan_period_s = 30;
    std::int64_t gps_period_s = 600;
    double gps_dropout_prob = 0.0;
    std::int64_t activity_period_s = 3;
    RegimeSpec stationary{1800.0, 0.0, 0.1};
    RegimeSpec walking{1800.0, 0.5, 2.0};
    RegimeSpec running{1800.0, 2.5, 5.0};
    std::int64_t duration_s = 7200;
    std::uint64_t seed = 42;
    // Local tangent-plane origin for projecting (x, y) meters to fixes.
    double origin_lat_deg = 45.0;
    double origin_lon_deg = 7.0;
};

struct GroundTruthSample {
    std::int64_t timestamp = 0;
    double x = 0;  // meters
    double y = 0;
    double speed = 0;  // m/s, the current segment speed
    ActivityLabel regime = ActivityLabel::stationary;

    bool operator==(const GroundTruthSample&) const = default;
};

/// One sample per simulated second.
using GroundTruth = std::vector<GroundTruthSample>;

struct SynthOutput {
    UserTimeline timeline;
    GroundTruth truth;
};

namespace detail {

inline void validate_synth_config(const SynthConfig& c) {
    if (!(c.area_m > 0)) throw ConfigError("area_m must be > 0");
    if (!(c.ap_spacing_m > 0)) throw ConfigError("ap_spacing_m must be > 0");
    if (!(c.path_loss_exponent > 0)) throw ConfigError("path_loss_exponent must be > 0");
    if (c.rssi_noise_std < 0) throw ConfigError("rssi_noise_std must be >= 0");
    if (c.scan_period_s <= 0) throw ConfigError("scan_period_s must be > 0");
    if (c.gps_period_s <= 0) throw ConfigError("gps_period_s must be > 0");
    if (c.activity_period_s <= 0) throw ConfigError("activity_period_s must be > 0");
    if (c.gps_dropout_prob < 0 || c.gps_dropout_prob > 1)
        throw ConfigError("gps_dropout_prob must be in [0, 1]");
    if (c.duration_s < 0) throw ConfigError("duration_s must be >= 0");
    const RegimeSpec* specs[3] = {&c.stationary, &c.walking, &c.running};
    for (const auto* s : specs) {
        if (s->mean_duration_s < 0) throw ConfigError("segment mean duration must be >= 0");
        if (s->speed_lo < 0 || s->speed_hi < s->speed_lo)
            throw ConfigError("regime speed range must satisfy 0 <= lo <= hi");
    }
    if (c.stationary.speed_hi > c.walking.speed_lo || c.walking.speed_hi > c.running.speed_lo)
        throw ConfigError("regime speed ranges must be ordered and non-overlapping");
    if (!(c.stationary.mean_duration_s > 0) && !(c.walking.mean_duration_s > 0) &&
        !(c.running.mean_duration_s > 0))
        throw ConfigError("at least one regime must have a positive mean duration");
}

inline std::string pad2(std::size_t v) {
    std::string s = fmt_int(static_cast<std::int64_t>(v));
    return s.size() < 2 ? "0" + s : s;
}

inline std::string ap_name(std::size_t i, std::size_t j) {
    return "ap-" + pad2(i) + "-" + pad2(j);
}

}  // namespace detail

/// Runs the simulation. Per second, in fixed order: segment renewal draws
/// (regime, duration, speed, heading), then one noise draw per grid AP on
/// scan ticks (drawn even when invisible or noiseless, so unrelated config
/// edits never shift the trajectory), then one dropout draw on GPS ticks.
/// Scans that detect nothing are dropped, matching the file round-trip.
/// Fixes carry no reported speed, forcing the trajectory-derived path.
inline SynthOutput generate(const SynthConfig& config) {
    detail::validate_synth_config(config);
    Rng rng(config.seed);

    const RegimeSpec* specs[3] = {&config.stationary, &config.walking, &config.running};
    std::vector<int> enabled;
    for (int r = 0; r < 3; ++r)
        if (specs[r]->mean_duration_s > 0) enabled.push_back(r);

    const auto n_side =
        static_cast<std::size_t>(std::max(1.0, std::floor(config.area_m / config.ap_spacing_m)));
    constexpr double kPi = 3.14159265358979323846;
    constexpr double kMetersPerDeg = 2.0 * kPi * 6371000.0 / 360.0;
    const double lat0_rad = config.origin_lat_deg * kPi / 180.0;
    const double meters_per_deg_lon = kMetersPerDeg * std::cos(lat0_rad);

    double x = config.area_m / 2.0;
    double y = config.area_m / 2.0;
    double vx = 0, vy = 0, speed = 0;
    double remaining = 0;
    int regime = -1;

    auto renew = [&]() {
        if (regime < 0) {
            regime = enabled.front();
        } else if (enabled.size() > 1) {
            std::vector<int> others;
            for (int r : enabled)
                if (r != regime) others.push_back(r);
            regime = others[static_cast<std::size_t>(
                rng.bounded(static_cast<std::uint64_t>(others.size())))];
        }
        const auto& spec = *specs[regime];
        remaining = std::max(rng.exponential(spec.mean_duration_s), 1e-9);
        speed = rng.uniform(spec.speed_lo, spec.speed_hi);
        const double heading = rng.uniform(0.0, 2.0 * kPi);
        vx = speed * std::cos(heading);
        vy = speed * std::sin(heading);
    };

    SynthOutput out;
    std::vector<WifiScan> scans;
    std::vector<GpsFix> fixes;
    std::vector<ActivitySample> activities;

    for (std::int64_t t = 0; t < config.duration_s; ++t) {
        while (remaining <= 0) renew();
        out.truth.push_back({t, x, y, speed, static_cast<ActivityLabel>(regime)});

        if (t % config.scan_period_s == 0) {
            WifiScan scan;
            scan.timestamp = t;
            for (std::size_t i = 0; i < n_side; ++i) {
                for (std::size_t j = 0; j < n_side; ++j) {
                    const double ax = (static_cast<double>(i) + 0.5) * config.ap_spacing_m;
                    const double ay = (static_cast<double>(j) + 0.5) * config.ap_spacing_m;
                    const double d = std::hypot(ax - x, ay - y);
                    const double level = config.tx_power_dbm -
                                         10.0 * config.path_loss_exponent *
                                             std::log10(std::max(d, 1.0)) +
                                         config.rssi_noise_std * rng.normal();
                    if (level < config.visibility_floor_dbm) continue;
                    const std::size_t idx = i * n_side + j;
                    ApObservation o;
                    o.ap_id = detail::ap_name(i, j);
                    o.rssi = static_cast<int>(
                        std::clamp<long long>(std::llround(level), -120, 0));
                    o.frequency = 2412 + 5 * static_cast<int>(idx % 11);
                    scan.observations.push_back(std::move(o));
                }
            }
            if (!scan.observations.empty()) scans.push_back(std::move(scan));
        }

        if (t % config.gps_period_s == 0) {
            const double u = rng.uniform01();
            if (u >= config.gps_dropout_prob) {
                GpsFix f;
                f.timestamp = t;
                f.latitude = config.origin_lat_deg + y / kMetersPerDeg;
                f.longitude = config.origin_lon_deg + x / meters_per_deg_lon;
                f.accuracy = 8.0;
                f.provider = Provider::gps;
                fixes.push_back(f);
            }
        }

        if (t % config.activity_period_s == 0)
            activities.push_back({t, static_cast<ActivityLabel>(regime)});

        x += vx;
        y += vy;
        while (x < 0 || x > config.area_m) {
            if (x < 0) x = -x;
            if (x > config.area_m) x = 2.0 * config.area_m - x;
            vx = -vx;
        }
        while (y < 0 || y > config.area_m) {
            if (y < 0) y = -y;
            if (y > config.area_m) y = 2.0 * config.area_m - y;
            vy = -vy;
        }
        remaining -= 1.0;
    }

    out.timeline = build_timeline(config.user_id, std::move(scans), std::move(fixes),
                                  std::move(activities));
    return out;
}

/// Majority true regime per feature window (same tie rule as the window
/// labeller: ties go to the more mobile label); empty when no truth sample
/// falls inside the window.
inline std::vector<std::optional<ActivityLabel>> truth_labels_for_windows(
    const GroundTruth& truth, const std::vector<FeatureRecord>& windows) {
    std::vector<std::optional<ActivityLabel>> out;
    out.reserve(windows.size());
    for (const auto& w : windows) {
        auto lo = std::lower_bound(truth.begin(), truth.end(), w.window_start,
                                   [](const GroundTruthSample& s, std::int64_t v) {
                                       return s.timestamp < v;
                                   });
        auto hi = std::lower_bound(lo, truth.end(), w.window_end,
                                   [](const GroundTruthSample& s, std::int64_t v) {
                                       return s.timestamp < v;
                                   });
        std::size_t votes[3] = {0, 0, 0};
        for (auto it = lo; it != hi; ++it) {
            if (it->regime == ActivityLabel::unknown) continue;
            ++votes[static_cast<int>(it->regime)];
        }
        std::size_t best = 0;
        std::optional<ActivityLabel> label;
        for (int l = 2; l >= 0; --l) {
            if (votes[l] > best) {
                best = votes[l];
                label = static_cast<ActivityLabel>(l);
            }
        }
        out.push_back(label);
    }
    return out;
}

/// Ground-truth file: (timestamp, x, y, speed, regime), one row per second.
inline void write_truth(std::ostream& out, const GroundTruth& truth, char delimiter = ',',
                        const std::vector<std::string>& comments = {}) {
    DelimitedWriter w(out, delimiter);
    for (const auto& c : comments) w.comment(c);
    w.row({"timestamp", "x", "y", "speed", "regime"});
    for (const auto& s : truth) {
        w.row({fmt_int(s.timestamp), fmt_double(s.x), fmt_double(s.y), fmt_double(s.speed),
               to_string(s.regime)});
    }
}

inline GroundTruth read_truth(std::istream& in, char delimiter = ',') {
    DelimitedReader reader(in, delimiter);
    std::vector<std::string> header;
    if (!reader.next_row(header)) throw DataError("truth file is empty");
    const std::vector<std::string> expect = {"timestamp", "x", "y", "speed", "regime"};
    if (header != expect) throw DataError("truth file header mismatch");

    GroundTruth truth;
    std::vector<std::string> row;
    while (reader.next_row(row)) {
        const std::string at =
            "truth line " + fmt_int(static_cast<std::int64_t>(reader.line_number()));
        if (row.size() != expect.size()) throw DataError(at + ": wrong field count");
        auto ts = parse_int(row[0]);
        auto xx = parse_double(row[1]);
        auto yy = parse_double(row[2]);
        auto sp = parse_double(row[3]);
        auto lb = label_from_string(row[4]);
        if (!ts || !xx || !yy || !sp || !lb) throw DataError(at + ": unparsable field");
        truth.push_back({*ts, *xx, *yy, *sp, *lb});
    }
    return truth;
}

}  // namespace wifimob
