#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "wifimob/ingest.hpp"
#include "wifimob/rng.hpp"

using namespace wifimob;

TEST_CASE("parse_wifi groups rows sharing a timestamp") {
    std::istringstream in("timestamp,ap_id,rssi\n100,A,-70\n100,B,-60\n160,A,-71\n");
    ParseStats stats;
    auto scans = parse_wifi(in, ColumnMapping::wifi_default(), ',', &stats);
    REQUIRE(scans.size() == 2);
    CHECK(scans[0].timestamp == 100);
    REQUIRE(scans[0].observations.size() == 2);
    CHECK(scans[1].observations.size() == 1);
    CHECK(stats.data_rows == 3);
    CHECK(stats.accepted_rows == 3);
    CHECK(stats.skipped_rows == 0);
}

TEST_CASE("parse_wifi keeps the strongest rssi for a repeated ap") {
    std::istringstream in("timestamp,ap_id,rssi\n100,A,-70\n100,A,-60\n");
    auto scans = parse_wifi(in, ColumnMapping::wifi_default(), ',', nullptr);
    REQUIRE(scans.size() == 1);
    REQUIRE(scans[0].observations.size() == 1);
    CHECK(scans[0].observations[0].rssi == -60);
}

TEST_CASE("parse_wifi skips bad rows and accounts for them") {
    std::istringstream in(
        "timestamp,ap_id,rssi\n"
        "100,A,abc\n"
        "101,A,-60\n"
        "-5,B,-60\n"
        "102,,-60\n"
        "103,C,40\n");
    ParseStats stats;
    auto scans = parse_wifi(in, ColumnMapping::wifi_default(), ',', &stats);
    REQUIRE(scans.size() == 1);
    CHECK(stats.data_rows == 5);
    CHECK(stats.accepted_rows == 1);
    CHECK(stats.skipped_rows == 4);
    CHECK(stats.accepted_rows + stats.skipped_rows == stats.data_rows);
    REQUIRE(stats.diagnostics.size() == 4);
    CHECK(stats.diagnostics[0].find("line 2") != std::string::npos);
    CHECK(stats.diagnostics[0].find("rssi") != std::string::npos);
}

TEST_CASE("column mapping resolves names first, then indices") {
    SECTION("renamed columns") {
        ColumnMapping m{{{"timestamp", "t"}, {"ap_id", "bssid"}, {"rssi", "level"}}};
        std::istringstream in("t,bssid,level\n5,A,-50\n");
        auto scans = parse_wifi(in, m, ',', nullptr);
        REQUIRE(scans.size() == 1);
        CHECK(scans[0].observations[0].ap_id == "A");
    }
    SECTION("numeric indices") {
        ColumnMapping m{{{"timestamp", "2"}, {"ap_id", "0"}, {"rssi", "1"}}};
        std::istringstream in("x,y,z\nA,-50,5\n");
        auto scans = parse_wifi(in, m, ',', nullptr);
        REQUIRE(scans.size() == 1);
        CHECK(scans[0].timestamp == 5);
        CHECK(scans[0].observations[0].ap_id == "A");
    }
    SECTION("missing required column names the source column") {
        std::istringstream in("timestamp,ap,rssi\n1,A,-50\n");
        CHECK_THROWS_MATCHES(parse_wifi(in, ColumnMapping::wifi_default(), ',', nullptr),
                             DataError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("ap_id")));
    }
}

TEST_CASE("parse_gps materializes optional fields only when present") {
    std::istringstream in(
        "timestamp,latitude,longitude,speed,accuracy,provider\n"
        "10,45.5,7.25,,12,gps\n"
        "20,45.6,7.26,1.5,,network\n");
    auto fixes = parse_gps(in, ColumnMapping::gps_default(), ',', nullptr);
    REQUIRE(fixes.size() == 2);
    CHECK_FALSE(fixes[0].reported_speed.has_value());
    CHECK(fixes[0].accuracy == 12.0);
    CHECK(fixes[0].provider == Provider::gps);
    CHECK(fixes[1].reported_speed == 1.5);
    CHECK_FALSE(fixes[1].accuracy.has_value());
}

TEST_CASE("parse_gps with entirely unmapped optional columns") {
    ColumnMapping m{{{"timestamp", "timestamp"},
                     {"latitude", "latitude"},
                     {"longitude", "longitude"}}};
    std::istringstream in("timestamp,latitude,longitude,speed\n10,45.5,7.25,3.0\n");
    auto fixes = parse_gps(in, m, ',', nullptr);
    REQUIRE(fixes.size() == 1);
    CHECK_FALSE(fixes[0].reported_speed.has_value());
    CHECK(fixes[0].provider == Provider::other);
}

TEST_CASE("parse_gps skips out-of-range coordinates") {
    std::istringstream in(
        "timestamp,latitude,longitude,speed,accuracy,provider\n"
        "10,91.0,7.0,,,gps\n"
        "11,45.0,-200.0,,,gps\n"
        "12,45.0,7.0,,,gps\n");
    ParseStats stats;
    auto fixes = parse_gps(in, ColumnMapping::gps_default(), ',', &stats);
    REQUIRE(fixes.size() == 1);
    CHECK(fixes[0].timestamp == 12);
    CHECK(stats.skipped_rows == 2);
    CHECK(stats.diagnostics[0].find("latitude") != std::string::npos);
}

TEST_CASE("parse_activity maps codes through the table") {
    std::istringstream in("timestamp,label_code\n5,1\n6,7\n7,0\n");
    ParseStats stats;
    auto acts = parse_activity(in, ColumnMapping::activity_default(), default_code_table(), ',',
                               &stats);
    REQUIRE(acts.size() == 2);
    CHECK(acts[0].label == ActivityLabel::walking);
    CHECK(acts[1].label == ActivityLabel::stationary);
    CHECK(stats.skipped_rows == 1);
    CHECK(stats.diagnostics[0].find("code 7") != std::string::npos);
}

TEST_CASE("parsers return empty sequences for empty input") {
    std::istringstream w(""), g(""), a("");
    CHECK(parse_wifi(w, ColumnMapping::wifi_default(), ',', nullptr).empty());
    CHECK(parse_gps(g, ColumnMapping::gps_default(), ',', nullptr).empty());
    CHECK(parse_activity(a, ColumnMapping::activity_default(), default_code_table(), ',', nullptr)
              .empty());
}

TEST_CASE("timestamps truncate fractional seconds") {
    std::istringstream in("timestamp,ap_id,rssi\n100.9,A,-50\n");
    auto scans = parse_wifi(in, ColumnMapping::wifi_default(), ',', nullptr);
    REQUIRE(scans.size() == 1);
    CHECK(scans[0].timestamp == 100);
}

TEST_CASE("canonical writers round-trip") {
    SECTION("wifi") {
        std::vector<WifiScan> scans = {
            {100, {{"A", -70, 2412}, {"B", -60, std::nullopt}}},
            {160, {{"C", -80, 2437}}},
        };
        std::ostringstream out;
        write_wifi(out, scans, ',', {"generator: test"});
        std::istringstream in(out.str());
        ParseStats stats;
        auto parsed = parse_wifi(in, ColumnMapping::wifi_default(), ',', &stats);
        CHECK(parsed == scans);
        CHECK(stats.skipped_rows == 0);
    }
    SECTION("gps") {
        std::vector<GpsFix> fixes = {
            {10, 45.123456789, 7.987654321, std::nullopt, 8.0, Provider::gps},
            {20, -33.0, 151.25, 2.75, std::nullopt, Provider::network},
            {30, 0.1, -0.2, 0.0, 100.0, Provider::cell},
        };
        std::ostringstream out;
        write_gps(out, fixes);
        std::istringstream in(out.str());
        auto parsed = parse_gps(in, ColumnMapping::gps_default(), ',', nullptr);
        CHECK(parsed == fixes);
    }
    SECTION("activity") {
        std::vector<ActivitySample> acts = {
            {5, ActivityLabel::stationary},
            {8, ActivityLabel::running},
            {9, ActivityLabel::unknown},
        };
        std::ostringstream out;
        write_activity(out, acts, default_code_table());
        std::istringstream in(out.str());
        auto parsed = parse_activity(in, ColumnMapping::activity_default(), default_code_table(),
                                     ',', nullptr);
        CHECK(parsed == acts);
    }
    SECTION("random gps fixes survive the round trip") {
        Rng rng(99);
        std::vector<GpsFix> fixes;
        for (int i = 0; i < 200; ++i) {
            GpsFix f;
            f.timestamp = i;
            f.latitude = rng.uniform(-90.0, 90.0);
            f.longitude = rng.uniform(-180.0, 180.0);
            if (rng.uniform01() < 0.5) f.reported_speed = rng.uniform(0.0, 10.0);
            if (rng.uniform01() < 0.5) f.accuracy = rng.uniform(0.0, 100.0);
            f.provider = static_cast<Provider>(rng.bounded(4));
            fixes.push_back(f);
        }
        std::ostringstream out;
        write_gps(out, fixes);
        std::istringstream in(out.str());
        CHECK(parse_gps(in, ColumnMapping::gps_default(), ',', nullptr) == fixes);
    }
}

TEST_CASE("write_activity rejects labels missing from the code table") {
    std::map<int, ActivityLabel> table = {{0, ActivityLabel::stationary}};
    std::vector<ActivitySample> acts = {{5, ActivityLabel::running}};
    std::ostringstream out;
    CHECK_THROWS_AS(write_activity(out, acts, table), DataError);
}

TEST_CASE("apply_filters drops cell fixes, bad accuracy, unknown labels") {
    UserTimeline t;
    t.user_id = "u";
    t.fixes = {
        {1, 45.0, 7.0, std::nullopt, 5.0, Provider::gps},
        {2, 45.0, 7.0, std::nullopt, std::nullopt, Provider::cell},
        {3, 45.0, 7.0, std::nullopt, 80.0, Provider::network},
    };
    t.activities = {
        {1, ActivityLabel::walking},
        {2, ActivityLabel::unknown},
        {3, ActivityLabel::running},
        {4, ActivityLabel::stationary},
    };

    SECTION("defaults drop cell and unknown") {
        FilterStats stats;
        auto out = apply_filters(t, FilterConfig{}, &stats);
        REQUIRE(out.fixes.size() == 2);
        CHECK(out.fixes[0].timestamp == 1);
        CHECK(out.fixes[1].timestamp == 3);
        REQUIRE(out.activities.size() == 3);
        CHECK(stats.fixes_dropped_provider == 1);
        CHECK(stats.fixes_dropped_accuracy == 0);
        CHECK(stats.activities_dropped_unknown == 1);
    }
    SECTION("accuracy bound") {
        FilterConfig cfg;
        cfg.max_accuracy_m = 50.0;
        FilterStats stats;
        auto out = apply_filters(t, cfg, &stats);
        REQUIRE(out.fixes.size() == 1);
        CHECK(stats.fixes_dropped_accuracy == 1);
    }
    SECTION("all-off config is the identity") {
        FilterConfig cfg;
        cfg.drop_cell_provider = false;
        cfg.drop_unknown_activity = false;
        auto out = apply_filters(t, cfg, nullptr);
        CHECK(out == t);
    }
    SECTION("non-positive accuracy bound is a config error") {
        FilterConfig cfg;
        cfg.max_accuracy_m = 0.0;
        CHECK_THROWS_AS(apply_filters(t, cfg, nullptr), ConfigError);
    }
}
