#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wifimob/eval.hpp"
#include "wifimob/rng.hpp"

using namespace wifimob;

namespace {

FeatureRecord rec(std::int64_t start, double speed, ActivityLabel label) {
    FeatureRecord r;
    r.window_start = start;
    r.window_end = start + 60;
    r.speed = speed;
    r.speed_provenance = SpeedProvenance::observed;
    r.label = label;
    return r;
}

std::vector<FeatureRecord> balanced(std::size_t per_class) {
    std::vector<FeatureRecord> out;
    std::int64_t t = 0;
    for (std::size_t i = 0; i < per_class; ++i) {
        out.push_back(rec(t += 60, 0.0, ActivityLabel::stationary));
        out.push_back(rec(t += 60, 1.0, ActivityLabel::walking));
        out.push_back(rec(t += 60, 3.0, ActivityLabel::running));
    }
    return out;
}

bool subsequence_of(const std::vector<FeatureRecord>& part,
                    const std::vector<FeatureRecord>& whole) {
    std::size_t j = 0;
    for (const auto& p : part) {
        while (j < whole.size() && !(whole[j] == p)) ++j;
        if (j == whole.size()) return false;
        ++j;
    }
    return true;
}

}  // namespace

TEST_CASE("split_half partitions cleanly") {
    Rng rng(77);
    for (int round = 0; round < 30; ++round) {
        const std::size_t n = 2 + rng.bounded(40);
        std::vector<FeatureRecord> records;
        for (std::size_t i = 0; i < n; ++i) {
            auto lab = static_cast<ActivityLabel>(rng.bounded(3));
            records.push_back(rec(static_cast<std::int64_t>(rng.bounded(100000)),
                                  rng.uniform01(), lab));
        }
        const auto mode = round % 2 == 0 ? SplitMode::random : SplitMode::chronological;
        auto split = split_half(records, mode, false, round);
        CHECK(split.train.size() == (n + 1) / 2);
        CHECK(split.train.size() + split.test.size() == n);
        CHECK(subsequence_of(split.train, records));
        CHECK(subsequence_of(split.test, records));
    }
}

TEST_CASE("chronological split separates early from late windows") {
    auto records = balanced(4);
    std::reverse(records.begin(), records.end());
    auto split = split_half(records, SplitMode::chronological);
    std::int64_t train_max = 0, test_min = INT64_MAX;
    for (const auto& r : split.train) train_max = std::max(train_max, r.window_start);
    for (const auto& r : split.test) test_min = std::min(test_min, r.window_start);
    CHECK(train_max <= test_min);
    CHECK(subsequence_of(split.train, records));
}

TEST_CASE("stratified split keeps class proportions") {
    std::vector<FeatureRecord> records;
    for (int i = 0; i < 6; ++i) records.push_back(rec(i * 60, 0.0, ActivityLabel::stationary));
    for (int i = 6; i < 10; ++i) records.push_back(rec(i * 60, 1.0, ActivityLabel::walking));
    auto split = split_half(records, SplitMode::random, true, 3);
    REQUIRE(split.train.size() == 5);
    auto count = [](const std::vector<FeatureRecord>& v, ActivityLabel l) {
        return std::count_if(v.begin(), v.end(), [&](const auto& r) { return *r.label == l; });
    };
    CHECK(count(split.train, ActivityLabel::stationary) == 3);
    CHECK(count(split.train, ActivityLabel::walking) == 2);
    CHECK(count(split.test, ActivityLabel::stationary) == 3);
    CHECK(count(split.test, ActivityLabel::walking) == 2);
}

TEST_CASE("split_half rejects unusable inputs") {
    SECTION("fewer than two records") {
        CHECK_THROWS_AS(split_half({rec(0, 1.0, ActivityLabel::walking)}, SplitMode::random),
                        DataError);
    }
    SECTION("unlabeled record") {
        auto records = balanced(2);
        records[3].label.reset();
        CHECK_THROWS_AS(split_half(records, SplitMode::random), DataError);
    }
    SECTION("unknown label") {
        auto records = balanced(2);
        records[0].label = ActivityLabel::unknown;
        CHECK_THROWS_AS(split_half(records, SplitMode::random), DataError);
    }
    SECTION("stratified chronological is contradictory") {
        CHECK_THROWS_AS(split_half(balanced(2), SplitMode::chronological, true), ConfigError);
    }
    SECTION("singleton class cannot reach training") {
        std::vector<FeatureRecord> records{rec(0, 0.0, ActivityLabel::stationary),
                                           rec(60, 1.0, ActivityLabel::walking)};
        CHECK_THROWS_WITH(split_half(records, SplitMode::random, true),
                          Catch::Matchers::ContainsSubstring("walking"));
    }
}

TEST_CASE("evaluate reports a perfect predictor as perfect") {
    auto records = balanced(2);
    TreeConfig tc;
    tc.min_leaf = 1;
    auto model = train_tree(make_dataset(records), tc);
    auto rep = evaluate(model, records);
    rep.split = "random";
    rep.n_train = records.size();
    CHECK(rep.accuracy == 1.0);
    for (int t = 0; t < kNumClasses; ++t)
        for (int p = 0; p < kNumClasses; ++p)
            CHECK(rep.confusion[t][p] == (t == p ? 2u : 0u));

    std::ostringstream os;
    write_report(os, rep, {"seed=7"});
    CHECK(os.str() ==
          "wifimob-report v1\n"
          "classifier: tree\n"
          "split: random\n"
          "n_train: 6\n"
          "n_test: 6\n"
          "accuracy: 1\n"
          "labels: stationary,walking,running\n"
          "confusion_stationary: 2 0 0\n"
          "confusion_walking: 0 2 0\n"
          "confusion_running: 0 0 2\n"
          "precision: 1 1 1\n"
          "recall: 1 1 1\n"
          "config: seed=7\n");
}

TEST_CASE("evaluate handles a constant predictor") {
    auto records = balanced(3);
    TreeConfig tc;
    tc.max_depth = 0;  // single leaf, majority tie resolves to stationary
    auto model = train_tree(make_dataset(records), tc);
    auto rep = evaluate(model, records);
    CHECK(rep.accuracy == Catch::Approx(1.0 / 3.0).margin(1e-15));
    REQUIRE(rep.precision[0].has_value());
    CHECK(*rep.precision[0] == Catch::Approx(1.0 / 3.0).margin(1e-15));
    CHECK_FALSE(rep.precision[1].has_value());  // never predicted
    CHECK_FALSE(rep.precision[2].has_value());
    CHECK(*rep.recall[0] == 1.0);
    CHECK(*rep.recall[1] == 0.0);
    CHECK(*rep.recall[2] == 0.0);
}

TEST_CASE("evaluate fills a hand-checked confusion matrix") {
    std::vector<FeatureRecord> train{rec(0, 1.0, ActivityLabel::stationary),
                                     rec(60, 1.0, ActivityLabel::stationary),
                                     rec(120, 2.0, ActivityLabel::walking),
                                     rec(180, 2.0, ActivityLabel::walking)};
    TreeConfig tc;
    tc.min_leaf = 1;
    auto model = train_tree(make_dataset(train), tc);

    std::vector<FeatureRecord> test{rec(0, 1.0, ActivityLabel::stationary),
                                    rec(60, 1.0, ActivityLabel::walking),
                                    rec(120, 2.0, ActivityLabel::walking),
                                    rec(180, 2.0, ActivityLabel::running)};
    auto rep = evaluate(model, test);
    CHECK(rep.accuracy == 0.5);
    CHECK(rep.confusion[0][0] == 1);
    CHECK(rep.confusion[1][0] == 1);
    CHECK(rep.confusion[1][1] == 1);
    CHECK(rep.confusion[2][1] == 1);
    CHECK(*rep.precision[0] == 0.5);
    CHECK(*rep.precision[1] == 0.5);
    CHECK_FALSE(rep.precision[2].has_value());
    CHECK(*rep.recall[0] == 1.0);
    CHECK(*rep.recall[1] == 0.5);
    CHECK(*rep.recall[2] == 0.0);
}

TEST_CASE("evaluate rejects empty or unlabeled test sets") {
    auto records = balanced(2);
    TreeConfig tc;
    tc.min_leaf = 1;
    auto model = train_tree(make_dataset(records), tc);
    CHECK_THROWS_AS(evaluate(model, {}), DataError);
    records[1].label.reset();
    CHECK_THROWS_AS(evaluate(model, records), DataError);
}

TEST_CASE("correlation goldens") {
    const std::vector<double> xs{0.1, 0.3, 0.5, 0.7, 0.9};
    const std::vector<double> ys{3.0, 2.0, 2.5, 0.5, 0.2};
    CHECK(pearson(xs, ys) == Catch::Approx(-0.9096585406285214).margin(1e-12));
    CHECK(spearman(xs, ys) == Catch::Approx(-0.9).margin(1e-12));
}

TEST_CASE("spearman averages tied ranks") {
    CHECK(spearman({1.0, 2.0, 2.0, 3.0}, {1.0, 2.0, 3.0, 4.0}) ==
          Catch::Approx(0.9486832980505138).margin(1e-12));
}

TEST_CASE("strictly decreasing data has spearman -1") {
    std::vector<double> xs, ys;
    Rng rng(5);
    double y = 100.0;
    for (int i = 0; i < 25; ++i) {
        xs.push_back(static_cast<double>(i));
        y -= 0.01 + rng.uniform01();
        ys.push_back(y);
    }
    CHECK(spearman(xs, ys) == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("pearson is invariant under positive affine maps") {
    const std::vector<double> xs{0.1, 0.3, 0.5, 0.7, 0.9};
    const std::vector<double> ys{3.0, 2.0, 2.5, 0.5, 0.2};
    std::vector<double> scaled;
    for (double x : xs) scaled.push_back(4.0 * x - 17.0);
    CHECK(pearson(scaled, ys) == Catch::Approx(pearson(xs, ys)).margin(1e-12));
}

TEST_CASE("spearman is invariant under monotone maps") {
    const std::vector<double> xs{0.1, 0.3, 0.5, 0.7, 0.9};
    const std::vector<double> ys{3.0, 2.0, 2.5, 0.5, 0.2};
    std::vector<double> mapped;
    for (double x : xs) mapped.push_back(std::exp(3.0 * x));
    CHECK(spearman(mapped, ys) == spearman(xs, ys));
}

TEST_CASE("correlation input validation") {
    CHECK_THROWS_AS(pearson({1.0}, {2.0}), DataError);
    CHECK_THROWS_AS(pearson({1.0, 2.0}, {2.0}), DataError);
    CHECK_THROWS_AS(pearson({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), DataError);
    CHECK_THROWS_AS(pearson({1.0, 2.0, 3.0}, {5.0, 5.0, 5.0}), DataError);
}

TEST_CASE("stability_speed_correlation uses only observed pairs") {
    std::vector<FeatureRecord> records;
    for (int i = 0; i < 5; ++i) {
        FeatureRecord r = rec(i * 60, 5.0 - i, ActivityLabel::walking);
        r.stability_mean = 0.1 + 0.2 * i;
        records.push_back(r);
    }
    // Imputed and incomplete rows would flip the sign if they counted.
    FeatureRecord imputed = rec(500, 100.0, ActivityLabel::running);
    imputed.stability_mean = 0.99;
    imputed.speed_provenance = SpeedProvenance::imputed;
    records.push_back(imputed);
    FeatureRecord no_stab = rec(560, 200.0, ActivityLabel::running);
    records.push_back(no_stab);
    FeatureRecord no_speed = rec(620, 0.0, ActivityLabel::stationary);
    no_speed.stability_mean = 0.01;
    no_speed.speed.reset();
    no_speed.speed_provenance = SpeedProvenance::absent;
    records.push_back(no_speed);

    auto corr = stability_speed_correlation(records);
    CHECK(corr.pearson == Catch::Approx(-1.0).margin(1e-12));
    CHECK(corr.spearman == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("stability_speed_correlation needs three observed pairs") {
    std::vector<FeatureRecord> records;
    for (int i = 0; i < 2; ++i) {
        FeatureRecord r = rec(i * 60, 1.0 + i, ActivityLabel::walking);
        r.stability_mean = 0.5;
        records.push_back(r);
    }
    CHECK_THROWS_AS(stability_speed_correlation(records), DataError);
}

TEST_CASE("report marks undefined metrics with a dash") {
    auto records = balanced(3);
    TreeConfig tc;
    tc.max_depth = 0;
    auto rep = evaluate(train_tree(make_dataset(records), tc), records);
    std::ostringstream os;
    write_report(os, rep);
    const auto text = os.str();
    CHECK(text.find("precision: 0.3333333333333333 - -\n") != std::string::npos);
    CHECK(text.find("recall: 1 0 0\n") != std::string::npos);
}
