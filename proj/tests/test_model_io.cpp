#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "wifimob/model_io.hpp"

using namespace wifimob;

namespace {

Dataset small_dataset() {
    Dataset d;
    d.feature_names = stage2_feature_names();
    auto row = [](double stab, double speed) {
        FeatureRow r(7);
        r[0] = stab;
        r[1] = stab - 0.05;
        r[2] = 12.0 + speed;
        r[3] = 1.0 + stab;
        r[4] = -60.0 - 4.0 * speed;
        r[5] = 2.0 + speed;
        r[6] = speed;
        return r;
    };
    d.rows = {row(0.95, 0.05), row(0.9, 0.1), row(0.92, 0.02), row(0.5, 1.1),
              row(0.55, 1.3),  row(0.6, 1.0), row(0.2, 3.0),  row(0.15, 3.3),
              row(0.25, 2.8),  row(0.1, 3.1)};
    d.labels = {ActivityLabel::stationary, ActivityLabel::stationary, ActivityLabel::stationary,
                ActivityLabel::walking,    ActivityLabel::walking,    ActivityLabel::walking,
                ActivityLabel::running,    ActivityLabel::running,    ActivityLabel::running,
                ActivityLabel::running};
    return d;
}

GprModel small_gpr() {
    return fit_gpr({0.05, 0.2, 0.45, 0.7, 0.95}, {3.1, 2.6, 1.4, 0.5, 0.1});
}

}  // namespace

TEST_CASE("checksum helpers match published FNV-1a vectors") {
    CHECK(fnv1a64("") == 14695981039346656037ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(checksum_hex("") == "cbf29ce484222325");
    CHECK(checksum_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("gpr model round-trips value-exactly") {
    auto m = small_gpr();
    std::ostringstream os;
    save_model(os, m, {"window=600"});
    std::istringstream is(os.str());
    auto back = load_gpr(is);
    CHECK(back.hyperparams == m.hyperparams);
    CHECK(back.train_x == m.train_x);
    CHECK(back.train_y == m.train_y);
    for (double q : {0.0, 0.33, 0.5, 0.77, 1.0}) {
        auto a = predict_gpr(m, q);
        auto b = predict_gpr(back, q);
        CHECK(a.mean == b.mean);
        CHECK(a.variance == b.variance);
        CHECK(a.extrapolated == b.extrapolated);
    }
}

TEST_CASE("tree model round-trips") {
    TreeConfig tc;
    tc.min_leaf = 1;
    auto m = train_tree(small_dataset(), tc);
    std::ostringstream os;
    save_model(os, m);
    std::istringstream is(os.str());
    CHECK(load_tree(is) == m);
}

TEST_CASE("naive bayes model round-trips") {
    auto m = train_naive_bayes(small_dataset());
    std::ostringstream os;
    save_model(os, m, {"classifier=nb", "split=random"});
    std::istringstream is(os.str());
    CHECK(load_naive_bayes(is) == m);
}

TEST_CASE("forest model round-trips") {
    ForestConfig fc;
    fc.n_trees = 7;
    fc.seed = 11;
    auto m = train_forest(small_dataset(), fc);
    std::ostringstream os;
    save_model(os, m);
    std::istringstream is(os.str());
    CHECK(load_forest(is) == m);
}

TEST_CASE("load_classifier dispatches on the declared type") {
    auto d = small_dataset();
    TreeConfig tc;
    tc.min_leaf = 1;
    auto tree = train_tree(d, tc);
    std::ostringstream os;
    save_model(os, tree);
    std::istringstream is(os.str());
    auto any = load_classifier(is);
    REQUIRE(std::holds_alternative<TreeModel>(any));
    FeatureRow q(7);
    q[6] = 3.0;
    CHECK(predict_label(any, q).label == predict_label(tree, q).label);

    std::ostringstream gs;
    save_model(gs, small_gpr());
    std::istringstream gis(gs.str());
    CHECK_THROWS_AS(load_classifier(gis), DataError);
}

TEST_CASE("config payload lines are ignored by parsers but checksummed") {
    auto m = train_naive_bayes(small_dataset());
    std::ostringstream plain, tagged;
    save_model(plain, m);
    save_model(tagged, m, {"source=synthetic seed=42"});
    CHECK(plain.str() != tagged.str());
    CHECK(tagged.str().find("config source=synthetic seed=42\n") != std::string::npos);
    std::istringstream is(tagged.str());
    CHECK(load_naive_bayes(is) == m);
}

TEST_CASE("corrupted payload bytes fail the checksum") {
    auto m = train_naive_bayes(small_dataset());
    std::ostringstream os;
    save_model(os, m);
    std::string text = os.str();
    const auto at = text.find("priors 0.");
    REQUIRE(at != std::string::npos);
    text[at + 7] = '9';
    std::istringstream is(text);
    CHECK_THROWS_WITH(load_naive_bayes(is), Catch::Matchers::ContainsSubstring("checksum"));
}

TEST_CASE("wrong model type is rejected by name") {
    std::ostringstream os;
    save_model(os, small_gpr());
    std::istringstream is(os.str());
    CHECK_THROWS_WITH(load_tree(is), Catch::Matchers::ContainsSubstring("gpr"));
}

TEST_CASE("malformed envelopes are rejected") {
    SECTION("empty stream") {
        std::istringstream is("");
        CHECK_THROWS_AS(read_model_file(is), DataError);
    }
    SECTION("unknown magic") {
        std::istringstream is("wifimob-model v2\ntype: tree\n");
        CHECK_THROWS_WITH(read_model_file(is), Catch::Matchers::ContainsSubstring("v2"));
    }
    SECTION("truncated before separator") {
        std::istringstream is("wifimob-model v1\ntype: tree\nchecksum: 0000000000000000\n");
        CHECK_THROWS_AS(read_model_file(is), DataError);
    }
    SECTION("missing checksum line") {
        std::istringstream is("wifimob-model v1\ntype: tree\n---\n");
        CHECK_THROWS_AS(read_model_file(is), DataError);
    }
}

TEST_CASE("truncated payload is caught by parse or checksum") {
    auto m = train_naive_bayes(small_dataset());
    std::ostringstream os;
    save_model(os, m);
    std::string text = os.str();
    text.resize(text.size() - 20);
    std::istringstream is(text);
    CHECK_THROWS_AS(load_naive_bayes(is), DataError);
}

TEST_CASE("forest payload without trees is rejected") {
    const std::string payload =
        "features 1 speed\nfeatures_per_split 1\nseed 1\nbootstrap 1\ntrees 0\n";
    std::ostringstream os;
    write_model_file(os, "forest", payload);
    std::istringstream is(os.str());
    CHECK_THROWS_WITH(load_forest(is), Catch::Matchers::ContainsSubstring("no trees"));
}

TEST_CASE("tree payload with dangling child index is rejected") {
    const std::string payload =
        "features 1 speed\n"
        "nodes 1\n"
        "node split 0 1.5 4 5 0 1 1 0\n";
    std::ostringstream os;
    write_model_file(os, "tree", payload);
    std::istringstream is(os.str());
    CHECK_THROWS_WITH(load_tree(is), Catch::Matchers::ContainsSubstring("child index"));
}

TEST_CASE("nb payload with non-positive variance is rejected") {
    const std::string payload =
        "features 1 speed\n"
        "classes 1 walking\n"
        "priors 1\n"
        "mean walking 2\n"
        "var walking 0\n";
    std::ostringstream os;
    write_model_file(os, "nb", payload);
    std::istringstream is(os.str());
    CHECK_THROWS_WITH(load_naive_bayes(is), Catch::Matchers::ContainsSubstring("variance"));
}
