#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "wifimob/classify.hpp"
#include "wifimob/errors.hpp"
#include "wifimob/eval.hpp"
#include "wifimob/features.hpp"
#include "wifimob/gpr.hpp"
#include "wifimob/ingest.hpp"
#include "wifimob/model_io.hpp"
#include "wifimob/synth.hpp"
#include "wifimob/trace.hpp"

namespace fs = std::filesystem;
using namespace wifimob;

namespace {

// Commands validate and compute fully before opening any output, and every
// file is written to a temporary name and renamed into place, so a failed
// run leaves no partial outputs behind.
class OutDir {
public:
    explicit OutDir(const std::string& dir) : dir_(dir) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
    }

    template <typename Fn>
    void write(const std::string& name, Fn&& body) {
        const fs::path target = dir_ / name;
        const fs::path tmp = dir_ / (name + ".tmp");
        {
            std::ofstream os(tmp, std::ios::binary);
            if (!os) throw DataError("cannot open " + tmp.string() + " for writing");
            body(os);
            os.flush();
            if (!os) {
                std::error_code ec;
                fs::remove(tmp, ec);
                throw DataError("failed while writing " + target.string());
            }
        }
        std::error_code ec;
        fs::rename(tmp, target, ec);
        if (ec) {
            fs::remove(tmp, ec);
            throw DataError("cannot finalize " + target.string());
        }
    }

private:
    fs::path dir_;
};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += " ";
        out += n;
    }
    return out;
}

/// First line carries the format version; the rest echo the resolved
/// configuration. Emitted as '#' comments by the delimited writers.
std::vector<std::string> file_comments(const std::string& kind,
                                       const std::vector<std::string>& config) {
    std::vector<std::string> out;
    out.push_back("wifimob-" + kind + " v1");
    for (const auto& line : config) out.push_back("config: " + line);
    return out;
}

ColumnMapping apply_overrides(ColumnMapping base, const std::vector<std::string>& specs,
                              const char* stream) {
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError(std::string(stream) + " column override \"" + s +
                              "\" must look like field=source");
        const std::string field = s.substr(0, eq);
        if (base.fields.find(field) == base.fields.end())
            throw ConfigError(std::string(stream) + " stream has no field \"" + field + "\"");
        base.fields[field] = s.substr(eq + 1);
    }
    return base;
}

void report_parse(const char* stream, const ParseStats& stats) {
    if (stats.skipped_rows == 0) return;
    std::cerr << stream << ": skipped " << stats.skipped_rows << " of " << stats.data_rows
              << " rows\n";
    const std::size_t show = std::min<std::size_t>(stats.diagnostics.size(), 5);
    for (std::size_t i = 0; i < show; ++i)
        std::cerr << "  " << stream << " " << stats.diagnostics[i] << "\n";
    if (stats.diagnostics.size() > show)
        std::cerr << "  (" << stats.diagnostics.size() - show << " more)\n";
}

struct GprPairs {
    std::vector<double> x;
    std::vector<double> y;
};

/// Stage-1 training set: windows with both a stability coefficient and a
/// speed that was actually observed.
GprPairs gpr_pairs(const std::vector<FeatureRecord>& records) {
    GprPairs p;
    for (const auto& r : records) {
        if (!r.stability_mean || !r.speed) continue;
        if (r.speed_provenance != SpeedProvenance::observed) continue;
        p.x.push_back(std::clamp(*r.stability_mean, 0.0, 1.0));
        p.y.push_back(*r.speed);
    }
    return p;
}

GprModel fit_speed_model(const std::vector<FeatureRecord>& records,
                         const GprSearchConfig& search) {
    auto pairs = gpr_pairs(records);
    if (pairs.x.size() < 2)
        throw DataError("speed model needs at least 2 windows with stability and an observed "
                        "speed, found " +
                        fmt_uint(pairs.x.size()));
    return fit_gpr(pairs.x, pairs.y, search);
}

std::vector<std::string> gpr_config_lines(const GprSearchConfig& g) {
    return {"gpr_sf2_lo=" + fmt_double(g.sf2_lo),   "gpr_sf2_hi=" + fmt_double(g.sf2_hi),
            "gpr_ell_lo=" + fmt_double(g.ell_lo),   "gpr_ell_hi=" + fmt_double(g.ell_hi),
            "gpr_sn2_lo=" + fmt_double(g.sn2_lo),   "gpr_sn2_hi=" + fmt_double(g.sn2_hi)};
}

std::vector<std::string> classifier_config_lines(const std::string& which, const TreeConfig& tc,
                                                 const ForestConfig& fc) {
    return {"classifier=" + which,
            "min_leaf=" + fmt_uint(tc.min_leaf),
            "max_depth=" + fmt_uint(tc.max_depth),
            "n_trees=" + fmt_uint(fc.n_trees),
            "features_per_split=" + fmt_uint(fc.features_per_split),
            "bootstrap=" + bool_str(fc.bootstrap)};
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
    SynthConfig cfg;
    std::string out;
};

std::vector<std::string> synth_config_lines(const SynthConfig& c) {
    auto regime = [](const char* name, const RegimeSpec& r) {
        return std::string(name) + "=" + fmt_double(r.mean_duration_s) + "/" +
               fmt_double(r.speed_lo) + "/" + fmt_double(r.speed_hi);
    };
    return {"seed=" + fmt_uint(c.seed),
            "user=" + c.user_id,
            "duration_s=" + fmt_int(c.duration_s),
            "area_m=" + fmt_double(c.area_m),
            "ap_spacing_m=" + fmt_double(c.ap_spacing_m),
            "tx_power_dbm=" + fmt_double(c.tx_power_dbm),
            "path_loss_exponent=" + fmt_double(c.path_loss_exponent),
            "rssi_noise_std=" + fmt_double(c.rssi_noise_std),
            "visibility_floor_dbm=" + fmt_double(c.visibility_floor_dbm),
            "scan_period_s=" + fmt_int(c.scan_period_s),
            "gps_period_s=" + fmt_int(c.gps_period_s),
            "gps_dropout_prob=" + fmt_double(c.gps_dropout_prob),
            "activity_period_s=" + fmt_int(c.activity_period_s),
            regime("stationary", c.stationary),
            regime("walking", c.walking),
            regime("running", c.running),
            "origin_lat_deg=" + fmt_double(c.origin_lat_deg),
            "origin_lon_deg=" + fmt_double(c.origin_lon_deg)};
}

int run_synth(const SynthOpts& o) {
    auto corpus = generate(o.cfg);
    const auto config = synth_config_lines(o.cfg);

    OutDir dir(o.out);
    dir.write("wifi.csv", [&](std::ostream& os) {
        write_wifi(os, corpus.timeline.scans, ',', file_comments("wifi", config));
    });
    dir.write("gps.csv", [&](std::ostream& os) {
        write_gps(os, corpus.timeline.fixes, ',', file_comments("gps", config));
    });
    dir.write("activity.csv", [&](std::ostream& os) {
        write_activity(os, corpus.timeline.activities, default_code_table(), ',',
                       file_comments("activity", config));
    });
    dir.write("truth.csv", [&](std::ostream& os) {
        write_truth(os, corpus.truth, ',', file_comments("truth", config));
    });

    std::cout << "wrote wifi.csv gps.csv activity.csv truth.csv to " << o.out << "\n";
    std::cout << "scans: " << corpus.timeline.scans.size()
              << "\nfixes: " << corpus.timeline.fixes.size()
              << "\nactivity samples: " << corpus.timeline.activities.size()
              << "\ntruth samples: " << corpus.truth.size() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// features

struct FeaturesOpts {
    std::string wifi;
    std::string gps;
    std::string activity;
    std::string out;
    std::string user = "user";
    std::uint64_t seed = 0;
    std::int64_t window_s = 600;
    std::int64_t hop_s = 300;
    std::int64_t stability_max_gap_s = 1800;
    std::int64_t speed_max_gap_s = 900;
    bool prefer_reported = true;
    bool keep_cell = false;
    bool keep_unknown_activity = false;
    std::optional<double> max_accuracy_m;
    std::vector<std::string> wifi_cols;
    std::vector<std::string> gps_cols;
    std::vector<std::string> activity_cols;
};

std::vector<std::string> features_config_lines(const FeaturesOpts& o) {
    std::vector<std::string> out{
        "seed=" + fmt_uint(o.seed),
        "user=" + o.user,
        "wifi=" + o.wifi,
        "gps=" + (o.gps.empty() ? "none" : o.gps),
        "activity=" + (o.activity.empty() ? "none" : o.activity),
        "window_s=" + fmt_int(o.window_s),
        "hop_s=" + fmt_int(o.hop_s),
        "stability_max_gap_s=" + fmt_int(o.stability_max_gap_s),
        "speed_max_gap_s=" + fmt_int(o.speed_max_gap_s),
        "prefer_reported=" + bool_str(o.prefer_reported),
        "keep_cell=" + bool_str(o.keep_cell),
        "keep_unknown_activity=" + bool_str(o.keep_unknown_activity),
        "max_accuracy_m=" + (o.max_accuracy_m ? fmt_double(*o.max_accuracy_m) : "none")};
    for (const auto& c : o.wifi_cols) out.push_back("wifi_col=" + c);
    for (const auto& c : o.gps_cols) out.push_back("gps_col=" + c);
    for (const auto& c : o.activity_cols) out.push_back("activity_col=" + c);
    return out;
}

int run_features(const FeaturesOpts& o) {
    const auto wifi_map = apply_overrides(ColumnMapping::wifi_default(), o.wifi_cols, "wifi");
    const auto gps_map = apply_overrides(ColumnMapping::gps_default(), o.gps_cols, "gps");
    const auto act_map =
        apply_overrides(ColumnMapping::activity_default(), o.activity_cols, "activity");

    ParseStats wifi_stats, gps_stats, act_stats;
    std::vector<WifiScan> scans;
    {
        auto in = open_input(o.wifi);
        scans = parse_wifi(in, wifi_map, ',', &wifi_stats);
    }
    std::vector<GpsFix> fixes;
    if (!o.gps.empty()) {
        auto in = open_input(o.gps);
        fixes = parse_gps(in, gps_map, ',', &gps_stats);
    }
    std::vector<ActivitySample> activities;
    if (!o.activity.empty()) {
        auto in = open_input(o.activity);
        activities = parse_activity(in, act_map, default_code_table(), ',', &act_stats);
    }
    report_parse("wifi", wifi_stats);
    report_parse("gps", gps_stats);
    report_parse("activity", act_stats);

    auto timeline =
        build_timeline(o.user, std::move(scans), std::move(fixes), std::move(activities));
    FilterConfig filter;
    filter.drop_cell_provider = !o.keep_cell;
    filter.drop_unknown_activity = !o.keep_unknown_activity;
    filter.max_accuracy_m = o.max_accuracy_m;
    FilterStats fstats;
    timeline = apply_filters(timeline, filter, &fstats);
    if (fstats.fixes_dropped_provider + fstats.fixes_dropped_accuracy +
            fstats.activities_dropped_unknown >
        0)
        std::cerr << "filters dropped " << fstats.fixes_dropped_provider << " fixes by provider, "
                  << fstats.fixes_dropped_accuracy << " by accuracy, "
                  << fstats.activities_dropped_unknown << " unknown activity samples\n";

    const auto stability = stability_series(timeline.scans, o.stability_max_gap_s);
    const auto speeds = speed_series(timeline.fixes, o.speed_max_gap_s, o.prefer_reported);
    const auto records = windowed_features(timeline, stability, speeds, o.window_s, o.hop_s);

    if (timeline.scans.empty())
        std::cerr << "warning: no wifi scans parsed from " << o.wifi
                  << "; stability features will be empty\n";

    OutDir dir(o.out);
    dir.write("features.csv", [&](std::ostream& os) {
        write_features(os, records, ',', file_comments("features", features_config_lines(o)));
    });

    std::size_t missing = 0;
    for (const auto& r : records)
        if (!r.speed) ++missing;
    std::cout << "windows: " << records.size() << "\n";
    std::cout << "missing speed fraction: "
              << fmt_double(records.empty()
                                ? 0.0
                                : static_cast<double>(missing) /
                                      static_cast<double>(records.size()))
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string features;
    std::string out;
    std::string classifier = "all";
    std::uint64_t seed = 0;
    TreeConfig tree;
    ForestConfig forest;
    GprSearchConfig gpr;
};

int run_train(const TrainOpts& o) {
    std::vector<FeatureRecord> records;
    {
        auto in = open_input(o.features);
        records = read_features(in);
    }

    std::array<std::size_t, kNumClasses> class_counts{};
    std::size_t labeled = 0;
    for (const auto& r : records) {
        if (!r.label || *r.label == ActivityLabel::unknown) continue;
        ++class_counts[static_cast<int>(*r.label)];
        ++labeled;
    }
    if (labeled == 0)
        throw DataError("features file has no labeled windows; training requires labels");
    for (int c = 0; c < kNumClasses; ++c)
        if (class_counts[c] == 0)
            throw DataError(std::string("class ") + to_string(static_cast<ActivityLabel>(c)) +
                            " has no labeled windows");

    const auto gpr = fit_speed_model(records, o.gpr);
    const auto imputed = impute_speeds(records, gpr);
    const auto dataset = make_dataset(imputed);

    ForestConfig fc = o.forest;
    fc.tree = o.tree;
    fc.seed = o.seed;

    std::vector<std::string> config{"seed=" + fmt_uint(o.seed), "features=" + o.features};
    for (auto& l : classifier_config_lines(o.classifier, o.tree, fc)) config.push_back(l);
    for (auto& l : gpr_config_lines(o.gpr)) config.push_back(l);

    const bool all = o.classifier == "all";
    OutDir dir(o.out);
    std::vector<std::string> wrote{"gpr.model"};
    dir.write("gpr.model", [&](std::ostream& os) { save_model(os, gpr, config); });
    if (all || o.classifier == "tree") {
        const auto m = train_tree(dataset, o.tree);
        dir.write("tree.model", [&](std::ostream& os) { save_model(os, m, config); });
        wrote.push_back("tree.model");
    }
    if (all || o.classifier == "nb") {
        const auto m = train_naive_bayes(dataset);
        dir.write("nb.model", [&](std::ostream& os) { save_model(os, m, config); });
        wrote.push_back("nb.model");
    }
    if (all || o.classifier == "forest") {
        const auto m = train_forest(dataset, fc);
        dir.write("forest.model", [&](std::ostream& os) { save_model(os, m, config); });
        wrote.push_back("forest.model");
    }

    std::cout << "trained on " << dataset.rows.size() << " labeled windows (speed model on "
              << gpr.train_x.size() << " observed pairs)\n";
    std::cout << "wrote:";
    for (const auto& w : wrote) std::cout << " " << w;
    std::cout << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::vector<std::string> features;
    std::string out;
    std::string classifier = "all";
    std::string split = "random";
    bool stratified = false;
    bool pooled = false;
    std::uint64_t seed = 0;
    TreeConfig tree;
    ForestConfig forest;
    GprSearchConfig gpr;
};

struct EvalUnit {
    std::string name;  // empty for a single unit; otherwise used as a file prefix
    std::vector<FeatureRecord> records;
};

std::vector<EvalUnit> eval_units(const EvalOpts& o) {
    std::vector<EvalUnit> units;
    if (o.pooled) {
        EvalUnit u;
        for (const auto& path : o.features) {
            auto in = open_input(path);
            auto records = read_features(in);
            u.records.insert(u.records.end(), records.begin(), records.end());
        }
        units.push_back(std::move(u));
        return units;
    }
    for (std::size_t i = 0; i < o.features.size(); ++i) {
        EvalUnit u;
        u.name = fs::path(o.features[i]).stem().string();
        auto in = open_input(o.features[i]);
        u.records = read_features(in);
        for (const auto& prev : units)
            if (prev.name == u.name) u.name += "_" + fmt_uint(i + 1);
        units.push_back(std::move(u));
    }
    if (units.size() == 1) units[0].name.clear();
    return units;
}

void eval_one_unit(const EvalUnit& unit, const EvalOpts& o, OutDir& dir) {
    const std::string prefix = unit.name.empty() ? "" : unit.name + "_";

    std::vector<FeatureRecord> labeled;
    for (const auto& r : unit.records)
        if (r.label && *r.label != ActivityLabel::unknown) labeled.push_back(r);
    const std::size_t dropped = unit.records.size() - labeled.size();

    const auto mode = o.split == "chrono" ? SplitMode::chronological : SplitMode::random;
    auto split = split_half(labeled, mode, o.stratified, o.seed);

    const auto gpr = fit_speed_model(split.train, o.gpr);
    const auto train = impute_speeds(split.train, gpr);
    const auto test = impute_speeds(split.test, gpr);
    const auto dataset = make_dataset(train);

    ForestConfig fc = o.forest;
    fc.tree = o.tree;
    fc.seed = o.seed;

    std::vector<std::string> config{"seed=" + fmt_uint(o.seed),
                                    "split=" + o.split,
                                    "stratified=" + bool_str(o.stratified),
                                    "pooled=" + bool_str(o.pooled),
                                    "unit=" + (unit.name.empty() ? "all" : unit.name),
                                    "n_records=" + fmt_uint(unit.records.size()),
                                    "dropped_unlabeled=" + fmt_uint(dropped)};
    for (auto& l : classifier_config_lines(o.classifier, o.tree, fc)) config.push_back(l);
    for (auto& l : gpr_config_lines(o.gpr)) config.push_back(l);

    const bool all = o.classifier == "all";
    std::vector<EvalReport> reports;
    if (all || o.classifier == "tree") {
        auto rep = evaluate(train_tree(dataset, o.tree), test);
        rep.split = o.split;
        rep.n_train = dataset.rows.size();
        reports.push_back(std::move(rep));
    }
    if (all || o.classifier == "nb") {
        auto rep = evaluate(train_naive_bayes(dataset), test);
        rep.split = o.split;
        rep.n_train = dataset.rows.size();
        reports.push_back(std::move(rep));
    }
    if (all || o.classifier == "forest") {
        auto rep = evaluate(train_forest(dataset, fc), test);
        rep.split = o.split;
        rep.n_train = dataset.rows.size();
        reports.push_back(std::move(rep));
    }

    const auto corr = stability_speed_correlation(unit.records);

    for (const auto& rep : reports) {
        dir.write(prefix + "report_" + rep.classifier + ".txt",
                  [&](std::ostream& os) { write_report(os, rep, config); });
    }
    dir.write(prefix + "comparison.csv", [&](std::ostream& os) {
        DelimitedWriter w(os, ',');
        for (const auto& c : file_comments("comparison", config)) w.comment(c);
        w.row({"classifier", "accuracy", "n_train", "n_test"});
        for (const auto& rep : reports)
            w.row({rep.classifier, fmt_double(rep.accuracy),
                   fmt_uint(rep.n_train), fmt_uint(rep.n_test)});
    });
    dir.write(prefix + "metrics.txt", [&](std::ostream& os) {
        os << "wifimob-metrics v1\n";
        os << "pearson: " << fmt_double(corr.pearson) << "\n";
        os << "spearman: " << fmt_double(corr.spearman) << "\n";
        for (const auto& line : config) os << "config: " << line << "\n";
    });
    dir.write(prefix + "plot_stability.csv", [&](std::ostream& os) {
        DelimitedWriter w(os, ',');
        for (const auto& c : file_comments("plot-stability", config)) w.comment(c);
        w.row({"window_start", "window_end", "stability_mean", "label"});
        for (const auto& r : unit.records)
            w.row({fmt_int(r.window_start), fmt_int(r.window_end),
                   r.stability_mean ? fmt_double(*r.stability_mean) : "",
                   r.label ? to_string(*r.label) : ""});
    });
    dir.write(prefix + "plot_speed.csv", [&](std::ostream& os) {
        DelimitedWriter w(os, ',');
        for (const auto& c : file_comments("plot-speed", config)) w.comment(c);
        w.row({"window_start", "window_end", "speed", "provenance"});
        for (const auto& r : unit.records)
            w.row({fmt_int(r.window_start), fmt_int(r.window_end),
                   r.speed ? fmt_double(*r.speed) : "", to_string(r.speed_provenance)});
    });
    dir.write(prefix + "plot_gpr.csv", [&](std::ostream& os) {
        DelimitedWriter w(os, ',');
        for (const auto& c : file_comments("plot-gpr", config)) w.comment(c);
        w.row({"stability", "mean", "variance"});
        for (int i = 0; i <= 100; ++i) {
            const double x = static_cast<double>(i) / 100.0;
            const auto p = predict_gpr(gpr, x);
            w.row({fmt_double(x), fmt_double(p.mean), fmt_double(p.variance)});
        }
    });

    const std::string label = unit.name.empty() ? "all" : unit.name;
    std::cout << "unit " << label << ": train=" << dataset.rows.size()
              << " test=" << test.size() << " (dropped " << dropped << " unlabeled)\n";
    for (const auto& rep : reports)
        std::cout << "  " << rep.classifier << " accuracy " << fmt_double(rep.accuracy) << "\n";
    std::cout << "  stability/speed pearson " << fmt_double(corr.pearson) << ", spearman "
              << fmt_double(corr.spearman) << "\n";
}

int run_eval(const EvalOpts& o) {
    auto units = eval_units(o);
    OutDir dir(o.out);
    for (const auto& u : units) eval_one_unit(u, o, dir);
    return 0;
}

// ---------------------------------------------------------------------------
// infer

struct InferOpts {
    std::string features;
    std::string model;
    std::string gpr;
    std::string out;
    std::uint64_t seed = 0;
};

int run_infer(const InferOpts& o) {
    std::vector<FeatureRecord> records;
    {
        auto in = open_input(o.features);
        records = read_features(in);
    }
    if (!o.gpr.empty()) {
        auto in = open_input(o.gpr);
        const auto gpr = load_gpr(in);
        records = impute_speeds(records, gpr);
    }
    ClassifierModel model = [&] {
        auto in = open_input(o.model);
        return load_classifier(in);
    }();

    const auto& model_schema = std::visit(
        [](const auto& m) -> const std::vector<std::string>& { return m.feature_names; }, model);
    if (model_schema != stage2_feature_names())
        throw DataError("model feature schema [" + join_names(model_schema) +
                        "] does not match the features file schema [" +
                        join_names(stage2_feature_names()) + "]");

    std::vector<Prediction> predictions;
    predictions.reserve(records.size());
    for (const auto& r : records) predictions.push_back(predict_label(model, stage2_row(r)));

    const std::vector<std::string> config{"seed=" + fmt_uint(o.seed),
                                          "features=" + o.features,
                                          "model=" + o.model,
                                          "gpr=" + (o.gpr.empty() ? "none" : o.gpr)};
    OutDir dir(o.out);
    dir.write("predictions.csv", [&](std::ostream& os) {
        DelimitedWriter w(os, ',');
        for (const auto& c : file_comments("predictions", config)) w.comment(c);
        w.row({"window_start", "window_end", "label", "score_stationary", "score_walking",
               "score_running"});
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& p = predictions[i];
            w.row({fmt_int(records[i].window_start), fmt_int(records[i].window_end),
                   to_string(p.label), fmt_double(p.scores[0]), fmt_double(p.scores[1]),
                   fmt_double(p.scores[2])});
        }
    });

    std::cout << "predicted " << records.size() << " windows\n";
    return 0;
}

// ---------------------------------------------------------------------------
// wiring

void add_common(CLI::App* cmd, std::string& out, std::uint64_t& seed) {
    cmd->fallthrough();
    cmd->add_option("--out", out, "output directory")->required();
    cmd->add_option("--seed", seed, "random seed");
}

void add_classifier_flags(CLI::App* cmd, std::string& which, TreeConfig& tc, ForestConfig& fc) {
    cmd->add_option("--classifier", which, "which classifier(s) to use")
        ->check(CLI::IsMember({"tree", "nb", "forest", "all"}));
    cmd->add_option("--min-leaf", tc.min_leaf, "minimum rows per tree leaf");
    cmd->add_option("--max-depth", tc.max_depth, "maximum tree depth");
    cmd->add_option("--n-trees", fc.n_trees, "trees in the forest");
    cmd->add_option("--features-per-split", fc.features_per_split,
                    "features sampled per forest split (0 = ceil(sqrt(arity)))");
    cmd->add_flag("--bootstrap,!--no-bootstrap", fc.bootstrap,
                  "draw a bootstrap sample per tree (default on)");
    cmd->add_option("--n-threads", fc.n_threads, "worker threads for forest training");
}

void add_gpr_flags(CLI::App* cmd, GprSearchConfig& g) {
    cmd->add_option("--gpr-sf2-lo", g.sf2_lo, "signal variance grid, lower bound");
    cmd->add_option("--gpr-sf2-hi", g.sf2_hi, "signal variance grid, upper bound");
    cmd->add_option("--gpr-ell-lo", g.ell_lo, "length scale grid, lower bound");
    cmd->add_option("--gpr-ell-hi", g.ell_hi, "length scale grid, upper bound");
    cmd->add_option("--gpr-sn2-lo", g.sn2_lo, "noise variance grid, lower bound");
    cmd->add_option("--gpr-sn2-hi", g.sn2_hi, "noise variance grid, upper bound");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wi-Fi mobility pipeline: synthetic corpora, windowed features, "
                 "stability-based speed imputation, and activity classification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "wifimob 1.0.0");
    app.set_config("--config", "",
                   "INI file with a [synth]/[features]/[train]/[eval]/[infer] section per "
                   "subcommand; flags override file values");

    SynthOpts synth_opts;
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic corpus");
    add_common(synth_cmd, synth_opts.out, synth_opts.cfg.seed);
    synth_cmd->add_option("--user", synth_opts.cfg.user_id, "user id stamped on the corpus");
    synth_cmd->add_option("--duration-s", synth_opts.cfg.duration_s, "simulated seconds");
    synth_cmd->add_option("--area-m", synth_opts.cfg.area_m, "square arena side, meters");
    synth_cmd->add_option("--ap-spacing-m", synth_opts.cfg.ap_spacing_m,
                          "access point grid pitch, meters");
    synth_cmd->add_option("--rssi-noise-std", synth_opts.cfg.rssi_noise_std,
                          "per-observation rssi noise, dB");
    synth_cmd->add_option("--scan-period-s", synth_opts.cfg.scan_period_s,
                          "seconds between wifi scans");
    synth_cmd->add_option("--gps-period-s", synth_opts.cfg.gps_period_s,
                          "seconds between gps fixes");
    synth_cmd->add_option("--gps-dropout", synth_opts.cfg.gps_dropout_prob,
                          "probability a gps fix is dropped");
    synth_cmd->add_option("--activity-period-s", synth_opts.cfg.activity_period_s,
                          "seconds between activity samples");
    synth_cmd->add_option("--stationary-mean-s", synth_opts.cfg.stationary.mean_duration_s,
                          "mean stationary segment length (0 disables)");
    synth_cmd->add_option("--stationary-lo", synth_opts.cfg.stationary.speed_lo,
                          "stationary speed range low, m/s");
    synth_cmd->add_option("--stationary-hi", synth_opts.cfg.stationary.speed_hi,
                          "stationary speed range high, m/s");
    synth_cmd->add_option("--walking-mean-s", synth_opts.cfg.walking.mean_duration_s,
                          "mean walking segment length (0 disables)");
    synth_cmd->add_option("--walking-lo", synth_opts.cfg.walking.speed_lo,
                          "walking speed range low, m/s");
    synth_cmd->add_option("--walking-hi", synth_opts.cfg.walking.speed_hi,
                          "walking speed range high, m/s");
    synth_cmd->add_option("--running-mean-s", synth_opts.cfg.running.mean_duration_s,
                          "mean running segment length (0 disables)");
    synth_cmd->add_option("--running-lo", synth_opts.cfg.running.speed_lo,
                          "running speed range low, m/s");
    synth_cmd->add_option("--running-hi", synth_opts.cfg.running.speed_hi,
                          "running speed range high, m/s");

    FeaturesOpts features_opts;
    auto* features_cmd =
        app.add_subcommand("features", "extract windowed features from trace files");
    add_common(features_cmd, features_opts.out, features_opts.seed);
    features_cmd->add_option("--wifi", features_opts.wifi, "wifi observations file")->required();
    features_cmd->add_option("--gps", features_opts.gps, "gps fixes file");
    features_cmd->add_option("--activity", features_opts.activity, "activity labels file");
    features_cmd->add_option("--user", features_opts.user, "user id for the timeline");
    features_cmd->add_option("--window-s", features_opts.window_s, "window length, seconds");
    features_cmd->add_option("--hop-s", features_opts.hop_s, "window hop, seconds");
    features_cmd->add_option("--stability-max-gap-s", features_opts.stability_max_gap_s,
                             "widest scan gap still scored for stability");
    features_cmd->add_option("--speed-max-gap-s", features_opts.speed_max_gap_s,
                             "widest fix gap still used for derived speed");
    features_cmd->add_flag("--prefer-reported,!--no-prefer-reported",
                           features_opts.prefer_reported,
                           "use reported gps speeds when present (default on)");
    features_cmd->add_flag("--keep-cell", features_opts.keep_cell,
                           "keep cell-provider fixes instead of dropping them");
    features_cmd->add_flag("--keep-unknown-activity", features_opts.keep_unknown_activity,
                           "keep unknown activity samples instead of dropping them");
    features_cmd->add_option("--max-accuracy-m", features_opts.max_accuracy_m,
                             "drop fixes with worse (larger) accuracy");
    features_cmd->add_option("--wifi-col", features_opts.wifi_cols,
                             "wifi column override, field=source (repeatable)");
    features_cmd->add_option("--gps-col", features_opts.gps_cols,
                             "gps column override, field=source (repeatable)");
    features_cmd->add_option("--activity-col", features_opts.activity_cols,
                             "activity column override, field=source (repeatable)");

    TrainOpts train_opts;
    auto* train_cmd = app.add_subcommand("train", "fit the speed model and classifiers");
    add_common(train_cmd, train_opts.out, train_opts.seed);
    train_cmd->add_option("--features", train_opts.features, "labeled features file")
        ->required();
    add_classifier_flags(train_cmd, train_opts.classifier, train_opts.tree, train_opts.forest);
    add_gpr_flags(train_cmd, train_opts.gpr);

    EvalOpts eval_opts;
    auto* eval_cmd =
        app.add_subcommand("eval", "train/test split evaluation with reports and plot data");
    add_common(eval_cmd, eval_opts.out, eval_opts.seed);
    eval_cmd->add_option("--features", eval_opts.features, "features file (repeat per user)")
        ->required();
    eval_cmd->add_option("--split", eval_opts.split, "half-split mode")
        ->check(CLI::IsMember({"random", "chrono"}));
    eval_cmd->add_flag("--stratified", eval_opts.stratified,
                       "keep class proportions in the random split");
    auto* per_user_flag =
        eval_cmd->add_flag("--per-user", "evaluate each features file separately (default)");
    auto* pooled_flag = eval_cmd->add_flag("--pooled", eval_opts.pooled,
                                           "pool all features files into one evaluation");
    per_user_flag->excludes(pooled_flag);
    add_classifier_flags(eval_cmd, eval_opts.classifier, eval_opts.tree, eval_opts.forest);
    add_gpr_flags(eval_cmd, eval_opts.gpr);

    InferOpts infer_opts;
    auto* infer_cmd = app.add_subcommand("infer", "label windows with a trained model");
    add_common(infer_cmd, infer_opts.out, infer_opts.seed);
    infer_cmd->add_option("--features", infer_opts.features, "features file")->required();
    infer_cmd->add_option("--model", infer_opts.model, "classifier model file")->required();
    infer_cmd->add_option("--gpr", infer_opts.gpr,
                          "speed model file for imputing missing speeds first");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(synth_cmd)) return run_synth(synth_opts);
        if (app.got_subcommand(features_cmd)) return run_features(features_opts);
        if (app.got_subcommand(train_cmd)) return run_train(train_opts);
        if (app.got_subcommand(eval_cmd)) return run_eval(eval_opts);
        if (app.got_subcommand(infer_cmd)) return run_infer(infer_opts);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
