// End-to-end walkthrough on a synthetic corpus: generate traces, window them
// into features, fit the stability->speed regression, impute the gaps, train
// the three classifiers on one half, and score them on the other.

#include <iostream>

#include "wifimob/eval.hpp"
#include "wifimob/gpr.hpp"
#include "wifimob/model_io.hpp"
#include "wifimob/synth.hpp"

using namespace wifimob;

int main() {
    SynthConfig cfg;
    cfg.duration_s = 4 * 3600;
    cfg.gps_dropout_prob = 0.5;
    cfg.seed = 7;
    const auto corpus = generate(cfg);
    std::cout << "corpus: " << corpus.timeline.scans.size() << " scans, "
              << corpus.timeline.fixes.size() << " fixes, "
              << corpus.timeline.activities.size() << " activity samples\n";

    const auto stability = stability_series(corpus.timeline.scans, 1800);
    const auto speeds = speed_series(corpus.timeline.fixes, 900, true);
    auto records = windowed_features(corpus.timeline, stability, speeds, 600, 300);
    std::size_t missing = 0;
    for (const auto& r : records)
        if (!r.speed) ++missing;
    std::cout << "features: " << records.size() << " windows, " << missing
              << " without an observed speed\n";

    auto split = split_half(records, SplitMode::random, true, cfg.seed);

    std::vector<double> xs, ys;
    for (const auto& r : split.train) {
        if (!r.stability_mean || !r.speed || r.speed_provenance != SpeedProvenance::observed)
            continue;
        xs.push_back(*r.stability_mean);
        ys.push_back(*r.speed);
    }
    const auto gpr = fit_gpr(xs, ys);
    std::cout << "speed model: " << xs.size() << " training pairs, length scale "
              << gpr.hyperparams.length_scale << "\n";
    for (double s : {1.0, 0.5, 0.0})
        std::cout << "  stability " << s << " -> " << predict_gpr(gpr, s).mean << " m/s\n";

    const auto train = impute_speeds(split.train, gpr);
    const auto test = impute_speeds(split.test, gpr);
    const auto dataset = make_dataset(train);

    ForestConfig fc;
    fc.seed = cfg.seed;
    std::cout << "accuracy on " << test.size() << " held-out windows:\n";
    std::cout << "  tree   " << evaluate(train_tree(dataset, {}), test).accuracy << "\n";
    std::cout << "  nb     " << evaluate(train_naive_bayes(dataset), test).accuracy << "\n";
    std::cout << "  forest " << evaluate(train_forest(dataset, fc), test).accuracy << "\n";

    const auto corr = stability_speed_correlation(records);
    std::cout << "stability vs speed: pearson " << corr.pearson << ", spearman "
              << corr.spearman << "\n";
    return 0;
}
