#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wifimob/classify.hpp"
#include "wifimob/csv.hpp"
#include "wifimob/errors.hpp"
#include "wifimob/features.hpp"
#include "wifimob/rng.hpp"
#include "wifimob/trace.hpp"

namespace wifimob {

// Train/test protocol and metrics: half splits (random or chronological,
// optionally stratified), accuracy/confusion reports, and the correlation
// between window stability and observed speed.

enum class SplitMode { random, chronological };

struct SplitResult {
    std::vector<FeatureRecord> train;
    std::vector<FeatureRecord> test;
};

struct EvalReport {
    std::string classifier;
    std::string split;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    double accuracy = 0;
    // confusion[true][predicted], label order stationary, walking, running
    std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
    std::array<std::optional<double>, kNumClasses> precision;
    std::array<std::optional<double>, kNumClasses> recall;
};

struct Correlation {
    double pearson = 0;
    double spearman = 0;
};

namespace detail {

inline void require_labeled(const std::vector<FeatureRecord>& records, const char* what) {
    for (const auto& r : records)
        if (!r.label || *r.label == ActivityLabel::unknown)
            throw DataError(std::string(what) + " requires fully labeled records");
}

}  // namespace detail

/// Splits labeled records into halves with |train| = ceil(n/2). Random mode
/// shuffles with the seed; chronological mode takes the earliest windows as
/// training. Stratified (random only) keeps per-class proportions within
/// one record: each class contributes floor(n_c/2) rows to training, and
/// odd classes are topped up in label order until the half is full. Both
/// halves come back in original input order.
inline SplitResult split_half(const std::vector<FeatureRecord>& records, SplitMode mode,
                              bool stratified = false, std::uint64_t seed = 0) {
    if (records.size() < 2) throw DataError("split needs at least 2 records");
    detail::require_labeled(records, "split");
    const std::size_t n = records.size();
    const std::size_t n_train = (n + 1) / 2;

    std::vector<std::size_t> train_idx;
    if (mode == SplitMode::chronological) {
        if (stratified) throw ConfigError("stratified split requires random mode");
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return records[a].window_start < records[b].window_start;
        });
        train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(seed);
        rng.shuffle(order);
        if (!stratified) {
            train_idx.assign(order.begin(),
                             order.begin() + static_cast<std::ptrdiff_t>(n_train));
        } else {
            std::array<std::size_t, kNumClasses> per_class{};
            for (const auto& r : records) ++per_class[static_cast<int>(*r.label)];
            std::array<std::size_t, kNumClasses> quota{};
            std::size_t assigned = 0;
            for (int c = 0; c < kNumClasses; ++c) {
                quota[c] = per_class[c] / 2;
                assigned += quota[c];
            }
            for (int c = 0; c < kNumClasses && assigned < n_train; ++c) {
                if (per_class[c] % 2 == 1) {
                    ++quota[c];
                    ++assigned;
                }
            }
            for (int c = 0; c < kNumClasses; ++c) {
                if (per_class[c] > 0 && quota[c] == 0)
                    throw DataError(std::string("stratified split leaves class ") +
                                    to_string(static_cast<ActivityLabel>(c)) +
                                    " out of training");
            }
            for (std::size_t i : order) {
                const int c = static_cast<int>(*records[i].label);
                if (quota[c] > 0) {
                    --quota[c];
                    train_idx.push_back(i);
                }
            }
        }
    }

    std::sort(train_idx.begin(), train_idx.end());
    std::vector<bool> in_train(n, false);
    for (std::size_t i : train_idx) in_train[i] = true;
    SplitResult out;
    out.train.reserve(train_idx.size());
    out.test.reserve(n - train_idx.size());
    for (std::size_t i = 0; i < n; ++i)
        (in_train[i] ? out.train : out.test).push_back(records[i]);
    return out;
}

namespace detail {

template <typename Fn>
EvalReport evaluate_rows(Fn&& predict, const std::vector<FeatureRecord>& test,
                         std::string classifier) {
    if (test.empty()) throw DataError("evaluation set is empty");
    require_labeled(test, "evaluation");

    EvalReport rep;
    rep.classifier = std::move(classifier);
    rep.n_test = test.size();
    std::size_t hits = 0;
    for (const auto& r : test) {
        const auto p = predict(stage2_row(r));
        const int t = static_cast<int>(*r.label);
        const int g = static_cast<int>(p.label);
        ++rep.confusion[t][g];
        if (t == g) ++hits;
    }
    rep.accuracy = static_cast<double>(hits) / static_cast<double>(rep.n_test);
    for (int c = 0; c < kNumClasses; ++c) {
        std::size_t col = 0, row = 0;
        for (int o = 0; o < kNumClasses; ++o) {
            col += rep.confusion[o][c];
            row += rep.confusion[c][o];
        }
        if (col > 0)
            rep.precision[c] =
                static_cast<double>(rep.confusion[c][c]) / static_cast<double>(col);
        if (row > 0)
            rep.recall[c] = static_cast<double>(rep.confusion[c][c]) / static_cast<double>(row);
    }
    return rep;
}

}  // namespace detail

inline EvalReport evaluate(const TreeModel& m, const std::vector<FeatureRecord>& test) {
    return detail::evaluate_rows([&](const FeatureRow& r) { return predict_label(m, r); }, test,
                                 "tree");
}

inline EvalReport evaluate(const NaiveBayesModel& m, const std::vector<FeatureRecord>& test) {
    return detail::evaluate_rows([&](const FeatureRow& r) { return predict_label(m, r); }, test,
                                 "nb");
}

inline EvalReport evaluate(const ForestModel& m, const std::vector<FeatureRecord>& test) {
    return detail::evaluate_rows([&](const FeatureRow& r) { return predict_label(m, r); }, test,
                                 "forest");
}

/// Pearson correlation; needs >= 2 pairs and nonzero variance on each side.
inline double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DataError("correlation inputs differ in length");
    const std::size_t n = xs.size();
    if (n < 2) throw DataError("correlation needs at least 2 pairs");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0 || syy == 0) throw DataError("correlation input has zero variance");
    return sxy / std::sqrt(sxx * syy);
}

namespace detail {

/// 1-based ranks with ties sharing the average of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

/// Spearman rank correlation via Pearson over average ranks.
inline double spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw DataError("correlation inputs differ in length");
    return pearson(detail::average_ranks(xs), detail::average_ranks(ys));
}

/// Correlation between window stability and speed over records where both
/// are present and the speed was observed (imputed speeds would be
/// circular). Needs at least 3 such pairs.
inline Correlation stability_speed_correlation(const std::vector<FeatureRecord>& records) {
    std::vector<double> xs, ys;
    for (const auto& r : records) {
        if (!r.stability_mean || !r.speed) continue;
        if (r.speed_provenance != SpeedProvenance::observed) continue;
        xs.push_back(*r.stability_mean);
        ys.push_back(*r.speed);
    }
    if (xs.size() < 3) throw DataError("correlation needs at least 3 observed pairs");
    return {pearson(xs, ys), spearman(xs, ys)};
}

/// Versioned line-oriented report document; `config_lines` echo the
/// resolved run configuration.
inline void write_report(std::ostream& out, const EvalReport& rep,
                         const std::vector<std::string>& config_lines = {}) {
    out << "wifimob-report v1\n";
    out << "classifier: " << rep.classifier << "\n";
    out << "split: " << rep.split << "\n";
    out << "n_train: " << fmt_int(static_cast<std::int64_t>(rep.n_train)) << "\n";
    out << "n_test: " << fmt_int(static_cast<std::int64_t>(rep.n_test)) << "\n";
    out << "accuracy: " << fmt_double(rep.accuracy) << "\n";
    out << "labels: stationary,walking,running\n";
    for (int t = 0; t < kNumClasses; ++t) {
        out << "confusion_" << to_string(static_cast<ActivityLabel>(t)) << ":";
        for (int p = 0; p < kNumClasses; ++p)
            out << " " << fmt_int(static_cast<std::int64_t>(rep.confusion[t][p]));
        out << "\n";
    }
    auto opt_row = [&](const char* name,
                       const std::array<std::optional<double>, kNumClasses>& vals) {
        out << name << ":";
        for (const auto& v : vals) out << " " << (v ? fmt_double(*v) : "-");
        out << "\n";
    };
    opt_row("precision", rep.precision);
    opt_row("recall", rep.recall);
    for (const auto& line : config_lines) out << "config: " << line << "\n";
}

}  // namespace wifimob
