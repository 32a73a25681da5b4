#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wifimob/errors.hpp"
#include "wifimob/features.hpp"
#include "wifimob/rng.hpp"
#include "wifimob/trace.hpp"

namespace wifimob {

// Stage-two classifiers over window feature vectors: a gain-ratio decision
// tree, Gaussian naive Bayes, and a random forest of gain-ratio trees. All
// training is deterministic given (dataset, config, seed).

/// A feature vector; an empty optional marks a missing value.
using FeatureRow = std::vector<std::optional<double>>;

/// Labelled numeric dataset of fixed arity. Labels are restricted to the
/// three concrete activities.
struct Dataset {
    std::vector<FeatureRow> rows;
    std::vector<ActivityLabel> labels;
    std::vector<std::string> feature_names;
};

inline constexpr int kNumClasses = 3;

/// The default stage-2 feature set: Wi-Fi shape statistics plus the stage-1
/// speed.
inline const std::vector<std::string>& stage2_feature_names() {
    static const std::vector<std::string> names = {
        "stability_mean", "stability_min", "ap_count_mean", "ap_count_std",
        "rssi_mean",      "rssi_std",      "speed"};
    return names;
}

inline FeatureRow stage2_row(const FeatureRecord& r) {
    return {r.stability_mean, r.stability_min, r.ap_count_mean, r.ap_count_std,
            r.rssi_mean,      r.rssi_std,      r.speed};
}

/// Builds a training dataset from the labelled records; rows without a
/// concrete label (none or unknown) are left out.
inline Dataset make_dataset(const std::vector<FeatureRecord>& records) {
    Dataset d;
    d.feature_names = stage2_feature_names();
    for (const auto& r : records) {
        if (!r.label || *r.label == ActivityLabel::unknown) continue;
        d.rows.push_back(stage2_row(r));
        d.labels.push_back(*r.label);
    }
    return d;
}

namespace detail {

inline void check_dataset(const Dataset& d) {
    if (d.rows.empty()) throw DataError("training dataset is empty");
    if (d.rows.size() != d.labels.size())
        throw DataError("dataset rows and labels differ in length");
    const std::size_t arity = d.feature_names.size();
    if (arity == 0) throw DataError("dataset has no features");
    for (std::size_t i = 0; i < d.rows.size(); ++i) {
        if (d.rows[i].size() != arity)
            throw DataError("dataset row " + fmt_int(static_cast<std::int64_t>(i)) +
                            " has arity " + fmt_int(static_cast<std::int64_t>(d.rows[i].size())) +
                            ", expected " + fmt_int(static_cast<std::int64_t>(arity)));
        if (d.labels[i] == ActivityLabel::unknown)
            throw DataError("dataset row " + fmt_int(static_cast<std::int64_t>(i)) +
                            " carries the unknown label");
    }
}

inline void check_arity(std::size_t expected, const FeatureRow& row) {
    if (row.size() != expected)
        throw DataError("feature row arity " + fmt_int(static_cast<std::int64_t>(row.size())) +
                        " does not match model arity " +
                        fmt_int(static_cast<std::int64_t>(expected)));
}

inline double entropy_counts(const std::array<std::size_t, kNumClasses>& counts) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    double h = 0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

/// First class index holding the maximum count, so ties resolve in label
/// order stationary < walking < running.
inline ActivityLabel majority_of(const std::array<std::size_t, kNumClasses>& counts) {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
        if (counts[c] > counts[best]) best = c;
    return static_cast<ActivityLabel>(best);
}

}  // namespace detail

/// Shannon entropy in bits of a class count vector.
inline double entropy(const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw DataError("entropy of an empty count vector");
    double h = 0;
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

struct SplitChoice {
    std::size_t feature = 0;
    double threshold = 0;
    double gain_ratio = 0;
};

struct TreeConfig {
    std::size_t min_leaf = 5;
    std::size_t max_depth = 20;
};

/// One node of a decision tree, stored in preorder (root at index 0, left
/// subtree before right). Internal nodes route row[feature] <= threshold to
/// `left`; rows missing that feature follow `missing_left`, the side that
/// held more non-missing training rows.
struct TreeNode {
    bool is_leaf = true;
    std::size_t feature = 0;
    double threshold = 0;
    std::size_t left = 0;
    std::size_t right = 0;
    bool missing_left = true;
    std::array<std::size_t, kNumClasses> counts{};
    ActivityLabel majority = ActivityLabel::stationary;

    bool operator==(const TreeNode&) const = default;
};

struct TreeModel {
    std::vector<TreeNode> nodes;
    std::vector<std::string> feature_names;

    bool operator==(const TreeModel&) const = default;
};

struct NaiveBayesModel {
    std::vector<ActivityLabel> classes;  // ascending label order, each with >= 1 row
    std::vector<double> priors;          // Laplace-smoothed, sums to 1
    std::vector<std::vector<double>> means;      // [class][feature]
    std::vector<std::vector<double>> variances;  // [class][feature], floored
    std::vector<std::string> feature_names;

    bool operator==(const NaiveBayesModel&) const = default;
};

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t features_per_split = 0;  // 0 = ceil(sqrt(arity))
    std::uint64_t seed = 0;
    bool bootstrap = true;
    TreeConfig tree;
    unsigned n_threads = 1;
};

struct ForestModel {
    std::vector<TreeModel> trees;
    std::size_t features_per_split = 0;
    std::uint64_t seed = 0;
    bool bootstrap = true;
    std::vector<std::string> feature_names;

    bool operator==(const ForestModel&) const = default;
};

struct Prediction {
    ActivityLabel label = ActivityLabel::stationary;
    std::array<double, kNumClasses> scores{};  // normalized, indexed by label
};

inline constexpr double kVarianceFloor = 1e-9;

namespace detail {

/// Gain-ratio split search over the rows named by `indices`, considering
/// only `candidates` features. Rows missing a feature are excluded from
/// that feature's evaluation. A split qualifies when both children hold at
/// least min_leaf non-missing rows and information gain is strictly
/// positive; the best gain ratio wins, earlier feature then lower threshold
/// on ties.
inline std::optional<SplitChoice> best_split_indexed(const Dataset& d,
                                                     const std::vector<std::size_t>& indices,
                                                     const std::vector<std::size_t>& candidates,
                                                     std::size_t min_leaf) {
    std::optional<SplitChoice> best;
    std::vector<std::pair<double, int>> vals;  // (value, class) over non-missing rows
    for (std::size_t f : candidates) {
        vals.clear();
        std::array<std::size_t, kNumClasses> total{};
        for (std::size_t i : indices) {
            const auto& cell = d.rows[i][f];
            if (!cell) continue;
            const int cls = static_cast<int>(d.labels[i]);
            vals.emplace_back(*cell, cls);
            ++total[cls];
        }
        if (vals.size() < 2) continue;
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        const double h_total = entropy_counts(total);
        const auto n = static_cast<double>(vals.size());

        std::array<std::size_t, kNumClasses> left{};
        std::size_t n_left = 0;
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            ++left[vals[k].second];
            ++n_left;
            if (vals[k].first == vals[k + 1].first) continue;
            const std::size_t n_right = vals.size() - n_left;
            if (n_left < min_leaf || n_right < min_leaf) continue;

            std::array<std::size_t, kNumClasses> right{};
            for (int c = 0; c < kNumClasses; ++c) right[c] = total[c] - left[c];
            const double pl = static_cast<double>(n_left) / n;
            const double pr = static_cast<double>(n_right) / n;
            const double gain =
                h_total - pl * entropy_counts(left) - pr * entropy_counts(right);
            if (!(gain > 0)) continue;
            const double split_info = -pl * std::log2(pl) - pr * std::log2(pr);
            const double ratio = gain / split_info;
            if (!best || ratio > best->gain_ratio)
                best = SplitChoice{f, (vals[k].first + vals[k + 1].first) / 2.0, ratio};
        }
    }
    return best;
}

struct TreeBuilder {
    const Dataset& d;
    TreeConfig config;
    Rng* rng = nullptr;               // set only for forest trees
    std::size_t features_per_split = 0;
    std::vector<TreeNode> nodes;

    /// Distinct candidate feature indices for one split attempt, sorted
    /// ascending. Consumes no randomness when every feature is in play.
    std::vector<std::size_t> sample_candidates() {
        const std::size_t arity = d.feature_names.size();
        std::vector<std::size_t> all(arity);
        for (std::size_t i = 0; i < arity; ++i) all[i] = i;
        if (!rng || features_per_split >= arity) return all;
        for (std::size_t k = 0; k < features_per_split; ++k) {
            const std::size_t j = k + static_cast<std::size_t>(
                                          rng->bounded(static_cast<std::uint64_t>(arity - k)));
            std::swap(all[k], all[j]);
        }
        all.resize(features_per_split);
        std::sort(all.begin(), all.end());
        return all;
    }

    std::size_t build(const std::vector<std::size_t>& indices, std::size_t depth) {
        const std::size_t self = nodes.size();
        nodes.emplace_back();
        std::array<std::size_t, kNumClasses> counts{};
        for (std::size_t i : indices) ++counts[static_cast<int>(d.labels[i])];
        nodes[self].counts = counts;
        nodes[self].majority = majority_of(counts);

        int present = 0;
        for (auto c : counts)
            if (c > 0) ++present;
        if (present <= 1 || depth >= config.max_depth || indices.size() < 2) return self;

        const auto candidates = sample_candidates();
        const auto choice = best_split_indexed(d, indices, candidates, config.min_leaf);
        if (!choice) return self;

        std::vector<std::size_t> left_idx, right_idx;
        std::size_t left_known = 0, right_known = 0;
        std::vector<std::size_t> missing_idx;
        for (std::size_t i : indices) {
            const auto& cell = d.rows[i][choice->feature];
            if (!cell) {
                missing_idx.push_back(i);
            } else if (*cell <= choice->threshold) {
                left_idx.push_back(i);
                ++left_known;
            } else {
                right_idx.push_back(i);
                ++right_known;
            }
        }
        const bool missing_left = left_known >= right_known;
        auto& sink = missing_left ? left_idx : right_idx;
        for (std::size_t i : missing_idx) sink.push_back(i);
        std::sort(sink.begin(), sink.end());

        nodes[self].is_leaf = false;
        nodes[self].feature = choice->feature;
        nodes[self].threshold = choice->threshold;
        nodes[self].missing_left = missing_left;
        nodes[self].left = build(left_idx, depth + 1);
        nodes[self].right = build(right_idx, depth + 1);
        return self;
    }
};

inline std::size_t route_to_leaf(const TreeModel& m, const FeatureRow& row) {
    std::size_t at = 0;
    while (!m.nodes[at].is_leaf) {
        const auto& n = m.nodes[at];
        const auto& cell = row[n.feature];
        const bool go_left = cell ? (*cell <= n.threshold) : n.missing_left;
        at = go_left ? n.left : n.right;
    }
    return at;
}

inline TreeModel train_tree_seeded(const Dataset& d, const TreeConfig& config, Rng* rng,
                                   std::size_t features_per_split) {
    TreeBuilder b{d, config, rng, features_per_split, {}};
    std::vector<std::size_t> all(d.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    b.build(all, 0);
    TreeModel m;
    m.nodes = std::move(b.nodes);
    m.feature_names = d.feature_names;
    return m;
}

}  // namespace detail

/// Best gain-ratio split over the whole dataset, or none when no candidate
/// achieves strictly positive information gain.
inline std::optional<SplitChoice> best_split(const Dataset& d,
                                             const std::vector<std::size_t>& candidate_features,
                                             std::size_t min_leaf = 1) {
    detail::check_dataset(d);
    std::vector<std::size_t> all(d.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return detail::best_split_indexed(d, all, candidate_features, min_leaf);
}

/// Recursive gain-ratio tree with pre-pruning: stops on purity, depth,
/// child size below min_leaf, or no positive-gain split.
inline TreeModel train_tree(const Dataset& d, const TreeConfig& config = {}) {
    detail::check_dataset(d);
    return detail::train_tree_seeded(d, config, nullptr, d.feature_names.size());
}

/// Gaussian naive Bayes over the classes present in the dataset. Priors are
/// Laplace-smoothed; per (class, feature) moments use the non-missing rows
/// and population variance floored at 1e-9. A (class, feature) pair with no
/// non-missing rows is an error.
inline NaiveBayesModel train_naive_bayes(const Dataset& d) {
    detail::check_dataset(d);
    const std::size_t arity = d.feature_names.size();

    std::array<std::size_t, kNumClasses> counts{};
    for (auto l : d.labels) ++counts[static_cast<int>(l)];
    NaiveBayesModel m;
    m.feature_names = d.feature_names;
    std::size_t n_classes = 0;
    for (int c = 0; c < kNumClasses; ++c)
        if (counts[c] > 0) ++n_classes;
    for (int c = 0; c < kNumClasses; ++c) {
        if (counts[c] == 0) continue;
        m.classes.push_back(static_cast<ActivityLabel>(c));
        m.priors.push_back(static_cast<double>(counts[c] + 1) /
                           static_cast<double>(d.rows.size() + n_classes));
    }

    for (std::size_t ci = 0; ci < m.classes.size(); ++ci) {
        const auto cls = m.classes[ci];
        std::vector<double> mu(arity), var(arity);
        for (std::size_t f = 0; f < arity; ++f) {
            double sum = 0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < d.rows.size(); ++i) {
                if (d.labels[i] != cls || !d.rows[i][f]) continue;
                sum += *d.rows[i][f];
                ++n;
            }
            if (n == 0)
                throw DataError(std::string("class ") + to_string(cls) +
                                " has no values for feature " + d.feature_names[f]);
            mu[f] = sum / static_cast<double>(n);
            double ss = 0;
            for (std::size_t i = 0; i < d.rows.size(); ++i) {
                if (d.labels[i] != cls || !d.rows[i][f]) continue;
                const double dlt = *d.rows[i][f] - mu[f];
                ss += dlt * dlt;
            }
            var[f] = std::max(kVarianceFloor, ss / static_cast<double>(n));
        }
        m.means.push_back(std::move(mu));
        m.variances.push_back(std::move(var));
    }
    return m;
}

/// Random forest: each tree is trained on a bootstrap resample (n draws
/// with replacement) with a fresh feature subset per split, both driven by
/// a per-tree stream seeded from (seed, tree index). Trees may be trained
/// on several threads; the result is identical at any thread count.
inline ForestModel train_forest(const Dataset& d, const ForestConfig& config = {}) {
    detail::check_dataset(d);
    if (config.n_trees < 1) throw ConfigError("forest needs n_trees >= 1");
    const std::size_t arity = d.feature_names.size();
    std::size_t m = config.features_per_split;
    if (m == 0) m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(arity))));
    if (m > arity) throw ConfigError("features_per_split exceeds feature count");

    ForestModel forest;
    forest.features_per_split = m;
    forest.seed = config.seed;
    forest.bootstrap = config.bootstrap;
    forest.feature_names = d.feature_names;
    forest.trees.resize(config.n_trees);

    auto train_one = [&](std::size_t t) {
        Rng rng(substream_seed(config.seed, t));
        if (config.bootstrap) {
            Dataset sample;
            sample.feature_names = d.feature_names;
            const std::size_t n = d.rows.size();
            sample.rows.reserve(n);
            sample.labels.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto pick = static_cast<std::size_t>(
                    rng.bounded(static_cast<std::uint64_t>(n)));
                sample.rows.push_back(d.rows[pick]);
                sample.labels.push_back(d.labels[pick]);
            }
            forest.trees[t] = detail::train_tree_seeded(sample, config.tree, &rng, m);
        } else {
            forest.trees[t] = detail::train_tree_seeded(d, config.tree, &rng, m);
        }
    };

    const unsigned threads = std::max(1u, config.n_threads);
    if (threads == 1 || config.n_trees == 1) {
        for (std::size_t t = 0; t < config.n_trees; ++t) train_one(t);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w]() {
                for (std::size_t t = w; t < config.n_trees; t += threads) train_one(t);
            });
        }
        for (auto& th : pool) th.join();
    }
    return forest;
}

/// Routes by thresholds; a missing feature follows the split's stored
/// majority direction. Scores are the landed leaf's normalized class
/// counts.
inline Prediction predict_label(const TreeModel& m, const FeatureRow& row) {
    detail::check_arity(m.feature_names.size(), row);
    const auto& leaf = m.nodes[detail::route_to_leaf(m, row)];
    Prediction p;
    p.label = leaf.majority;
    double total = 0;
    for (auto c : leaf.counts) total += static_cast<double>(c);
    for (int c = 0; c < kNumClasses; ++c)
        p.scores[c] = static_cast<double>(leaf.counts[c]) / total;
    return p;
}

/// Argmax of log prior plus summed log Gaussian likelihoods; missing
/// features are skipped. Scores are the normalized posterior; equal scores
/// resolve in label order.
inline Prediction predict_label(const NaiveBayesModel& m, const FeatureRow& row) {
    detail::check_arity(m.feature_names.size(), row);
    constexpr double kLog2Pi = 1.8378770664093454836;
    std::vector<double> log_scores(m.classes.size());
    for (std::size_t ci = 0; ci < m.classes.size(); ++ci) {
        double s = std::log(m.priors[ci]);
        for (std::size_t f = 0; f < row.size(); ++f) {
            if (!row[f]) continue;
            const double var = m.variances[ci][f];
            const double dlt = *row[f] - m.means[ci][f];
            s += -0.5 * (kLog2Pi + std::log(var)) - dlt * dlt / (2.0 * var);
        }
        log_scores[ci] = s;
    }
    const double mx = *std::max_element(log_scores.begin(), log_scores.end());
    double z = 0;
    for (double s : log_scores) z += std::exp(s - mx);

    Prediction p;
    std::size_t best = 0;
    for (std::size_t ci = 0; ci < m.classes.size(); ++ci) {
        p.scores[static_cast<int>(m.classes[ci])] = std::exp(log_scores[ci] - mx) / z;
        if (log_scores[ci] > log_scores[best]) best = ci;
    }
    p.label = m.classes[best];
    return p;
}

/// Majority vote across trees; vote ties fall back to summed leaf class
/// counts, then label order. Scores are vote fractions.
inline Prediction predict_label(const ForestModel& m, const FeatureRow& row) {
    detail::check_arity(m.feature_names.size(), row);
    std::array<std::size_t, kNumClasses> votes{};
    std::array<double, kNumClasses> support{};
    for (const auto& tree : m.trees) {
        const auto& leaf = tree.nodes[detail::route_to_leaf(tree, row)];
        ++votes[static_cast<int>(leaf.majority)];
        for (int c = 0; c < kNumClasses; ++c) support[c] += static_cast<double>(leaf.counts[c]);
    }
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && support[c] > support[best]))
            best = c;
    }
    Prediction p;
    p.label = static_cast<ActivityLabel>(best);
    for (int c = 0; c < kNumClasses; ++c)
        p.scores[c] = static_cast<double>(votes[c]) / static_cast<double>(m.trees.size());
    return p;
}

}  // namespace wifimob
