#pragma once

// Reference implementations used only by the tests. They answer the same
// questions as the library but through different algorithms (dense LU
// solves instead of Cholesky, exhaustive enumeration instead of the
// incremental split scan, direct formula evaluation instead of streaming
// accumulators), so agreement is evidence rather than tautology.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "wifimob/classify.hpp"
#include "wifimob/gpr.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Dense Gaussian-process oracle.
//
// Doolittle LU without pivoting: for a symmetric matrix the pivots are the
// ratios of leading principal minors, so "every pivot positive and finite"
// is exactly the positive-definiteness test the library's Cholesky makes.
// ---------------------------------------------------------------------------

struct Lu {
    std::vector<double> lu;  // row-major, L below diagonal (unit), U on/above
    std::size_t n = 0;
    bool ok = false;
};

inline Lu lu_decompose(std::vector<double> a, std::size_t n) {
    Lu f;
    f.n = n;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * a[k * n + j];
            a[i * n + j] = sum;
        }
        const double pivot = a[i * n + i];
        if (!(pivot > 0) || !std::isfinite(pivot)) return f;
        for (std::size_t j = i + 1; j < n; ++j) {
            double sum = a[j * n + i];
            for (std::size_t k = 0; k < i; ++k) sum -= a[j * n + k] * a[k * n + i];
            a[j * n + i] = sum / pivot;
        }
    }
    f.lu = std::move(a);
    f.ok = true;
    return f;
}

inline std::vector<double> lu_solve(const Lu& f, std::vector<double> b) {
    const std::size_t n = f.n;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < i; ++k) b[i] -= f.lu[i * n + k] * b[k];
    for (std::size_t ii = n; ii-- > 0;) {
        for (std::size_t k = ii + 1; k < n; ++k) b[ii] -= f.lu[ii * n + k] * b[k];
        b[ii] /= f.lu[ii * n + ii];
    }
    return b;
}

// Neumaier-compensated accumulator; absorbs both the running sum's rounding
// and the fma-recovered product errors, so dot products and residuals come
// out correct to about one ulp even under heavy cancellation.
struct CompensatedSum {
    double sum = 0;
    double comp = 0;

    void add(double v) {
        const double t = sum + v;
        comp += (std::abs(sum) >= std::abs(v)) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    void add_product(double a, double b) {
        const double p = a * b;
        add(p);
        add(std::fma(a, b, -p));
    }
    double value() const { return sum + comp; }
};

inline double dot_compensated(const std::vector<double>& a, const std::vector<double>& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add_product(a[i], b[i]);
    return s.value();
}

// A plain LU solve carries forward error proportional to the condition
// number; refining against an exact-to-one-ulp residual removes it, leaving
// the oracle essentially at the true solution of the factored system.
inline std::vector<double> lu_refined_solve(const std::vector<double>& k, const Lu& f,
                                            const std::vector<double>& b) {
    const std::size_t n = f.n;
    std::vector<double> x = lu_solve(f, b);
    for (int pass = 0; pass < 4; ++pass) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            CompensatedSum s;
            s.add(b[i]);
            for (std::size_t j = 0; j < n; ++j) s.add_product(-k[i * n + j], x[j]);
            r[i] = s.value();
        }
        const std::vector<double> dx = lu_solve(f, r);
        double worst = 0;
        double scale = 0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += dx[i];
            worst = std::max(worst, std::abs(dx[i]));
            scale = std::max(scale, std::abs(x[i]));
        }
        if (worst <= scale * 1e-17) break;
    }
    return x;
}

inline double lu_logdet(const Lu& f) {
    double s = 0;
    for (std::size_t i = 0; i < f.n; ++i) s += std::log(f.lu[i * f.n + i]);
    return s;
}

inline double kernel(double x1, double x2, const wifimob::GprHyperparams& hp) {
    const double d = x1 - x2;
    return hp.signal_variance * std::exp(-0.5 * d * d / (hp.length_scale * hp.length_scale));
}

inline std::vector<double> train_matrix(const std::vector<double>& x,
                                        const wifimob::GprHyperparams& hp) {
    const std::size_t n = x.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            k[i * n + j] = kernel(x[i], x[j], hp) + (i == j ? hp.noise_variance : 0.0);
    return k;
}

inline Lu factorize_jittered(const std::vector<double>& k, std::size_t n,
                             std::vector<double>* jittered = nullptr) {
    Lu plain = lu_decompose(k, n);
    if (plain.ok) {
        if (jittered) *jittered = k;
        return plain;
    }
    for (double jitter = 1e-8; jitter <= 1e-2 * (1.0 + 1e-12); jitter *= 10.0) {
        std::vector<double> kj = k;
        for (std::size_t i = 0; i < n; ++i) kj[i * n + i] += jitter;
        Lu f = lu_decompose(kj, n);
        if (f.ok) {
            if (jittered) *jittered = std::move(kj);
            return f;
        }
    }
    return {};
}

inline double lml(const std::vector<double>& x, const std::vector<double>& y,
                  const wifimob::GprHyperparams& hp) {
    const std::size_t n = x.size();
    std::vector<double> kj;
    Lu f = factorize_jittered(train_matrix(x, hp), n, &kj);
    if (!f.ok) return -std::numeric_limits<double>::infinity();
    const std::vector<double> a = lu_refined_solve(kj, f, y);
    const double fit = dot_compensated(y, a);
    constexpr double kLog2Pi = 1.8378770664093454836;
    return -0.5 * fit - 0.5 * lu_logdet(f) - 0.5 * static_cast<double>(n) * kLog2Pi;
}

struct GprOracle {
    wifimob::GprHyperparams hyperparams;
    std::vector<double> x, y;
    Lu factor;
    std::vector<double> matrix;   // the jittered system the factor came from
    std::vector<double> weights;  // (K + sn2 I)^-1 y
    double log_marginal = -std::numeric_limits<double>::infinity();
};

inline GprOracle assemble(const wifimob::GprHyperparams& hp, std::vector<double> x,
                          std::vector<double> y) {
    GprOracle o;
    o.hyperparams = hp;
    o.x = std::move(x);
    o.y = std::move(y);
    o.factor = factorize_jittered(train_matrix(o.x, hp), o.x.size(), &o.matrix);
    if (o.factor.ok) {
        o.weights = lu_refined_solve(o.matrix, o.factor, o.y);
        constexpr double kLog2Pi = 1.8378770664093454836;
        o.log_marginal = -0.5 * dot_compensated(o.y, o.weights) - 0.5 * lu_logdet(o.factor) -
                         0.5 * static_cast<double>(o.x.size()) * kLog2Pi;
    }
    return o;
}

inline std::vector<double> log10_grid(double lo, double hi, int steps) {
    std::vector<double> g;
    const double a = std::log10(lo);
    if (steps == 1) return {a};
    const double b = std::log10(hi);
    for (int k = 0; k < steps; ++k)
        g.push_back(a + static_cast<double>(k) * (b - a) / static_cast<double>(steps - 1));
    return g;
}

// Same frozen search schedule as the library, driven by the LU likelihood.
inline GprOracle fit(const std::vector<double>& x, const std::vector<double>& y,
                     const wifimob::GprSearchConfig& c = {}) {
    const auto gs = log10_grid(c.sf2_lo, c.sf2_hi, c.sf2_steps);
    const auto ge = log10_grid(c.ell_lo, c.ell_hi, c.ell_steps);
    const auto gn = log10_grid(c.sn2_lo, c.sn2_hi, c.sn2_steps);

    auto value = [&](const double p[3]) {
        wifimob::GprHyperparams hp{std::pow(10.0, p[0]), std::pow(10.0, p[1]),
                                   std::pow(10.0, p[2])};
        return lml(x, y, hp);
    };

    double bp[3] = {gs[0], ge[0], gn[0]};
    double best = -std::numeric_limits<double>::infinity();
    for (double a : gs)
        for (double b : ge)
            for (double d : gn) {
                const double cand[3] = {a, b, d};
                const double v = value(cand);
                if (v > best) {
                    best = v;
                    bp[0] = a;
                    bp[1] = b;
                    bp[2] = d;
                }
            }

    double steps[3] = {
        gs.size() > 1 ? (gs[1] - gs[0]) / 2.0 : 0.0,
        ge.size() > 1 ? (ge[1] - ge[0]) / 2.0 : 0.0,
        gn.size() > 1 ? (gn[1] - gn[0]) / 2.0 : 0.0,
    };
    for (int round = 0; round < c.refine_rounds; ++round) {
        bool improved = false;
        for (int i = 0; i < 3; ++i) {
            for (double dir : {+1.0, -1.0}) {
                double cand[3] = {bp[0], bp[1], bp[2]};
                cand[i] += dir * steps[i];
                if (i == 2 && cand[2] < c.log_sn2_floor) cand[2] = c.log_sn2_floor;
                const double v = value(cand);
                if (v > best) {
                    best = v;
                    bp[0] = cand[0];
                    bp[1] = cand[1];
                    bp[2] = cand[2];
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) {
            for (double& s : steps) s /= 2.0;
            if (std::max({steps[0], steps[1], steps[2]}) < c.refine_stop) break;
        }
    }

    return assemble({std::pow(10.0, bp[0]), std::pow(10.0, bp[1]), std::pow(10.0, bp[2])}, x,
                    y);
}

struct PosteriorPoint {
    double mean = 0;
    double variance = 0;
};

inline PosteriorPoint predict(const GprOracle& o, double xq) {
    const std::size_t n = o.x.size();
    std::vector<double> ks(n);
    for (std::size_t i = 0; i < n; ++i) ks[i] = kernel(o.x[i], xq, o.hyperparams);
    PosteriorPoint p;
    p.mean = dot_compensated(ks, o.weights);
    const std::vector<double> kinv_ks = lu_refined_solve(o.matrix, o.factor, ks);
    p.variance = kernel(xq, xq, o.hyperparams) - dot_compensated(ks, kinv_ks);
    return p;
}

// ---------------------------------------------------------------------------
// Exhaustive decision-split oracle: every candidate threshold of every
// feature, entropies recounted from scratch.
// ---------------------------------------------------------------------------

inline double plain_entropy(const std::array<std::size_t, 3>& counts) {
    std::size_t total = counts[0] + counts[1] + counts[2];
    double h = 0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

inline std::optional<wifimob::SplitChoice> exhaustive_best_split(
    const wifimob::Dataset& d, const std::vector<std::size_t>& candidates,
    std::size_t min_leaf) {
    std::optional<wifimob::SplitChoice> best;
    for (std::size_t f : candidates) {
        std::vector<double> values;
        for (const auto& row : d.rows)
            if (row[f]) values.push_back(*row[f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t v = 0; v + 1 < values.size(); ++v) {
            const double thr = (values[v] + values[v + 1]) / 2.0;
            std::array<std::size_t, 3> left{}, right{}, all{};
            for (std::size_t r = 0; r < d.rows.size(); ++r) {
                if (!d.rows[r][f]) continue;
                const int lab = static_cast<int>(d.labels[r]);
                ++all[lab];
                if (*d.rows[r][f] <= thr)
                    ++left[lab];
                else
                    ++right[lab];
            }
            const std::size_t nl = left[0] + left[1] + left[2];
            const std::size_t nr = right[0] + right[1] + right[2];
            if (nl < min_leaf || nr < min_leaf) continue;
            const std::size_t n = nl + nr;
            const double pl = static_cast<double>(nl) / static_cast<double>(n);
            const double pr = static_cast<double>(nr) / static_cast<double>(n);
            const double gain =
                plain_entropy(all) - pl * plain_entropy(left) - pr * plain_entropy(right);
            if (!(gain > 0)) continue;
            const double split_info = -pl * std::log2(pl) - pr * std::log2(pr);
            if (!(split_info > 0)) continue;
            const double ratio = gain / split_info;
            if (!best || ratio > best->gain_ratio) best = wifimob::SplitChoice{f, thr, ratio};
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Direct-formula naive-Bayes oracle.
// ---------------------------------------------------------------------------

struct NbOracle {
    std::vector<wifimob::ActivityLabel> classes;
    std::vector<double> priors;
    std::vector<std::vector<std::optional<double>>> means;      // [class][feature]
    std::vector<std::vector<std::optional<double>>> variances;  // population, floored
};

inline NbOracle nb_fit(const wifimob::Dataset& d) {
    NbOracle o;
    const std::size_t arity = d.feature_names.size();
    for (int c = 0; c < 3; ++c) {
        const auto lab = static_cast<wifimob::ActivityLabel>(c);
        std::size_t count = 0;
        for (auto l : d.labels)
            if (l == lab) ++count;
        if (count == 0) continue;
        o.classes.push_back(lab);
        std::vector<std::optional<double>> mu(arity), var(arity);
        for (std::size_t f = 0; f < arity; ++f) {
            std::vector<double> vals;
            for (std::size_t r = 0; r < d.rows.size(); ++r)
                if (d.labels[r] == lab && d.rows[r][f]) vals.push_back(*d.rows[r][f]);
            if (vals.empty()) continue;
            double m = 0;
            for (double v : vals) m += v;
            m /= static_cast<double>(vals.size());
            double s = 0;
            for (double v : vals) s += (v - m) * (v - m);
            s /= static_cast<double>(vals.size());
            mu[f] = m;
            var[f] = std::max(s, wifimob::kVarianceFloor);
        }
        o.means.push_back(std::move(mu));
        o.variances.push_back(std::move(var));
    }
    for (auto lab : o.classes) {
        std::size_t count = 0;
        for (auto l : d.labels)
            if (l == lab) ++count;
        o.priors.push_back(static_cast<double>(count + 1) /
                           static_cast<double>(d.labels.size() + o.classes.size()));
    }
    return o;
}

inline std::vector<double> nb_log_scores(const NbOracle& o, const wifimob::FeatureRow& row) {
    std::vector<double> scores;
    constexpr double kLog2Pi = 1.8378770664093454836;
    for (std::size_t c = 0; c < o.classes.size(); ++c) {
        double s = std::log(o.priors[c]);
        for (std::size_t f = 0; f < row.size(); ++f) {
            if (!row[f] || !o.means[c][f]) continue;
            const double d = *row[f] - *o.means[c][f];
            const double v = *o.variances[c][f];
            s += -0.5 * (kLog2Pi + std::log(v)) - 0.5 * d * d / v;
        }
        scores.push_back(s);
    }
    return scores;
}

}  // namespace oracle
