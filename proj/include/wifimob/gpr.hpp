#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "wifimob/errors.hpp"
#include "wifimob/features.hpp"

namespace wifimob {

// Stage-one regression: Gaussian process from stability coefficient to
// moving speed, used to fill windows whose GPS speed is missing. Squared
// exponential kernel with additive observation noise, zero prior mean.
// Hyperparameters come from a deterministic log-grid search plus
// coordinate-wise refinement so a fit is reproducible bit for bit.

struct GprHyperparams {
    double signal_variance = 1.0;  // (m/s)^2
    double length_scale = 1.0;     // stability units
    double noise_variance = 1e-4;  // (m/s)^2

    bool operator==(const GprHyperparams&) const = default;
};

struct GprSearchConfig {
    double sf2_lo = 0.01, sf2_hi = 100.0;
    int sf2_steps = 9;
    double ell_lo = 0.01, ell_hi = 3.0;
    int ell_steps = 9;
    double sn2_lo = 1e-4, sn2_hi = 1.0;
    int sn2_steps = 7;
    int refine_rounds = 40;
    double refine_stop = 1e-3;      // stop once every step is below this
    double log_sn2_floor = -8.0;    // refinement never pushes log10(sn2) lower
};

/// Fitted model plus the solve state needed for prediction: the factored
/// train matrix K + sn2 I (plus any jitter that was needed), its lower
/// Cholesky factor L (row-major), and the weight vector alpha = K^-1 y.
struct GprModel {
    GprHyperparams hyperparams;
    std::vector<double> train_x;
    std::vector<double> train_y;
    std::vector<double> system;
    std::vector<double> chol_lower;
    std::vector<double> alpha;
    double log_marginal_likelihood = -std::numeric_limits<double>::infinity();
};

struct GprPrediction {
    double mean = 0;
    double variance = 0;
    bool extrapolated = false;  // query fell outside the [0, 1] training domain
};

/// Squared-exponential covariance. The noise term is not included here; it
/// is added on the training matrix diagonal only.
inline double gpr_kernel(double x1, double x2, const GprHyperparams& hp) {
    const double d = x1 - x2;
    return hp.signal_variance * std::exp(-(d * d) / (2.0 * hp.length_scale * hp.length_scale));
}

namespace detail {

/// In-place lower Cholesky of a row-major symmetric matrix; the upper
/// triangle is zeroed. Returns false when the matrix is not positive
/// definite.
inline bool cholesky_in_place(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (!(sum > 0) || !std::isfinite(sum)) return false;
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
        for (std::size_t j = i + 1; j < n; ++j) a[i * n + j] = 0.0;
    }
    return true;
}

inline void solve_lower(const std::vector<double>& l, std::size_t n, std::vector<double>& b) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * b[k];
        b[i] = s / l[i * n + i];
    }
}

inline void solve_lower_transpose(const std::vector<double>& l, std::size_t n,
                                  std::vector<double>& b) {
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l[k * n + ii] * b[k];
        b[ii] = s / l[ii * n + ii];
    }
}

/// Neumaier-compensated accumulator with fma-recovered product errors;
/// keeps dot products and residuals accurate to about one ulp even when
/// the terms cancel heavily.
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

/// Solves K x = b through the Cholesky factor, then drives the forward
/// error down with iterative refinement against a compensated residual.
/// A bare triangular solve is backward stable but its forward error grows
/// with the condition number, which the noise floor lets reach ~1e7 here;
/// refinement makes the solution accurate in absolute terms as well.
inline std::vector<double> solve_spd(const std::vector<double>& k, const std::vector<double>& l,
                                     std::size_t n, std::vector<double> b) {
    std::vector<double> x = b;
    solve_lower(l, n, x);
    solve_lower_transpose(l, n, x);
    for (int pass = 0; pass < 4; ++pass) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            CompensatedSum s;
            s.add(b[i]);
            for (std::size_t j = 0; j < n; ++j) s.add_product(-k[i * n + j], x[j]);
            r[i] = s.value();
        }
        solve_lower(l, n, r);
        solve_lower_transpose(l, n, r);
        double worst = 0;
        double scale = 0;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += r[i];
            worst = std::max(worst, std::abs(r[i]));
            scale = std::max(scale, std::abs(x[i]));
        }
        if (worst <= scale * 1e-17) break;
    }
    return x;
}

inline std::vector<double> build_train_matrix(const std::vector<double>& x,
                                              const GprHyperparams& hp) {
    const std::size_t n = x.size();
    std::vector<double> k(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) k[i * n + j] = gpr_kernel(x[i], x[j], hp);
        k[i * n + i] += hp.noise_variance;
    }
    return k;
}

/// Cholesky with jitter escalation: on failure, retry with 1e-8 added to
/// the diagonal, stepping x10 up to 1e-2 before giving up. `system` receives
/// the matrix that was actually factored (jitter included).
inline bool factorize_with_jitter(const std::vector<double>& k, std::size_t n,
                                  std::vector<double>& lower,
                                  std::vector<double>* system = nullptr) {
    lower = k;
    if (cholesky_in_place(lower, n)) {
        if (system) *system = k;
        return true;
    }
    for (double jitter = 1e-8; jitter <= 1e-2 * (1.0 + 1e-12); jitter *= 10.0) {
        std::vector<double> kj = k;
        for (std::size_t i = 0; i < n; ++i) kj[i * n + i] += jitter;
        lower = kj;
        if (cholesky_in_place(lower, n)) {
            if (system) *system = std::move(kj);
            return true;
        }
    }
    return false;
}

/// Log marginal likelihood for one hyperparameter candidate, or -inf when
/// factorization fails even with jitter.
inline double gpr_lml(const std::vector<double>& x, const std::vector<double>& y,
                      const GprHyperparams& hp) {
    const std::size_t n = x.size();
    std::vector<double> lower;
    std::vector<double> kj;
    if (!factorize_with_jitter(build_train_matrix(x, hp), n, lower, &kj))
        return -std::numeric_limits<double>::infinity();
    const std::vector<double> a = solve_spd(kj, lower, n, y);
    const double fit_term = dot_compensated(y, a);
    double log_det_half = 0;
    for (std::size_t i = 0; i < n; ++i) log_det_half += std::log(lower[i * n + i]);
    constexpr double kLog2Pi = 1.8378770664093454836;
    return -0.5 * fit_term - log_det_half - 0.5 * static_cast<double>(n) * kLog2Pi;
}

inline std::vector<double> log_grid(double lo, double hi, int steps) {
    std::vector<double> g;
    const double a = std::log10(lo);
    if (steps == 1) return {a};
    const double b = std::log10(hi);
    for (int k = 0; k < steps; ++k)
        g.push_back(a + static_cast<double>(k) * (b - a) / static_cast<double>(steps - 1));
    return g;
}

}  // namespace detail

/// Builds the solve state for fixed hyperparameters (no search). Used by
/// fit and by model loading.
inline GprModel assemble_gpr(const GprHyperparams& hp, std::vector<double> train_x,
                             std::vector<double> train_y) {
    if (train_x.size() != train_y.size())
        throw DataError("regression training arrays differ in length");
    if (train_x.empty()) throw DataError("regression training set is empty");
    if (!(hp.signal_variance > 0) || !std::isfinite(hp.signal_variance) ||
        !(hp.length_scale > 0) || !std::isfinite(hp.length_scale) ||
        !(hp.noise_variance > 0) || !std::isfinite(hp.noise_variance))
        throw ConfigError("regression hyperparameters must be finite and > 0");

    GprModel m;
    m.hyperparams = hp;
    m.train_x = std::move(train_x);
    m.train_y = std::move(train_y);
    const std::size_t n = m.train_x.size();
    if (!detail::factorize_with_jitter(detail::build_train_matrix(m.train_x, hp), n,
                                       m.chol_lower, &m.system))
        throw NumericalError("kernel matrix not positive definite even with jitter");
    m.alpha = detail::solve_spd(m.system, m.chol_lower, n, m.train_y);
    m.log_marginal_likelihood = detail::gpr_lml(m.train_x, m.train_y, hp);
    return m;
}

/// Largest |K alpha - y| over the training set; near zero for a healthy
/// factorization.
inline double gpr_residual(const GprModel& m) {
    const std::size_t n = m.train_x.size();
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0;
        for (std::size_t j = 0; j < n; ++j)
            row += (gpr_kernel(m.train_x[i], m.train_x[j], m.hyperparams) +
                    (i == j ? m.hyperparams.noise_variance : 0.0)) *
                   m.alpha[j];
        worst = std::max(worst, std::abs(row - m.train_y[i]));
    }
    return worst;
}

/// Fits hyperparameters by maximizing log marginal likelihood over a
/// deterministic log10 grid (signal variance outermost, noise innermost,
/// strict improvement keeps the earliest candidate), then refines
/// coordinate-wise: starting at half the grid spacing, each round tries
/// +step then -step per coordinate, keeps strict improvements, halves all
/// steps after a round with no improvement, and stops once every step is
/// below refine_stop or the round budget is spent.
inline GprModel fit_gpr(const std::vector<double>& train_x, const std::vector<double>& train_y,
                        const GprSearchConfig& config = {}) {
    if (train_x.size() != train_y.size())
        throw DataError("regression training arrays differ in length");
    if (train_x.size() < 2) throw DataError("regression needs at least 2 training points");
    for (double x : train_x)
        if (!std::isfinite(x) || x < 0.0 || x > 1.0)
            throw DataError("regression inputs must lie in [0, 1]");
    for (double y : train_y)
        if (!std::isfinite(y) || y < 0.0)
            throw DataError("regression targets must be finite and >= 0");
    if (!(config.sf2_lo > 0) || !(config.ell_lo > 0) || !(config.sn2_lo > 0) ||
        config.sf2_hi < config.sf2_lo || config.ell_hi < config.ell_lo ||
        config.sn2_hi < config.sn2_lo || config.sf2_steps < 1 || config.ell_steps < 1 ||
        config.sn2_steps < 1)
        throw ConfigError("regression search grid is malformed");

    const auto sf2_grid = detail::log_grid(config.sf2_lo, config.sf2_hi, config.sf2_steps);
    const auto ell_grid = detail::log_grid(config.ell_lo, config.ell_hi, config.ell_steps);
    const auto sn2_grid = detail::log_grid(config.sn2_lo, config.sn2_hi, config.sn2_steps);

    auto eval = [&](const double p[3]) {
        GprHyperparams hp{std::pow(10.0, p[0]), std::pow(10.0, p[1]), std::pow(10.0, p[2])};
        return detail::gpr_lml(train_x, train_y, hp);
    };

    double best_p[3] = {sf2_grid[0], ell_grid[0], sn2_grid[0]};
    double best = -std::numeric_limits<double>::infinity();
    for (double ls : sf2_grid) {
        for (double le : ell_grid) {
            for (double ln : sn2_grid) {
                const double cand[3] = {ls, le, ln};
                const double v = eval(cand);
                if (v > best) {
                    best = v;
                    best_p[0] = ls;
                    best_p[1] = le;
                    best_p[2] = ln;
                }
            }
        }
    }
    if (best == -std::numeric_limits<double>::infinity())
        throw NumericalError("no hyperparameter candidate factorized");

    double steps[3] = {
        sf2_grid.size() > 1 ? (sf2_grid[1] - sf2_grid[0]) / 2.0 : 0.0,
        ell_grid.size() > 1 ? (ell_grid[1] - ell_grid[0]) / 2.0 : 0.0,
        sn2_grid.size() > 1 ? (sn2_grid[1] - sn2_grid[0]) / 2.0 : 0.0,
    };
    for (int round = 0; round < config.refine_rounds; ++round) {
        bool improved = false;
        for (int i = 0; i < 3; ++i) {
            for (double dir : {+1.0, -1.0}) {
                double cand[3] = {best_p[0], best_p[1], best_p[2]};
                cand[i] += dir * steps[i];
                if (i == 2 && cand[2] < config.log_sn2_floor) cand[2] = config.log_sn2_floor;
                const double v = eval(cand);
                if (v > best) {
                    best = v;
                    best_p[0] = cand[0];
                    best_p[1] = cand[1];
                    best_p[2] = cand[2];
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) {
            for (double& s : steps) s /= 2.0;
            if (std::max({steps[0], steps[1], steps[2]}) < config.refine_stop) break;
        }
    }

    GprHyperparams hp{std::pow(10.0, best_p[0]), std::pow(10.0, best_p[1]),
                      std::pow(10.0, best_p[2])};
    return assemble_gpr(hp, train_x, train_y);
}

/// Posterior mean and variance at one query point. Variance is clamped at
/// 0; a pre-clamp value below -1e-8 indicates a broken factorization and
/// raises NumericalError.
inline GprPrediction predict_gpr(const GprModel& m, double x) {
    if (!std::isfinite(x)) throw ConfigError("regression query must be finite");
    const std::size_t n = m.train_x.size();
    std::vector<double> ks(n);
    for (std::size_t i = 0; i < n; ++i) ks[i] = gpr_kernel(m.train_x[i], x, m.hyperparams);

    GprPrediction p;
    p.mean = detail::dot_compensated(ks, m.alpha);

    const std::vector<double> v = detail::solve_spd(m.system, m.chol_lower, n, ks);
    const double reduction = detail::dot_compensated(ks, v);
    double var = gpr_kernel(x, x, m.hyperparams) - reduction;
    if (var < -1e-8)
        throw NumericalError("posterior variance " + fmt_double(var) + " below tolerance");
    p.variance = std::max(0.0, var);
    p.extrapolated = x < 0.0 || x > 1.0;
    return p;
}

/// Fills missing window speeds from stability: a record without an observed
/// speed whose stability_mean is defined gets max(0, posterior mean) with
/// provenance imputed. Observed speeds pass through untouched; records with
/// undefined stability stay absent. Already-imputed values are recomputed
/// so the output depends only on the model and the observed data.
inline std::vector<FeatureRecord> impute_speeds(std::vector<FeatureRecord> records,
                                                const GprModel& model) {
    for (auto& r : records) {
        if (r.speed_provenance == SpeedProvenance::observed) continue;
        if (!r.stability_mean) {
            r.speed.reset();
            r.speed_provenance = SpeedProvenance::absent;
            continue;
        }
        r.speed = std::max(0.0, predict_gpr(model, *r.stability_mean).mean);
        r.speed_provenance = SpeedProvenance::imputed;
    }
    return records;
}

}  // namespace wifimob
