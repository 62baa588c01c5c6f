// End-to-end fit, fitted-density evaluators, local false discovery rates,
// and the thresholding decision rule.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prtest/objective.hpp"

namespace prtest {

struct FdrValue {
    double value = 1.0;
    bool extrapolated = false;  // set when f(z) underflowed and 1 was returned
};

// Fitted model. The mixing state is the average of the final recursion
// states across the frozen permutations, and pi_hat is its atom mass (the
// null proportion of the fitted two-groups mixture).
struct FitResult {
    Theta theta_hat;
    MixingState final_mixing;
    double pi_hat = 1.0;
    OptResult opt;
    std::string warning;  // empty when nothing noteworthy happened

    // Null density N(z | mu_hat, sigma_hat^2).
    double f0(double z) const { return normal_pdf(z, theta_hat.mu, theta_hat.sigma); }

    // Non-null density: the kernel mixed over the fitted shift density.
    double f1(double z) const {
        double acc = 0.0;
        for (std::size_t k = 0; k < final_mixing.size(); ++k)
            acc += kernel_eval(z, theta_hat, final_mixing.grid[k]) *
                   final_mixing.psi[k] * final_mixing.quad_weights[k];
        return acc;
    }

    double f(double z) const { return pi_hat * f0(z) + (1.0 - pi_hat) * f1(z); }

    // fdr(z) = pi_hat f0(z) / f(z), clamped to [0,1]. Underflowing f(z) far
    // outside the data range returns the conservative value 1 and flags the
    // evaluation as extrapolated.
    FdrValue fdr_checked(double z) const {
        const double denom = f(z);
        if (!(denom > kDensityFloor)) return {1.0, true};
        const double raw = pi_hat * f0(z) / denom;
        return {std::min(1.0, std::max(0.0, raw)), false};
    }

    double fdr(double z) const { return fdr_checked(z).value; }
};

struct FitOptions {
    BfgsOptions bfgs{};
};

// Full pipeline: moment-based start, BFGS maximization, then one final
// recursion pass per frozen permutation at theta_hat with the resulting
// nu-densities averaged (pi and psi pointwise). Non-convergence is carried
// as a warning, not a failure.
inline FitResult fit(const std::vector<double>& zs, const ObjectiveConfig& cfg,
                     const FitOptions& opts = {}) {
    if (zs.size() < 10) throw std::invalid_argument("fit: need at least 10 observations");
    cfg.validate(zs.size());

    FitResult result;
    std::string init_warning;
    const Eta e0 = default_init(zs, &init_warning);
    result.opt = bfgs_maximize(zs, cfg, e0, opts.bfgs);
    result.theta_hat = result.opt.theta_hat;
    if (!init_warning.empty()) result.warning = init_warning;
    if (!result.opt.converged) {
        if (!result.warning.empty()) result.warning += "; ";
        result.warning += "optimizer stopped before reaching gradient tolerance (|grad|=" +
                          std::to_string(result.opt.gradient_norm_at_opt) + ")";
    }

    const WeightSchedule sched = make_weight_schedule(zs.size(), cfg.gamma);
    const std::size_t P = cfg.permutations.size();
    std::vector<MixingState> finals(P);
    parallel_for(P, cfg.threads, [&](std::size_t p) {
        const auto permuted = detail::permute(zs, cfg.permutations[p]);
        finals[p] = pr_run(permuted, result.theta_hat, sched,
                           init_mixing_state(cfg.grid_size, result.theta_hat.pi0))
                        .final_state;
    });
    MixingState avg = finals[0];
    for (std::size_t p = 1; p < P; ++p) {
        avg.pi += finals[p].pi;
        for (std::size_t k = 0; k < avg.psi.size(); ++k) avg.psi[k] += finals[p].psi[k];
    }
    const double inv_p = 1.0 / static_cast<double>(P);
    avg.pi *= inv_p;
    for (double& v : avg.psi) v *= inv_p;
    result.final_mixing = std::move(avg);
    result.pi_hat = result.final_mixing.pi;
    return result;
}

// Per-case decisions from thresholding the fitted fdr at r.
struct TestDecision {
    std::vector<std::uint8_t> flags;  // 1 = declared non-null
    std::vector<double> fdr_values;
    std::size_t n_left = 0;   // flagged cases with z < mu_hat
    std::size_t n_right = 0;  // flagged cases with z >= mu_hat
    double threshold = 0.1;
};

inline TestDecision classify(const FitResult& fit_result, const std::vector<double>& zs,
                             double r = 0.1) {
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("classify: r must be in (0,1)");
    TestDecision d;
    d.threshold = r;
    d.flags.resize(zs.size());
    d.fdr_values.resize(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
        d.fdr_values[i] = fit_result.fdr(zs[i]);
        d.flags[i] = d.fdr_values[i] < r ? 1 : 0;
        if (d.flags[i]) {
            if (zs[i] < fit_result.theta_hat.mu)
                ++d.n_left;
            else
                ++d.n_right;
        }
    }
    return d;
}

struct CurveRow {
    double z;
    double f0;
    double pi_f0;
    double one_minus_pi_f1;
    double f;
    double fdr;
};

// Fitted-curve table on an even grid, for external plotting. f is the sum
// of the two component columns, so the mixture identity holds rowwise.
inline std::vector<CurveRow> export_fit_curves(const FitResult& fit_result, double z_lo,
                                               double z_hi, std::size_t n_points) {
    if (!(std::isfinite(z_lo) && std::isfinite(z_hi) && z_lo < z_hi))
        throw std::invalid_argument("export_fit_curves: need finite z_lo < z_hi");
    if (n_points < 2) throw std::invalid_argument("export_fit_curves: need >= 2 points");
    std::vector<CurveRow> rows;
    rows.reserve(n_points);
    const double step = (z_hi - z_lo) / static_cast<double>(n_points - 1);
    for (std::size_t j = 0; j < n_points; ++j) {
        CurveRow row;
        row.z = z_lo + static_cast<double>(j) * step;
        row.f0 = fit_result.f0(row.z);
        row.pi_f0 = fit_result.pi_hat * row.f0;
        row.one_minus_pi_f1 = (1.0 - fit_result.pi_hat) * fit_result.f1(row.z);
        row.f = row.pi_f0 + row.one_minus_pi_f1;
        row.fdr = row.f > kDensityFloor ? std::min(1.0, std::max(0.0, row.pi_f0 / row.f)) : 1.0;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace prtest
