// Permutation-averaged regularized objective and its BFGS maximization.
//
// The recursion likelihood depends on the order the data are visited, so
// the objective averages log L_n over a set of random permutations that is
// drawn once and then frozen for the whole maximization. The average (not
// the sum) is used, which keeps gradient tolerances independent of the
// permutation count. The prior term log g is added once.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "prtest/gradient.hpp"
#include "prtest/parallel.hpp"
#include "prtest/rng.hpp"

namespace prtest {

struct ObjectiveConfig {
    int n_permutations = 10;
    std::uint64_t rng_seed = 1;
    double gamma = 0.67;
    std::size_t grid_size = 200;
    PriorSpec priors{};
    int threads = 1;  // workers for the permutation runs of one evaluation
    std::vector<std::vector<std::uint32_t>> permutations;  // frozen index orders

    void validate(std::size_t n_obs) const {
        if (permutations.size() != static_cast<std::size_t>(n_permutations) ||
            n_permutations < 1)
            throw std::invalid_argument("ObjectiveConfig: permutation list inconsistent");
        for (const auto& p : permutations) {
            if (p.size() != n_obs)
                throw std::invalid_argument("ObjectiveConfig: permutation length mismatch");
            std::vector<bool> seen(n_obs, false);
            for (auto idx : p) {
                if (idx >= n_obs || seen[idx])
                    throw std::invalid_argument("ObjectiveConfig: invalid permutation");
                seen[idx] = true;
            }
        }
    }
};

// Draws the frozen permutation set for a dataset of n observations.
inline ObjectiveConfig make_objective_config(std::size_t n, int n_permutations = 10,
                                             std::uint64_t seed = 1, double gamma = 0.67,
                                             std::size_t grid_size = 200,
                                             PriorSpec priors = {}) {
    if (n_permutations < 1)
        throw std::invalid_argument("make_objective_config: need at least one permutation");
    ObjectiveConfig cfg;
    cfg.n_permutations = n_permutations;
    cfg.rng_seed = seed;
    cfg.gamma = gamma;
    cfg.grid_size = grid_size;
    cfg.priors = priors;
    Xoshiro256 rng(derive_seed(seed, 0xFE));
    cfg.permutations.reserve(static_cast<std::size_t>(n_permutations));
    for (int p = 0; p < n_permutations; ++p) cfg.permutations.push_back(rng.permutation(n));
    return cfg;
}

struct ObjectiveEval {
    double value = 0.0;
    Vec4 grad{};
};

namespace detail {

inline std::vector<double> permute(const std::vector<double>& zs,
                                   const std::vector<std::uint32_t>& perm) {
    std::vector<double> out(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) out[i] = zs[perm[i]];
    return out;
}

}  // namespace detail

// Mean over the frozen permutations of log L_n plus log g. Infinite prior
// (boundary theta) short-circuits to -inf without running the recursion.
// Deterministic: per-permutation results are reduced in permutation order
// regardless of the thread count.
inline ObjectiveEval regularized_objective(const Eta& e, const std::vector<double>& zs,
                                           const ObjectiveConfig& cfg) {
    if (zs.empty()) throw std::invalid_argument("regularized_objective: empty data");
    cfg.validate(zs.size());
    const Theta t = eta_to_theta(e);
    const double lp = log_prior(t, cfg.priors);
    ObjectiveEval out;
    if (!std::isfinite(lp)) {
        out.value = -std::numeric_limits<double>::infinity();
        return out;
    }
    const WeightSchedule sched = make_weight_schedule(zs.size(), cfg.gamma);
    const std::size_t P = cfg.permutations.size();
    std::vector<double> values(P);
    std::vector<Vec4> grads(P);
    parallel_for(P, cfg.threads, [&](std::size_t p) {
        try {
            const auto permuted = detail::permute(zs, cfg.permutations[p]);
            const GradState run =
                pr_run_with_grad(permuted, e, sched, make_grad_state(cfg.grid_size, e));
            values[p] = run.log_lik;
            grads[p] = run.grad_loglik;
        } catch (const std::exception& err) {
            throw std::runtime_error("regularized_objective: permutation " +
                                     std::to_string(p) + " failed: " + err.what());
        }
    });
    double vsum = 0.0;
    Vec4 gsum{};
    for (std::size_t p = 0; p < P; ++p) {
        vsum += values[p];
        gsum += grads[p];
    }
    const double inv_p = 1.0 / static_cast<double>(P);
    out.value = vsum * inv_p + lp;
    out.grad = inv_p * gsum + log_prior_grad_eta(e, cfg.priors);
    return out;
}

// Value-only evaluation (used by line searches; skips all gradient work).
inline double regularized_objective_value(const Eta& e, const std::vector<double>& zs,
                                          const ObjectiveConfig& cfg) {
    if (zs.empty()) throw std::invalid_argument("regularized_objective: empty data");
    cfg.validate(zs.size());
    const Theta t = eta_to_theta(e);
    const double lp = log_prior(t, cfg.priors);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    const WeightSchedule sched = make_weight_schedule(zs.size(), cfg.gamma);
    const std::size_t P = cfg.permutations.size();
    std::vector<double> values(P);
    parallel_for(P, cfg.threads, [&](std::size_t p) {
        try {
            const auto permuted = detail::permute(zs, cfg.permutations[p]);
            values[p] = pr_run(permuted, t, sched,
                               init_mixing_state(cfg.grid_size, t.pi0))
                            .log_likelihood;
        } catch (const std::exception& err) {
            throw std::runtime_error("regularized_objective: permutation " +
                                     std::to_string(p) + " failed: " + err.what());
        }
    });
    double vsum = 0.0;
    for (double v : values) vsum += v;
    return vsum / static_cast<double>(P) + lp;
}

// Moment-based starting point: median for the center, IQR/1.349 for the
// scale (clamped to the typical [0.5, 2.0] range), tau = 2, pi0 = 0.95.
inline Eta default_init(const std::vector<double>& zs, std::string* warning = nullptr) {
    if (zs.size() < 10) throw std::invalid_argument("default_init: need at least 10 values");
    std::vector<double> sorted(zs);
    std::sort(sorted.begin(), sorted.end());
    const double med = quantile_sorted(sorted, 0.5);
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double sigma0;
    if (iqr > 0.0) {
        sigma0 = std::min(2.0, std::max(0.5, iqr / 1.349));
    } else {
        sigma0 = 1.0;
        if (warning) *warning = "default_init: zero IQR, falling back to sigma0 = 1";
    }
    return theta_to_eta(Theta{med, sigma0, 2.0, 0.95});
}

struct BfgsOptions {
    int max_iter = 200;
    double grad_tol = 1e-5;
    double step_tol = 1e-10;
    // Optional sink for (iteration, objective value, gradient norm).
    std::function<void(int, double, double)> trace;
};

struct OptResult {
    Eta eta_hat;
    Theta theta_hat;
    double objective_value = 0.0;
    double gradient_norm_at_opt = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Quasi-Newton ascent with a dense 4x4 inverse-Hessian BFGS update and an
// Armijo backtracking line search (c1 = 1e-4, initial step 1). Trial points
// where the objective is -inf or throws make the search retreat; the update
// is skipped when y's = 0 would break positive definiteness. Returns the
// best iterate seen; accepted iterates have non-decreasing objective.
inline OptResult bfgs_maximize_fn(
    const std::function<ObjectiveEval(const Eta&)>& value_grad,
    const std::function<double(const Eta&)>& value_only, const Eta& e0,
    const BfgsOptions& opts = {}) {
    constexpr double kArmijoC1 = 1e-4;
    constexpr double kMinStep = 1e-14;
    constexpr double kCurvatureFloor = 1e-12;

    auto safe_value = [&](const Eta& e) -> double {
        try {
            const double v = value_only(e);
            return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
        } catch (const std::exception&) {
            return -std::numeric_limits<double>::infinity();
        }
    };

    ObjectiveEval cur = value_grad(e0);
    if (!std::isfinite(cur.value))
        throw std::invalid_argument("bfgs_maximize: objective not finite at start");

    Vec4 x = e0.to_array();
    Mat4 h_inv = identity4();
    OptResult best;
    best.eta_hat = e0;
    best.objective_value = cur.value;
    best.gradient_norm_at_opt = norm(cur.grad);
    if (opts.trace) opts.trace(0, cur.value, norm(cur.grad));

    int it = 0;
    while (it < opts.max_iter) {
        if (norm(cur.grad) < opts.grad_tol) break;
        ++it;

        Vec4 dir = matvec(h_inv, cur.grad);
        double slope = dot(cur.grad, dir);
        if (!(slope > 0.0) || !all_finite(dir)) {  // not an ascent direction: reset
            h_inv = identity4();
            dir = cur.grad;
            slope = dot(cur.grad, cur.grad);
        }

        double alpha = 1.0;
        double trial_value = -std::numeric_limits<double>::infinity();
        Vec4 xt{};
        bool accepted = false;
        while (alpha >= kMinStep) {
            xt = x + alpha * dir;
            trial_value = safe_value(Eta::from_array(xt));
            if (trial_value >= cur.value + kArmijoC1 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;  // line-search failure: keep best iterate

        const ObjectiveEval nxt = value_grad(Eta::from_array(xt));
        const Vec4 s = xt - x;
        const Vec4 y = cur.grad - nxt.grad;  // gradient of -f increases along s
        const double ys = dot(y, s);
        if (ys > kCurvatureFloor) {
            // H <- (I - s y^T / ys) H (I - y s^T / ys) + s s^T / ys
            const Vec4 hy = matvec(h_inv, y);
            const double yhy = dot(y, hy);
            const double rho = 1.0 / ys;
            Mat4 updated = h_inv;
            add_outer(updated, -rho, s, hy);
            add_outer(updated, -rho, hy, s);
            add_outer(updated, rho * rho * yhy + rho, s, s);
            h_inv = updated;
        }

        x = xt;
        cur = nxt;
        if (opts.trace) opts.trace(it, cur.value, norm(cur.grad));
        if (cur.value > best.objective_value) {
            best.eta_hat = Eta::from_array(x);
            best.objective_value = cur.value;
            best.gradient_norm_at_opt = norm(cur.grad);
        }
        if (norm(s) < opts.step_tol) break;
    }

    best.iterations = it;
    best.theta_hat = eta_to_theta(best.eta_hat);
    best.converged = best.gradient_norm_at_opt < opts.grad_tol;
    return best;
}

// BFGS maximization of the permutation-averaged regularized objective.
inline OptResult bfgs_maximize(const std::vector<double>& zs, const ObjectiveConfig& cfg,
                               const Eta& e0, const BfgsOptions& opts = {}) {
    return bfgs_maximize_fn(
        [&](const Eta& e) { return regularized_objective(e, zs, cfg); },
        [&](const Eta& e) { return regularized_objective_value(e, zs, cfg); }, e0, opts);
}

}  // namespace prtest
