// Finite-difference validation harness for the analytic recursion gradient.
// Synthesizes datasets across a grid of sizes and seeds, compares each
// gradient component of log L_n against central differences, and reports
// the largest effective relative error per component.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prtest/gradient.hpp"
#include "prtest/rng.hpp"

namespace prtest {

struct GradCheckConfig {
    std::vector<std::size_t> ns = {10, 50, 200};
    std::vector<std::size_t> grid_sizes = {16, 40};
    int n_seeds = 10;
    std::uint64_t seed = 7;
    double fd_step = 1e-5;
    double tolerance = 1e-4;
    double abs_floor = 1e-8;   // absolute error below this always passes
    bool inject_defect = false;  // flip the tau gradient sign (harness self-test)
};

struct GradCheckReport {
    Vec4 max_rel_err{};  // per eta component, floor-adjusted
    bool pass = true;
    std::string worst_case;
    std::size_t cases = 0;
};

namespace detail {

inline double loglik_at(const std::vector<double>& zs, const Eta& e,
                        const WeightSchedule& sched, std::size_t K) {
    const Theta t = eta_to_theta(e);
    return pr_run(zs, t, sched, init_mixing_state(K, t.pi0)).log_likelihood;
}

}  // namespace detail

inline GradCheckReport run_gradcheck(const GradCheckConfig& gc = {}) {
    GradCheckReport report;
    std::size_t combo = 0;
    for (const std::size_t n : gc.ns) {
        for (const std::size_t K : gc.grid_sizes) {
            for (int s = 0; s < gc.n_seeds; ++s) {
                Xoshiro256 rng(derive_seed(gc.seed, combo, static_cast<std::uint64_t>(s)));
                // Mixed null/signal data so every parameter is informative.
                std::vector<double> zs(n);
                for (auto& z : zs) {
                    const double u = rng.uniform01();
                    if (u < 0.10) z = rng.normal(3.0, 1.2);
                    else if (u < 0.18) z = rng.normal(-2.5, 1.2);
                    else z = rng.normal(0.0, 1.0);
                }
                Eta e;
                e.mu = rng.uniform(-0.3, 0.3);
                e.log_sigma = rng.uniform(-0.2, 0.2);
                e.log_tau_m1 = rng.uniform(-0.7, 0.7);
                const double pi0 = rng.uniform(0.6, 0.95);
                e.logit_pi0 = std::log(pi0 / (1.0 - pi0));

                const WeightSchedule sched = make_weight_schedule(n, 0.67);
                GradState run = pr_run_with_grad(zs, e, sched, make_grad_state(K, e));
                Vec4 analytic = run.grad_loglik;
                if (gc.inject_defect) analytic[2] = -analytic[2];

                for (int c = 0; c < 4; ++c) {
                    Vec4 lo = e.to_array(), hi = e.to_array();
                    lo[c] -= gc.fd_step;
                    hi[c] += gc.fd_step;
                    const double fd = (detail::loglik_at(zs, Eta::from_array(hi), sched, K) -
                                       detail::loglik_at(zs, Eta::from_array(lo), sched, K)) /
                                      (2.0 * gc.fd_step);
                    const double err = std::fabs(analytic[c] - fd);
                    const double scale = std::max(std::fabs(analytic[c]), std::fabs(fd));
                    const double rel = err / std::max(scale, gc.abs_floor / gc.tolerance);
                    if (rel > report.max_rel_err[c]) {
                        report.max_rel_err[c] = rel;
                        if (rel >= gc.tolerance)
                            report.worst_case = "n=" + std::to_string(n) +
                                                " K=" + std::to_string(K) +
                                                " seed=" + std::to_string(s) +
                                                " component=" + std::to_string(c);
                    }
                }
                ++report.cases;
            }
            ++combo;
        }
    }
    for (int c = 0; c < 4; ++c)
        if (!(report.max_rel_err[c] < gc.tolerance)) report.pass = false;
    return report;
}

}  // namespace prtest
