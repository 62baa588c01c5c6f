// Predictive recursion over the atom-plus-density mixing measure, and the
// running marginal likelihood L_n = prod_i f_{i-1}(Z_i).
//
// Each step blends the current measure with its data-reweighted version:
//   Psi_i = (1 - w_i) Psi_{i-1} + w_i * p(Z_i | theta, u) Psi_{i-1} / f_{i-1}(Z_i).
// On the (pi, psi) split this factorizes into
//   pi_i     = A0 * pi_{i-1},            A0    = 1 + w (G0/f - 1)
//   psi_i(u) = B * A1(u) * psi_{i-1}(u), A1(u) = 1 + w (G1(u)/f - 1)
//   B        = (1 - pi_{i-1}) / (1 - A0 pi_{i-1})
// where G0/G1 are the kernel densities at the atom and at u. B restores
// unit mass of psi exactly, so no explicit renormalization pass is needed.
//
// Densities are evaluated in linear space as exp(log-density) and floored
// at 1e-300 before logs; a step whose predictive density hits the floor
// raises UnderflowError instead of propagating NaNs.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "prtest/model.hpp"

namespace prtest {

inline constexpr double kDensityFloor = 1e-300;

struct UnderflowError : std::runtime_error {
    UnderflowError(const std::string& msg, double z_value, std::size_t obs_index = 0)
        : std::runtime_error(msg), z(z_value), index(obs_index) {}
    double z;           // offending observation
    std::size_t index;  // 1-based observation index, 0 if not in a run
};

// Mixture kernel N(z | mu + tau*sigma*u, sigma^2). The shift u is on the
// standardized scale, so u = 0 gives the null density N(z | mu, sigma^2).
inline double kernel_eval(double z, const Theta& t, double u) {
    const double z1 = (z - t.mu) / t.sigma - t.tau * u;
    return std::exp(kLogInvSqrt2Pi - std::log(t.sigma) - 0.5 * z1 * z1);
}

namespace detail {

// Predictive density and kernel values at every grid node; g1 must have
// state size. Returns the unfloored mixture density.
inline double predictive_density_raw(double z, const Theta& t, const MixingState& s,
                                     std::vector<double>& g1) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        g1[k] = kernel_eval(z, t, s.grid[k]);
        acc += g1[k] * s.psi[k] * s.quad_weights[k];
    }
    return s.pi * kernel_eval(z, t, 0.0) + (1.0 - s.pi) * acc;
}

// Applies one recursion update in place given precomputed kernel values.
inline void apply_update(MixingState& s, double f, double w, double g0,
                         const std::vector<double>& g1) {
    const double a0 = 1.0 + w * (g0 / f - 1.0);
    const double pi_prev = s.pi;
    s.pi = std::min(1.0, a0 * pi_prev);
    const double denom = 1.0 - a0 * pi_prev;
    if (pi_prev >= 1.0 || denom <= 0.0) return;  // continuous part carries no mass
    const double b = (1.0 - pi_prev) / denom;
    for (std::size_t k = 0; k < s.psi.size(); ++k) {
        const double a1 = 1.0 + w * (g1[k] / f - 1.0);
        s.psi[k] = b * a1 * s.psi[k];
    }
}

}  // namespace detail

// Predictive mixture density f(z) = pi G0 + (1-pi) sum_k G1(u_k) psi_k q_k,
// floored so a subsequent log is finite.
inline double mixture_density(double z, const Theta& t, const MixingState& s) {
    std::vector<double> g1(s.size());
    const double f = detail::predictive_density_raw(z, t, s, g1);
    return std::max(f, kDensityFloor);
}

// One recursion update. Returns the updated state and the predictive
// density of z under the input state.
inline std::pair<MixingState, double> pr_step(const MixingState& s, double z, double w,
                                              const Theta& t) {
    if (!(w >= 0.0 && w < 1.0)) throw std::invalid_argument("pr_step: require 0 <= w < 1");
    t.validate();
    MixingState out = s;
    std::vector<double> g1(s.size());
    const double f = detail::predictive_density_raw(z, t, out, g1);
    if (!(f > kDensityFloor))
        throw UnderflowError("pr_step: predictive density underflow at z=" +
                                 std::to_string(z) + " (mu=" + std::to_string(t.mu) +
                                 ", sigma=" + std::to_string(t.sigma) +
                                 ", tau=" + std::to_string(t.tau) + ")",
                             z);
    detail::apply_update(out, f, w, kernel_eval(z, t, 0.0), g1);
    return {std::move(out), f};
}

struct PRTrace {
    MixingState final_state;
    double log_likelihood = 0.0;
    std::vector<double> per_obs_density;  // empty unless requested
};

// Runs the recursion over zs in the given order. per_obs_density retention
// is off by default to keep memory O(K) for very long sequences.
inline PRTrace pr_run(const std::vector<double>& zs, const Theta& t,
                      const WeightSchedule& sched, const MixingState& init,
                      bool keep_per_obs = false) {
    if (zs.size() != sched.n)
        throw std::invalid_argument("pr_run: data length must match schedule length");
    t.validate();
    PRTrace trace;
    trace.final_state = init;
    if (keep_per_obs) trace.per_obs_density.reserve(zs.size());
    std::vector<double> g1(init.size());
    for (std::size_t i = 0; i < zs.size(); ++i) {
        const double w = sched.values[i];
        const double f =
            detail::predictive_density_raw(zs[i], t, trace.final_state, g1);
        if (!(f > kDensityFloor))
            throw UnderflowError(
                "pr_run: predictive density underflow at observation " +
                    std::to_string(i + 1) + " (z=" + std::to_string(zs[i]) +
                    ", mu=" + std::to_string(t.mu) + ", sigma=" + std::to_string(t.sigma) +
                    ", tau=" + std::to_string(t.tau) + ")",
                zs[i], i + 1);
        detail::apply_update(trace.final_state, f, w, kernel_eval(zs[i], t, 0.0), g1);
        trace.log_likelihood += std::log(f);
        if (keep_per_obs) trace.per_obs_density.push_back(f);
    }
    return trace;
}

}  // namespace prtest
