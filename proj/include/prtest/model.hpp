// Two-groups mixture model: parameters, unconstrained reparameterization,
// prior regularization, the discretized mixing measure on [-1,1], and the
// recursion weight schedule.
//
// The observation model is
//   f(z) = pi * N(z | mu, sigma^2)
//        + (1 - pi) * integral N(z | mu + tau*sigma*u, sigma^2) psi(u) du,
// with psi a density on [-1,1] and tau > 1, so the non-null component is
// strictly wider than the null. The mixing measure carries an atom at u = 0
// (the null) plus a Lebesgue-continuous part (non-null shifts); the two are
// represented separately and never mixed into one grid.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "prtest/stats.hpp"
#include "prtest/vec4.hpp"

namespace prtest {

inline constexpr double kPi0Clamp = 1e-12;  // keeps logit(pi0) finite both ways

// Non-mixing parameters in natural coordinates.
struct Theta {
    double mu = 0.0;      // empirical-null center (z-score units)
    double sigma = 1.0;   // shared null/kernel scale, > 0
    double tau = 2.0;     // non-null widening factor, > 1
    double pi0 = 0.95;    // prior null proportion in (0,1)

    bool is_valid() const {
        return std::isfinite(mu) && std::isfinite(sigma) && std::isfinite(tau) &&
               std::isfinite(pi0) && sigma > 0.0 && tau > 1.0 && pi0 > 0.0 && pi0 < 1.0;
    }

    void validate() const {
        if (!is_valid())
            throw std::invalid_argument(
                "Theta: require finite values with sigma > 0, tau > 1, 0 < pi0 < 1");
    }
};

// Unconstrained coordinates (mu, log sigma, log(tau-1), logit pi0).
struct Eta {
    double mu = 0.0;
    double log_sigma = 0.0;
    double log_tau_m1 = 0.0;
    double logit_pi0 = 0.0;

    Vec4 to_array() const { return {mu, log_sigma, log_tau_m1, logit_pi0}; }

    static Eta from_array(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

    bool is_finite() const {
        return std::isfinite(mu) && std::isfinite(log_sigma) &&
               std::isfinite(log_tau_m1) && std::isfinite(logit_pi0);
    }
};

inline Eta theta_to_eta(const Theta& t) {
    t.validate();
    return {t.mu, std::log(t.sigma), std::log(t.tau - 1.0),
            std::log(t.pi0 / (1.0 - t.pi0))};
}

// Maps any finite eta to a valid Theta. pi0 is clamped away from {0,1} so
// the sigmoid stays invertible in double precision.
inline Theta eta_to_theta(const Eta& e) {
    if (!e.is_finite()) throw std::invalid_argument("eta_to_theta: non-finite input");
    Theta t;
    t.mu = e.mu;
    t.sigma = std::exp(e.log_sigma);
    t.tau = 1.0 + std::exp(e.log_tau_m1);
    const double p = 1.0 / (1.0 + std::exp(-e.logit_pi0));
    t.pi0 = std::min(1.0 - kPi0Clamp, std::max(kPi0Clamp, p));
    return t;
}

// d(theta)/d(eta), the diagonal chain-rule factors at a given theta.
inline Vec4 eta_jacobian(const Theta& t) {
    return {1.0, t.sigma, t.tau - 1.0, t.pi0 * (1.0 - t.pi0)};
}

// Regularization hyperparameters:
//   mu | sigma ~ N(0, sigma^2 / mu_precision_scale)
//   log(sigma) ~ N(0, sd_log_sigma^2)
//   log(tau-1) ~ N(0, sd_log_taum1^2)
//   pi0        ~ Beta(beta_a, beta_b)
struct PriorSpec {
    double sd_log_sigma = 0.25;
    double sd_log_taum1 = 1.0;
    double beta_a = 22.7;
    double beta_b = 1.0;
    double mu_precision_scale = 400.0;

    bool is_valid() const {
        return sd_log_sigma > 0 && sd_log_taum1 > 0 && beta_a > 0 && beta_b > 0 &&
               mu_precision_scale > 0;
    }

    void validate() const {
        if (!is_valid()) throw std::invalid_argument("PriorSpec: all fields must be > 0");
    }
};

// Log prior density in theta coordinates (sigma and tau-1 are log-normal,
// so their 1/x Jacobian terms are included). Boundary or invalid parameter
// values return -inf rather than throwing, so optimizer line searches can
// retreat from bad trial points.
inline double log_prior(const Theta& t, const PriorSpec& p = {}) {
    p.validate();
    if (!t.is_valid()) return -std::numeric_limits<double>::infinity();
    const double log_sigma = std::log(t.sigma);
    const double log_taum1 = std::log(t.tau - 1.0);

    // mu | sigma ~ N(0, sigma^2/ps): sd = sigma/sqrt(ps)
    double lp = kLogInvSqrt2Pi - log_sigma + 0.5 * std::log(p.mu_precision_scale) -
                0.5 * p.mu_precision_scale * t.mu * t.mu / (t.sigma * t.sigma);
    // sigma ~ LogNormal(0, sd_log_sigma^2)
    lp += kLogInvSqrt2Pi - std::log(p.sd_log_sigma) - log_sigma -
          0.5 * log_sigma * log_sigma / (p.sd_log_sigma * p.sd_log_sigma);
    // tau - 1 ~ LogNormal(0, sd_log_taum1^2)
    lp += kLogInvSqrt2Pi - std::log(p.sd_log_taum1) - log_taum1 -
          0.5 * log_taum1 * log_taum1 / (p.sd_log_taum1 * p.sd_log_taum1);
    // pi0 ~ Beta(a, b); the (a-1)/(b-1) terms are skipped when the exponent
    // is zero so that a boundary-approaching pi0 cannot produce 0 * inf.
    lp += std::lgamma(p.beta_a + p.beta_b) - std::lgamma(p.beta_a) - std::lgamma(p.beta_b);
    if (p.beta_a != 1.0) lp += (p.beta_a - 1.0) * std::log(t.pi0);
    if (p.beta_b != 1.0) lp += (p.beta_b - 1.0) * std::log(1.0 - t.pi0);
    return lp;
}

// Gradient of log_prior with respect to eta (chain-rule pushforward).
inline Vec4 log_prior_grad_eta(const Eta& e, const PriorSpec& p = {}) {
    p.validate();
    if (!e.is_finite()) throw std::invalid_argument("log_prior_grad_eta: non-finite input");
    const Theta t = eta_to_theta(e);
    const double sig2 = t.sigma * t.sigma;
    Vec4 g{};
    g[0] = -p.mu_precision_scale * t.mu / sig2;
    g[1] = (p.mu_precision_scale * t.mu * t.mu / sig2 - 1.0) +
           (-1.0 - e.log_sigma / (p.sd_log_sigma * p.sd_log_sigma));
    g[2] = -1.0 - e.log_tau_m1 / (p.sd_log_taum1 * p.sd_log_taum1);
    g[3] = (p.beta_a - 1.0) * (1.0 - t.pi0) - (p.beta_b - 1.0) * t.pi0;
    return g;
}

// Discretized mixing measure: an atom of mass pi at u = 0 plus a density
// psi on a fixed quadrature grid over [-1,1].
struct MixingState {
    double pi = 1.0;                   // mass at the atom u = 0
    std::vector<double> grid;          // K nodes in [-1,1], increasing
    std::vector<double> quad_weights;  // K positive weights summing to 2
    std::vector<double> psi;           // density values at the nodes, >= 0

    std::size_t size() const { return grid.size(); }

    // Integral of psi over [-1,1] under the grid quadrature.
    double psi_mass() const {
        double s = 0.0;
        for (std::size_t k = 0; k < psi.size(); ++k) s += psi[k] * quad_weights[k];
        return s;
    }

    // Total mass of the nu-density pi<0> + (1-pi) psi; 1 when valid.
    double total_mass() const { return pi + (1.0 - pi) * psi_mass(); }

    bool is_valid() const {
        if (grid.size() < 2 || grid.size() != quad_weights.size() ||
            grid.size() != psi.size())
            return false;
        if (!(pi >= 0.0 && pi <= 1.0)) return false;
        for (double v : psi)
            if (!(v >= 0.0)) return false;
        return std::fabs(psi_mass() - 1.0) < 1e-10;
    }
};

// Midpoint grid with the default shift density psi0(u) = (3/2) u^2,
// renormalized on the grid so the discrete unit-mass invariant is exact.
inline MixingState init_mixing_state(std::size_t K, double pi0) {
    if (K < 2) throw std::invalid_argument("init_mixing_state: K must be >= 2");
    if (!(pi0 > 0.0 && pi0 < 1.0))
        throw std::invalid_argument("init_mixing_state: pi0 must be in (0,1)");
    MixingState s;
    s.pi = pi0;
    s.grid.resize(K);
    s.quad_weights.assign(K, 2.0 / static_cast<double>(K));
    s.psi.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        const double u = -1.0 + (2.0 * static_cast<double>(k) + 1.0) / static_cast<double>(K);
        s.grid[k] = u;
        s.psi[k] = 1.5 * u * u;
    }
    const double mass = s.psi_mass();
    for (double& v : s.psi) v /= mass;
    return s;
}

// Decaying recursion weights w_i = (i+1)^(-gamma), i = 1..n.
struct WeightSchedule {
    std::size_t n = 0;
    double gamma = 0.67;
    std::vector<double> values;  // values[i-1] = w_i
};

// gamma is restricted to (2/3, 1], the range with a convergence-rate
// guarantee; allow_any_gamma relaxes the check to (0, 1].
inline WeightSchedule make_weight_schedule(std::size_t n, double gamma,
                                           bool allow_any_gamma = false) {
    if (n < 1) throw std::invalid_argument("make_weight_schedule: n must be >= 1");
    const double lo = allow_any_gamma ? 0.0 : 2.0 / 3.0;
    if (!(gamma > lo && gamma <= 1.0))
        throw std::invalid_argument(
            "make_weight_schedule: gamma must be in (" +
            std::string(allow_any_gamma ? "0" : "2/3") + ", 1]");
    WeightSchedule w;
    w.n = n;
    w.gamma = gamma;
    w.values.resize(n);
    for (std::size_t i = 1; i <= n; ++i)
        w.values[i - 1] = std::pow(static_cast<double>(i) + 1.0, -gamma);
    return w;
}

}  // namespace prtest
