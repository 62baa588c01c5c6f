// Gradient-augmented predictive recursion: one sequential pass produces
// log L_n together with its gradient in the unconstrained coordinates
// eta = (mu, log sigma, log(tau-1), logit pi0).
//
// The pass carries, besides the primal state, the pointwise eta-gradients
// of the atom mass and of psi at every grid node, updated by the product
// rule of the same A0/A1/B factorization the primal recursion uses:
//   d pi_i    = A0 d pi_{i-1} + dA0 pi_{i-1}
//   d psi_i   = (dB A1 + B dA1) psi_{i-1} + B A1 d psi_{i-1}
//   dA0       = w (dG0 - G0 dlog lambda) / lambda
//   dA1(u)    = w (dG1(u) - G1(u) dlog lambda) / lambda
//   dB        = ((B A0 - 1) d pi_{i-1} + B dA0 pi_{i-1}) / (1 - A0 pi_{i-1})
// with dlog lambda = (d pi G0 + pi dG0 + h ((1-pi) dlog h - d pi)) / lambda.
// Cost is O(nK) time and O(K) memory, the same order as the primal pass.
//
// The primal quantities are computed with expressions identical to
// recursion.hpp, so the log-likelihood from this pass matches pr_run to
// machine precision. The atom mass is clamped to [1e-12, 1 - 1e-12] to
// keep B's denominator away from zero.

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "prtest/recursion.hpp"
#include "prtest/vec4.hpp"

namespace prtest {

inline constexpr double kAtomClamp = 1e-12;

namespace detail {

// Per-eta coefficient vectors of the kernel log-densities. With
// z0 = (z - mu)/sigma and z1 = z0 - tau*u:
//   dlog G0 = (z0/sigma, z0^2 - 1, 0, 0)
//   dlog G1 = (z1/sigma, z1 tau u + z1^2 - 1, z1 u (tau-1), 0)
// pi0 never enters the kernels, so the fourth component is 0.
inline Vec4 kernel_coeffs_g0(double z0, double inv_sigma) {
    return {z0 * inv_sigma, z0 * z0 - 1.0, 0.0, 0.0};
}

inline Vec4 kernel_coeffs_g1(double z1, double u, double tau, double inv_sigma) {
    return {z1 * inv_sigma, z1 * tau * u + z1 * z1 - 1.0, z1 * u * (tau - 1.0), 0.0};
}

}  // namespace detail

struct KernelGrads {
    double g0 = 0.0;  // N(z | mu, sigma^2)
    double g1 = 0.0;  // N(z | mu + tau*sigma*u, sigma^2)
    Vec4 dg0{};       // eta-gradient of g0
    Vec4 dg1{};       // eta-gradient of g1
};

inline KernelGrads kernel_grads(double z, const Theta& t, double u) {
    t.validate();
    KernelGrads kg;
    kg.g0 = kernel_eval(z, t, 0.0);
    kg.g1 = kernel_eval(z, t, u);
    const double inv_sigma = 1.0 / t.sigma;
    const double z0 = (z - t.mu) / t.sigma;
    const double z1 = z0 - t.tau * u;
    kg.dg0 = kg.g0 * detail::kernel_coeffs_g0(z0, inv_sigma);
    kg.dg1 = kg.g1 * detail::kernel_coeffs_g1(z1, u, t.tau, inv_sigma);
    return kg;
}

// Recursion state plus pointwise eta-gradients and the running accumulators.
struct GradState {
    MixingState mix;
    Vec4 grad_pi{};               // d(atom mass)/d(eta)
    std::vector<Vec4> grad_psi;   // K x 4, d(psi at node k)/d(eta)
    double log_lik = 0.0;         // sum of log lambda_i so far
    Vec4 grad_loglik{};           // sum of dlog lambda_i so far
};

// Initial state: the default mixing measure with psi-gradients all zero
// (psi0 does not depend on eta) and d pi0 = (0, 0, 0, pi0(1-pi0)).
inline GradState make_grad_state(std::size_t K, const Eta& e) {
    const Theta t = eta_to_theta(e);
    GradState s;
    s.mix = init_mixing_state(K, t.pi0);
    s.grad_pi = {0.0, 0.0, 0.0, t.pi0 * (1.0 - t.pi0)};
    s.grad_psi.assign(K, Vec4{});
    return s;
}

// One gradient-augmented recursion update; obs_index is used in error
// messages only (1-based).
inline void pr_grad_step(GradState& s, double z, double w, const Theta& t,
                         std::vector<double>& g1_scratch, std::size_t obs_index = 0) {
    const std::size_t K = s.mix.size();
    const double tau = t.tau;
    const double inv_sigma = 1.0 / t.sigma;
    const double lc = kLogInvSqrt2Pi - std::log(t.sigma);
    const double z0 = (z - t.mu) / t.sigma;
    const double g0 = std::exp(lc - 0.5 * z0 * z0);

    const double pi = s.mix.pi;
    const std::vector<double>& u = s.mix.grid;
    const std::vector<double>& q = s.mix.quad_weights;
    std::vector<double>& psi = s.mix.psi;
    g1_scratch.resize(K);

    // h = int G1 psi du and the quadrature of G1 dpsi + dG1 psi.
    double acc = 0.0;
    Vec4 numer{};
    for (std::size_t k = 0; k < K; ++k) {
        const double z1 = z0 - tau * u[k];
        const double g1k = std::exp(lc - 0.5 * z1 * z1);
        g1_scratch[k] = g1k;
        acc += g1k * psi[k] * q[k];
        const Vec4 v1 = detail::kernel_coeffs_g1(z1, u[k], tau, inv_sigma);
        const double gq = g1k * q[k];
        for (int c = 0; c < 4; ++c) numer[c] += gq * (s.grad_psi[k][c] + v1[c] * psi[k]);
    }
    const double h = acc;
    const double lambda = pi * g0 + (1.0 - pi) * acc;
    if (!(lambda > kDensityFloor))
        throw UnderflowError("pr_grad_step: predictive density underflow at observation " +
                                 std::to_string(obs_index) + " (z=" + std::to_string(z) + ")",
                             z, obs_index);

    // dlog lambda = (dpi G0 + pi dG0 + h((1-pi) dlog h - dpi)) / lambda,
    // with h (1-pi) dlog h written as (1-pi) dh so that h = 0 stays finite.
    const Vec4 v0 = detail::kernel_coeffs_g0(z0, inv_sigma);
    const Vec4 dg0 = g0 * v0;
    Vec4 dloglam{};
    for (int c = 0; c < 4; ++c)
        dloglam[c] = (s.grad_pi[c] * g0 + pi * dg0[c] + (1.0 - pi) * numer[c] -
                      s.grad_pi[c] * h) /
                     lambda;
    for (int c = 0; c < 4; ++c)
        if (!std::isfinite(dloglam[c]))
            throw std::runtime_error("pr_grad_step: non-finite gradient component " +
                                     std::to_string(c) + " at observation " +
                                     std::to_string(obs_index));

    s.log_lik += std::log(lambda);
    s.grad_loglik += dloglam;

    // State update.
    const double a0 = 1.0 + w * (g0 / lambda - 1.0);
    const double denom = 1.0 - a0 * pi;
    const double b = (1.0 - pi) / denom;
    Vec4 da0{};
    for (int c = 0; c < 4; ++c) da0[c] = w * (dg0[c] - g0 * dloglam[c]) / lambda;
    Vec4 db{};
    for (int c = 0; c < 4; ++c)
        db[c] = ((b * a0 - 1.0) * s.grad_pi[c] + b * da0[c] * pi) / denom;

    Vec4 new_grad_pi{};
    for (int c = 0; c < 4; ++c) new_grad_pi[c] = a0 * s.grad_pi[c] + da0[c] * pi;
    s.grad_pi = new_grad_pi;
    s.mix.pi = std::min(1.0 - kAtomClamp, std::max(kAtomClamp, a0 * pi));

    const double wl = w / lambda;
    for (std::size_t k = 0; k < K; ++k) {
        const double g1k = g1_scratch[k];
        const double a1 = 1.0 + w * (g1k / lambda - 1.0);
        const double z1 = z0 - tau * u[k];
        const Vec4 v1 = detail::kernel_coeffs_g1(z1, u[k], tau, inv_sigma);
        const double psi_old = psi[k];
        const double scale = wl * g1k;
        for (int c = 0; c < 4; ++c) {
            const double da1 = scale * (v1[c] - dloglam[c]);
            s.grad_psi[k][c] =
                (db[c] * a1 + b * da1) * psi_old + b * a1 * s.grad_psi[k][c];
        }
        psi[k] = b * a1 * psi_old;
    }
}

// Full pass over zs; returns the final state whose log_lik / grad_loglik
// fields hold log L_n and its eta-gradient.
inline GradState pr_run_with_grad(const std::vector<double>& zs, const Eta& e,
                                  const WeightSchedule& sched, GradState state) {
    if (zs.size() != sched.n)
        throw std::invalid_argument("pr_run_with_grad: data length must match schedule");
    const Theta t = eta_to_theta(e);
    std::vector<double> scratch(state.mix.size());
    for (std::size_t i = 0; i < zs.size(); ++i)
        pr_grad_step(state, zs[i], sched.values[i], t, scratch, i + 1);
    return state;
}

}  // namespace prtest
