// Test-only reference implementations, kept independent of the library's
// computation paths: a straight-line recursion on the flat mass vector, a
// central-difference gradient, and Simpson quadrature.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "prtest/model.hpp"

namespace oracles {

// Straight-line recursion over the flat (K+1)-vector of masses
// m = [pi, (1-pi) psi_1 q_1, ..., (1-pi) psi_K q_K]. Every step reweights
// each mass by its own kernel density and renormalizes through the shared
// predictive density; nothing is factorized.
struct FlatResult {
    double log_lik = 0.0;
    double pi = 0.0;
    std::vector<double> psi;
    std::vector<double> per_obs;
};

inline double flat_normal_pdf(double x, double mean, double sd) {
    const double d = (x - mean) / sd;
    return std::exp(-0.5 * d * d) / (sd * std::sqrt(2.0 * 3.14159265358979323846));
}

inline FlatResult flat_pr(const std::vector<double>& zs, const prtest::Theta& t,
                          const std::vector<double>& weights,
                          const prtest::MixingState& init) {
    const std::size_t K = init.grid.size();
    std::vector<double> mass(K + 1);
    mass[0] = init.pi;
    for (std::size_t k = 0; k < K; ++k)
        mass[k + 1] = (1.0 - init.pi) * init.psi[k] * init.quad_weights[k];

    FlatResult res;
    std::vector<double> dens(K + 1);
    for (std::size_t i = 0; i < zs.size(); ++i) {
        dens[0] = flat_normal_pdf(zs[i], t.mu, t.sigma);
        for (std::size_t k = 0; k < K; ++k)
            dens[k + 1] =
                flat_normal_pdf(zs[i], t.mu + t.tau * t.sigma * init.grid[k], t.sigma);
        double f = 0.0;
        for (std::size_t j = 0; j <= K; ++j) f += mass[j] * dens[j];
        const double w = weights[i];
        for (std::size_t j = 0; j <= K; ++j)
            mass[j] = (1.0 - w) * mass[j] + w * mass[j] * dens[j] / f;
        res.log_lik += std::log(f);
        res.per_obs.push_back(f);
    }
    res.pi = mass[0];
    res.psi.resize(K);
    for (std::size_t k = 0; k < K; ++k)
        res.psi[k] = mass[k + 1] / ((1.0 - res.pi) * init.quad_weights[k]);
    return res;
}

inline double central_difference(const std::function<double(double)>& fn, double x,
                                 double h) {
    return (fn(x + h) - fn(x - h)) / (2.0 * h);
}

// Composite Simpson rule; n_intervals must be even.
inline double simpson(const std::function<double(double)>& fn, double a, double b,
                      std::size_t n_intervals) {
    const double h = (b - a) / static_cast<double>(n_intervals);
    double s = fn(a) + fn(b);
    for (std::size_t i = 1; i < n_intervals; ++i)
        s += fn(a + static_cast<double>(i) * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace oracles
