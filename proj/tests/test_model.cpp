#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "prtest/model.hpp"
#include "prtest/rng.hpp"

#include "oracles.hpp"

using namespace prtest;

namespace {

bool close_rel(double a, double b, double rel, double abs_floor = 0.0) {
    const double err = std::fabs(a - b);
    return err <= std::max(abs_floor, rel * std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace

TEST_CASE("theta/eta transforms at the reference point", "[model]") {
    const Eta e = theta_to_eta(Theta{0.0, 1.0, 2.0, 0.5});
    CHECK(e.mu == 0.0);
    CHECK(e.log_sigma == 0.0);
    CHECK(e.log_tau_m1 == 0.0);
    CHECK(e.logit_pi0 == 0.0);

    const Theta t = eta_to_theta(Eta{0.0, 0.0, 0.0, 0.0});
    CHECK(t.mu == 0.0);
    CHECK(t.sigma == 1.0);
    CHECK(t.tau == 2.0);
    CHECK(t.pi0 == 0.5);
}

TEST_CASE("theta/eta round trip on random draws", "[model]") {
    Xoshiro256 rng(12345);
    for (int i = 0; i < 1000; ++i) {
        Theta t;
        t.mu = rng.uniform(-5.0, 5.0);
        t.sigma = std::exp(rng.uniform(-2.0, 2.0));
        t.tau = 1.0 + std::exp(rng.uniform(-3.0, 3.0));
        t.pi0 = rng.uniform(0.001, 0.999);
        const Theta back = eta_to_theta(theta_to_eta(t));
        CHECK(close_rel(back.mu, t.mu, 1e-12, 1e-14));
        CHECK(close_rel(back.sigma, t.sigma, 1e-12));
        CHECK(close_rel(back.tau, t.tau, 1e-12));
        CHECK(close_rel(back.pi0, t.pi0, 1e-12));
    }
}

TEST_CASE("transform input validation", "[model]") {
    CHECK_THROWS_AS(theta_to_eta(Theta{0.0, -1.0, 2.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(theta_to_eta(Theta{0.0, 1.0, 1.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(theta_to_eta(Theta{0.0, 1.0, 2.0, 1.0}), std::invalid_argument);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(theta_to_eta(Theta{nan, 1.0, 2.0, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(eta_to_theta(Eta{0.0, nan, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("weight schedule values and bounds", "[model]") {
    const WeightSchedule w1 = make_weight_schedule(1, 1.0);
    REQUIRE(w1.values.size() == 1);
    CHECK(w1.values[0] == 0.5);

    const WeightSchedule w2 = make_weight_schedule(2, 0.67);
    CHECK_THAT(w2.values[0], Catch::Matchers::WithinAbs(0.6285, 1e-4));
    CHECK_THAT(w2.values[1], Catch::Matchers::WithinAbs(0.4790, 1e-4));
    CHECK(w2.values[0] == std::pow(2.0, -0.67));
    CHECK(w2.values[1] == std::pow(3.0, -0.67));

    const WeightSchedule big = make_weight_schedule(1000, 0.67);
    for (std::size_t i = 1; i < big.values.size(); ++i) {
        CHECK(big.values[i] < big.values[i - 1]);
        CHECK(big.values[i] > 0.0);
        CHECK(big.values[i] < 1.0);
    }

    CHECK_THROWS_AS(make_weight_schedule(10, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(make_weight_schedule(10, 2.0 / 3.0), std::invalid_argument);
    CHECK_THROWS_AS(make_weight_schedule(10, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(make_weight_schedule(0, 0.67), std::invalid_argument);
    CHECK_NOTHROW(make_weight_schedule(10, 0.5, /*allow_any_gamma=*/true));
    CHECK_THROWS_AS(make_weight_schedule(10, 1.5, true), std::invalid_argument);
}

TEST_CASE("initial mixing state", "[model]") {
    // The continuous initial shift density integrates to one analytically.
    const double full = oracles::simpson([](double u) { return 1.5 * u * u; }, -1.0, 1.0, 2000);
    CHECK_THAT(full, Catch::Matchers::WithinAbs(1.0, 1e-12));

    const MixingState s = init_mixing_state(200, 0.95);
    REQUIRE(s.size() == 200);
    CHECK(s.pi == 0.95);
    CHECK(std::fabs(s.psi_mass() - 1.0) < 1e-10);
    CHECK(std::fabs(s.total_mass() - 1.0) < 1e-10);
    CHECK(s.is_valid());
    double qsum = 0.0;
    for (double q : s.quad_weights) qsum += q;
    CHECK_THAT(qsum, Catch::Matchers::WithinAbs(2.0, 1e-12));
    for (std::size_t k = 0; k < s.size(); ++k) {
        CHECK(s.grid[k] > -1.0);
        CHECK(s.grid[k] < 1.0);
        if (k > 0) CHECK(s.grid[k] > s.grid[k - 1]);
    }

    const MixingState tiny = init_mixing_state(2, 0.5);
    CHECK(tiny.grid[0] == -0.5);
    CHECK(tiny.grid[1] == 0.5);
    CHECK(tiny.psi[0] == tiny.psi[1]);

    CHECK_THROWS_AS(init_mixing_state(1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(init_mixing_state(8, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(init_mixing_state(8, 1.0), std::invalid_argument);
}

TEST_CASE("log prior is finite inside and -inf on the boundary", "[model]") {
    const PriorSpec prior;
    CHECK(std::isfinite(log_prior(Theta{0.1, 1.2, 2.5, 0.9}, prior)));
    CHECK(log_prior(Theta{0.0, 0.0, 2.0, 0.5}, prior) ==
          -std::numeric_limits<double>::infinity());
    CHECK(log_prior(Theta{0.0, 1.0, 1.0, 0.5}, prior) ==
          -std::numeric_limits<double>::infinity());
    CHECK(log_prior(Theta{0.0, 1.0, 2.0, 0.0}, prior) ==
          -std::numeric_limits<double>::infinity());
    CHECK(log_prior(Theta{0.0, 1.0, 2.0, 1.0}, prior) ==
          -std::numeric_limits<double>::infinity());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(log_prior(Theta{nan, 1.0, 2.0, 0.5}, prior) ==
          -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(log_prior(Theta{0, 1, 2, 0.5}, PriorSpec{-1, 1, 1, 1, 1}),
                    std::invalid_argument);
}

TEST_CASE("Beta(22.7, 1) prior places about 90% of its mass on [0.9, 1]", "[model]") {
    // Density isolated from log_prior by dividing out the other terms at
    // mu=0, sigma=1, tau=2, where they reduce to constants.
    const PriorSpec prior;
    const double other = (kLogInvSqrt2Pi + 0.5 * std::log(400.0)) +
                         (kLogInvSqrt2Pi - std::log(0.25)) + kLogInvSqrt2Pi;
    auto beta_pdf = [&](double p) {
        return std::exp(log_prior(Theta{0.0, 1.0, 2.0, p}, prior) - other);
    };
    const double mass = oracles::simpson(beta_pdf, 0.9, 1.0 - 1e-12, 4000);
    CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0 - std::pow(0.9, 22.7), 1e-6));
    CHECK_THAT(mass, Catch::Matchers::WithinAbs(0.90, 0.01));

    // With b = 1 the log density tends to log(a) at the right edge.
    const double at_edge =
        log_prior(Theta{0.0, 1.0, 2.0, 1.0 - 1e-9}, prior) - other;
    CHECK_THAT(at_edge, Catch::Matchers::WithinAbs(std::log(22.7), 1e-6));
}

TEST_CASE("prior gradient matches finite differences", "[model]") {
    const PriorSpec prior;
    Xoshiro256 rng(777);
    for (int rep = 0; rep < 20; ++rep) {
        Eta e;
        e.mu = rng.uniform(-0.5, 0.5);
        e.log_sigma = rng.uniform(-0.5, 0.5);
        e.log_tau_m1 = rng.uniform(-1.0, 1.0);
        e.logit_pi0 = rng.uniform(-1.0, 3.5);
        const Vec4 g = log_prior_grad_eta(e, prior);
        for (int c = 0; c < 4; ++c) {
            const double fd = oracles::central_difference(
                [&](double x) {
                    Vec4 v = e.to_array();
                    v[c] = x;
                    return log_prior(eta_to_theta(Eta::from_array(v)), prior);
                },
                e.to_array()[c], 1e-5);
            CHECK(close_rel(g[c], fd, 1e-5, 1e-8));
        }
    }
}

TEST_CASE("prior gradient with a non-default spec", "[model]") {
    const PriorSpec prior{0.5, 2.0, 3.0, 2.0, 100.0};
    const Eta e{0.2, -0.1, 0.4, 1.1};
    const Vec4 g = log_prior_grad_eta(e, prior);
    for (int c = 0; c < 4; ++c) {
        const double fd = oracles::central_difference(
            [&](double x) {
                Vec4 v = e.to_array();
                v[c] = x;
                return log_prior(eta_to_theta(Eta::from_array(v)), prior);
            },
            e.to_array()[c], 1e-5);
        CHECK(close_rel(g[c], fd, 1e-5, 1e-8));
    }
}
