// Simulation designs, the Bayes oracle rule, and testing error metrics.
//
// Four non-null densities over a N(mu, sigma^2) null:
//   C1: N(0, sigma^2 + omega^2)
//   C2: 0.5 * int_2^4 N(z | u, sigma^2) du   (asymmetric, mildly heavy)
//   C3: 0.67 N(-3, 2) + 0.33 N(3, 2)         (components with variance 2)
//   C4: 0.25 * int over [-4,-2] u [2,4]      (symmetrized C2)
//
// Metric conventions (the confusion matrix counts flags against true
// labels; a zero denominator yields 0):
//   FDR   = FP / max(FP + TP, 1)       FNR  = FN / max(FN + TN, 1)
//   power = TP / max(TP + FN, 1)       risk = (FP + FN) / n   (0-1 loss)

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "prtest/inference.hpp"
#include "prtest/parallel.hpp"
#include "prtest/rng.hpp"

namespace prtest {

enum class Variant { C1, C2, C3, C4 };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::C1: return "C1";
        case Variant::C2: return "C2";
        case Variant::C3: return "C3";
        case Variant::C4: return "C4";
    }
    return "?";
}

inline bool parse_variant(const std::string& s, Variant& out) {
    if (s == "C1") out = Variant::C1;
    else if (s == "C2") out = Variant::C2;
    else if (s == "C3") out = Variant::C3;
    else if (s == "C4") out = Variant::C4;
    else return false;
    return true;
}

struct SimModel {
    Variant variant = Variant::C1;
    double pi = 0.9;      // null proportion
    std::size_t n = 1000;
    double mu = 0.0;
    double sigma = 1.0;
    double omega2 = 4.0;  // C1 only

    void validate() const {
        if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("SimModel: pi in (0,1)");
        if (n < 1) throw std::invalid_argument("SimModel: n >= 1");
        if (!(sigma > 0.0)) throw std::invalid_argument("SimModel: sigma > 0");
        if (!(omega2 > 0.0)) throw std::invalid_argument("SimModel: omega2 > 0");
    }
};

struct SimOutcome {
    std::vector<double> zs;
    std::vector<std::uint8_t> labels;  // 1 = non-null
};

namespace detail {

inline double draw_non_null(const SimModel& m, Xoshiro256& rng) {
    switch (m.variant) {
        case Variant::C1:
            return rng.normal(0.0, std::sqrt(m.sigma * m.sigma + m.omega2));
        case Variant::C2:
            return rng.normal(rng.uniform(2.0, 4.0), m.sigma);
        case Variant::C3:
            return rng.bernoulli(0.67) ? rng.normal(-3.0, std::sqrt(2.0))
                                       : rng.normal(3.0, std::sqrt(2.0));
        case Variant::C4: {
            const double u = rng.bernoulli(0.5) ? rng.uniform(-4.0, -2.0)
                                                : rng.uniform(2.0, 4.0);
            return rng.normal(u, m.sigma);
        }
    }
    return 0.0;
}

}  // namespace detail

inline SimOutcome gen_two_groups(const SimModel& m, std::uint64_t seed) {
    m.validate();
    Xoshiro256 rng(seed);
    SimOutcome out;
    out.zs.resize(m.n);
    out.labels.resize(m.n);
    for (std::size_t i = 0; i < m.n; ++i) {
        const bool non_null = !rng.bernoulli(m.pi);
        out.labels[i] = non_null ? 1 : 0;
        out.zs[i] = non_null ? detail::draw_non_null(m, rng) : rng.normal(m.mu, m.sigma);
    }
    return out;
}

// True non-null density in closed form (interval mixtures via CDF
// differences: int_a^b N(z|u,s^2) du = Phi((z-a)/s) - Phi((z-b)/s)).
inline double oracle_f1(double z, const SimModel& m) {
    switch (m.variant) {
        case Variant::C1:
            return normal_pdf(z, 0.0, std::sqrt(m.sigma * m.sigma + m.omega2));
        case Variant::C2:
            return 0.5 * (normal_cdf(z, 2.0, m.sigma) - normal_cdf(z, 4.0, m.sigma));
        case Variant::C3:
            return 0.67 * normal_pdf(z, -3.0, std::sqrt(2.0)) +
                   0.33 * normal_pdf(z, 3.0, std::sqrt(2.0));
        case Variant::C4:
            return 0.25 * (normal_cdf(z, -2.0, m.sigma) - normal_cdf(z, -4.0, m.sigma) +
                           normal_cdf(z, 2.0, m.sigma) - normal_cdf(z, 4.0, m.sigma));
    }
    return 0.0;
}

// True local false discovery rate under the generating model.
inline double oracle_fdr(double z, const SimModel& m) {
    const double null_part = m.pi * normal_pdf(z, m.mu, m.sigma);
    const double denom = null_part + (1.0 - m.pi) * oracle_f1(z, m);
    if (!(denom > 0.0)) return 1.0;
    return std::min(1.0, null_part / denom);
}

inline std::vector<std::uint8_t> oracle_test(const std::vector<double>& zs,
                                             const SimModel& m, double r = 0.1) {
    std::vector<std::uint8_t> flags(zs.size());
    for (std::size_t i = 0; i < zs.size(); ++i) flags[i] = oracle_fdr(zs[i], m) < r ? 1 : 0;
    return flags;
}

struct Metrics {
    double fdr = 0.0;
    double fnr = 0.0;
    double power = 0.0;
    double bayes_risk = 0.0;
};

inline Metrics metrics(const std::vector<std::uint8_t>& flags,
                       const std::vector<std::uint8_t>& labels) {
    if (flags.size() != labels.size())
        throw std::invalid_argument("metrics: flags/labels length mismatch");
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] && labels[i]) ++tp;
        else if (flags[i] && !labels[i]) ++fp;
        else if (!flags[i] && labels[i]) ++fn;
        else ++tn;
    }
    Metrics m;
    m.fdr = fp / std::max(fp + tp, 1.0);
    m.fnr = fn / std::max(fn + tn, 1.0);
    m.power = tp / std::max(tp + fn, 1.0);
    m.bayes_risk = (fp + fn) / std::max(static_cast<double>(flags.size()), 1.0);
    return m;
}

struct StudyConfig {
    std::vector<Variant> variants;
    std::vector<double> pis;
    std::size_t reps = 50;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
    double threshold = 0.1;
    int n_permutations = 10;
    std::size_t grid_size = 200;
    double gamma = 0.67;
    PriorSpec priors{};
    int threads = 1;  // replicate-level parallelism
};

struct StudyCell {
    Variant variant = Variant::C1;
    double pi = 0.0;
    std::size_t reps = 0;
    std::size_t n = 0;
    std::size_t failures = 0;  // replicates excluded due to fit errors
    double pi_hat_mean = 0.0, pi_hat_sd = 0.0;
    double mu_hat_mean = 0.0, mu_hat_sd = 0.0;
    double sigma_hat_mean = 0.0, sigma_hat_sd = 0.0;
    Metrics prtest_mean;
    Metrics oracle_mean;
    // Paired per-replicate (prtest risk - oracle risk) summary.
    double risk_gap_mean = 0.0, risk_gap_se = 0.0;
};

namespace detail {

struct RepResult {
    bool ok = false;
    double pi_hat = 0.0, mu_hat = 0.0, sigma_hat = 0.0;
    Metrics prtest;
    Metrics oracle;
};

}  // namespace detail

// Replicated study over (variant, pi) cells. Replicates get independent
// derived seeds, run in parallel, and are reduced in replicate order, so a
// seed fully determines the table. Failed replicates are counted and
// excluded rather than aborting the study.
inline std::vector<StudyCell> run_study(
    const StudyConfig& sc,
    const std::function<void(const StudyCell&)>& on_cell = nullptr) {
    if (sc.reps < 1) throw std::invalid_argument("run_study: reps must be >= 1");
    if (sc.variants.empty() || sc.pis.empty())
        throw std::invalid_argument("run_study: need at least one variant and pi");
    std::vector<StudyCell> table;
    std::size_t cell_index = 0;
    for (const Variant variant : sc.variants) {
        for (const double pi : sc.pis) {
            SimModel model;
            model.variant = variant;
            model.pi = pi;
            model.n = sc.n;
            model.validate();

            std::vector<detail::RepResult> reps(sc.reps);
            parallel_for(sc.reps, sc.threads, [&](std::size_t rep) {
                const std::uint64_t rep_seed = derive_seed(sc.seed, cell_index, rep);
                const SimOutcome data = gen_two_groups(model, rep_seed);
                detail::RepResult& rr = reps[rep];
                try {
                    ObjectiveConfig cfg =
                        make_objective_config(data.zs.size(), sc.n_permutations, rep_seed,
                                              sc.gamma, sc.grid_size, sc.priors);
                    const FitResult fr = fit(data.zs, cfg);
                    const TestDecision d = classify(fr, data.zs, sc.threshold);
                    rr.pi_hat = fr.pi_hat;
                    rr.mu_hat = fr.theta_hat.mu;
                    rr.sigma_hat = fr.theta_hat.sigma;
                    rr.prtest = metrics(d.flags, data.labels);
                    rr.oracle = metrics(oracle_test(data.zs, model, sc.threshold),
                                        data.labels);
                    rr.ok = true;
                } catch (const std::exception&) {
                    rr.ok = false;
                }
            });

            StudyCell cell;
            cell.variant = variant;
            cell.pi = pi;
            cell.n = sc.n;
            std::vector<double> pi_hats, mu_hats, sigma_hats, risk_gaps;
            for (const auto& rr : reps) {
                if (!rr.ok) {
                    ++cell.failures;
                    continue;
                }
                pi_hats.push_back(rr.pi_hat);
                mu_hats.push_back(rr.mu_hat);
                sigma_hats.push_back(rr.sigma_hat);
                cell.prtest_mean.fdr += rr.prtest.fdr;
                cell.prtest_mean.fnr += rr.prtest.fnr;
                cell.prtest_mean.power += rr.prtest.power;
                cell.prtest_mean.bayes_risk += rr.prtest.bayes_risk;
                cell.oracle_mean.fdr += rr.oracle.fdr;
                cell.oracle_mean.fnr += rr.oracle.fnr;
                cell.oracle_mean.power += rr.oracle.power;
                cell.oracle_mean.bayes_risk += rr.oracle.bayes_risk;
                risk_gaps.push_back(rr.prtest.bayes_risk - rr.oracle.bayes_risk);
            }
            cell.reps = pi_hats.size();
            if (cell.reps > 0) {
                const double inv = 1.0 / static_cast<double>(cell.reps);
                cell.pi_hat_mean = mean(pi_hats);
                cell.pi_hat_sd = sample_sd(pi_hats);
                cell.mu_hat_mean = mean(mu_hats);
                cell.mu_hat_sd = sample_sd(mu_hats);
                cell.sigma_hat_mean = mean(sigma_hats);
                cell.sigma_hat_sd = sample_sd(sigma_hats);
                cell.prtest_mean.fdr *= inv;
                cell.prtest_mean.fnr *= inv;
                cell.prtest_mean.power *= inv;
                cell.prtest_mean.bayes_risk *= inv;
                cell.oracle_mean.fdr *= inv;
                cell.oracle_mean.fnr *= inv;
                cell.oracle_mean.power *= inv;
                cell.oracle_mean.bayes_risk *= inv;
                cell.risk_gap_mean = mean(risk_gaps);
                cell.risk_gap_se =
                    sample_sd(risk_gaps) / std::sqrt(static_cast<double>(cell.reps));
            }
            table.push_back(cell);
            if (on_cell) on_cell(cell);
            ++cell_index;
        }
    }
    return table;
}

}  // namespace prtest
