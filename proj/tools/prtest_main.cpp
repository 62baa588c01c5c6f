// prtest: empirical-Bayes multiple testing from z-scores.
//
// Subcommands:
//   fit        fit the two-groups model to a z-score file and flag cases
//   simulate   run a replicated simulation study over the C1-C4 designs
//   gradcheck  validate the analytic likelihood gradient against finite
//              differences
//
// Exit codes: 0 success, 1 numerical/check failure, 2 usage/input error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prtest/prtest.hpp"

namespace {

struct FitArgs {
    std::string input;
    std::string output_dir = ".";
    double threshold = 0.1;
    int permutations = 10;
    std::size_t grid = 200;
    double gamma = 0.67;
    std::uint64_t seed = 1;
    bool emit_curves = false;
    std::vector<double> curve_range;
    std::size_t curve_points = 401;
    int threads = 0;
    bool verbose = false;
};

struct SimArgs {
    std::vector<std::string> variants;
    std::vector<double> pis;
    std::size_t reps = 50;
    std::size_t n = 1000;
    double threshold = 0.1;
    int permutations = 10;
    std::size_t grid = 200;
    double gamma = 0.67;
    std::uint64_t seed = 1;
    std::string output_dir = ".";
    int threads = 0;
};

struct GradArgs {
    double fd_step = 1e-5;
    double tolerance = 1e-4;
    int seeds = 10;
    std::uint64_t seed = 7;
    bool inject_defect = false;
};

struct PriorArgs {
    double sd_log_sigma = 0.25;
    double sd_log_tau = 1.0;
    double beta_a = 22.7;
    double beta_b = 1.0;
    double mu_precision = 400.0;

    prtest::PriorSpec to_spec() const {
        return {sd_log_sigma, sd_log_tau, beta_a, beta_b, mu_precision};
    }
};

void add_prior_flags(CLI::App* cmd, PriorArgs& p) {
    cmd->add_option("--prior-sd-log-sigma", p.sd_log_sigma, "Prior sd of log(sigma)");
    cmd->add_option("--prior-sd-log-tau", p.sd_log_tau, "Prior sd of log(tau-1)");
    cmd->add_option("--prior-beta-a", p.beta_a, "Beta prior shape a for pi0");
    cmd->add_option("--prior-beta-b", p.beta_b, "Beta prior shape b for pi0");
    cmd->add_option("--prior-mu-precision", p.mu_precision,
                    "mu | sigma ~ N(0, sigma^2 / this)");
}

int usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    return 2;
}

std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out;
}

int run_fit(const FitArgs& a, const PriorArgs& priors) {
    using prtest::fmt_g12;
    if (!(a.threshold > 0.0 && a.threshold < 1.0))
        return usage_error("--threshold must be in (0,1)");
    if (a.permutations < 1) return usage_error("--permutations must be >= 1");
    if (a.grid < 2) return usage_error("--grid must be >= 2");
    if (!(a.gamma > 2.0 / 3.0 && a.gamma <= 1.0))
        return usage_error("--gamma must be in (2/3, 1]");
    if (a.curve_points < 2) return usage_error("--curve-points must be >= 2");
    if (!a.curve_range.empty() &&
        (a.curve_range.size() != 2 || !(a.curve_range[0] < a.curve_range[1])))
        return usage_error("--curve-range expects LO HI with LO < HI");

    std::vector<double> zs;
    try {
        zs = prtest::read_zscores(a.input);
    } catch (const std::exception& err) {
        return usage_error(std::string(err.what()));
    }
    if (zs.size() < 10)
        return usage_error("input has " + std::to_string(zs.size()) +
                           " z-scores; need at least 10");

    std::filesystem::create_directories(a.output_dir);
    const auto t0 = std::chrono::steady_clock::now();

    auto cfg = prtest::make_objective_config(zs.size(), a.permutations, a.seed, a.gamma,
                                             a.grid, priors.to_spec());
    cfg.threads = prtest::worker_count(a.threads);
    prtest::FitOptions opts;
    if (a.verbose)
        opts.bfgs.trace = [](int it, double value, double gnorm) {
            std::cerr << "iter " << it << "  objective " << fmt_g12(value) << "  |grad| "
                      << fmt_g12(gnorm) << "\n";
        };

    prtest::FitResult fr;
    prtest::TestDecision decision;
    try {
        fr = prtest::fit(zs, cfg, opts);
        decision = prtest::classify(fr, zs, a.threshold);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    const double runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::filesystem::path dir(a.output_dir);
    std::size_t n_flagged = 0;
    for (auto f : decision.flags) n_flagged += f;
    prtest::write_estimates_json(
        (dir / "estimates.json").string(),
        {{"n", std::to_string(zs.size())},
         {"mu_hat", fmt_g12(fr.theta_hat.mu)},
         {"sigma_hat", fmt_g12(fr.theta_hat.sigma)},
         {"tau_hat", fmt_g12(fr.theta_hat.tau)},
         {"pi0_hat", fmt_g12(fr.theta_hat.pi0)},
         {"pi_hat", fmt_g12(fr.pi_hat)},
         {"objective", fmt_g12(fr.opt.objective_value)},
         {"gradient_norm", fmt_g12(fr.opt.gradient_norm_at_opt)},
         {"iterations", std::to_string(fr.opt.iterations)},
         {"converged", fr.opt.converged ? "true" : "false"},
         {"warning", "\"" + json_escape(fr.warning) + "\""},
         {"threshold", fmt_g12(a.threshold)},
         {"n_flagged", std::to_string(n_flagged)},
         {"n_left", std::to_string(decision.n_left)},
         {"n_right", std::to_string(decision.n_right)},
         {"permutations", std::to_string(a.permutations)},
         {"grid", std::to_string(a.grid)},
         {"gamma", fmt_g12(a.gamma)},
         {"seed", std::to_string(a.seed)},
         {"runtime_seconds", fmt_g12(runtime)}});
    prtest::write_cases_tsv((dir / "cases.tsv").string(), zs, decision);

    if (a.emit_curves) {
        double lo, hi;
        if (a.curve_range.size() == 2) {
            lo = a.curve_range[0];
            hi = a.curve_range[1];
        } else {
            lo = *std::min_element(zs.begin(), zs.end()) - 1.0;
            hi = *std::max_element(zs.begin(), zs.end()) + 1.0;
        }
        prtest::write_curves_tsv(
            (dir / "curves.tsv").string(),
            prtest::export_fit_curves(fr, lo, hi, a.curve_points));
    }

    std::cout << "fit: n=" << zs.size() << " mu_hat=" << fmt_g12(fr.theta_hat.mu)
              << " sigma_hat=" << fmt_g12(fr.theta_hat.sigma)
              << " tau_hat=" << fmt_g12(fr.theta_hat.tau)
              << " pi_hat=" << fmt_g12(fr.pi_hat) << " flagged=" << n_flagged << " (left "
              << decision.n_left << ", right " << decision.n_right << ") in "
              << fmt_g12(runtime) << "s\n";
    if (!fr.warning.empty()) std::cout << "warning: " << fr.warning << "\n";
    return 0;
}

int run_simulate(const SimArgs& a, const PriorArgs& priors) {
    using prtest::fmt_g12;
    if (a.reps < 1) return usage_error("--reps must be >= 1");
    if (a.n < 10) return usage_error("--n must be >= 10");
    if (!(a.threshold > 0.0 && a.threshold < 1.0))
        return usage_error("--threshold must be in (0,1)");
    if (a.variants.empty()) return usage_error("--variants requires at least one entry");
    if (a.pis.empty()) return usage_error("--pis requires at least one entry");

    prtest::StudyConfig sc;
    for (const auto& name : a.variants) {
        prtest::Variant v;
        if (!prtest::parse_variant(name, v))
            return usage_error("unknown variant '" + name + "' (valid: C1 C2 C3 C4)");
        sc.variants.push_back(v);
    }
    for (double pi : a.pis)
        if (!(pi > 0.0 && pi < 1.0)) return usage_error("--pis values must be in (0,1)");
    sc.pis = a.pis;
    sc.reps = a.reps;
    sc.n = a.n;
    sc.seed = a.seed;
    sc.threshold = a.threshold;
    sc.n_permutations = a.permutations;
    sc.grid_size = a.grid;
    sc.gamma = a.gamma;
    sc.priors = priors.to_spec();
    sc.threads = prtest::worker_count(a.threads);

    std::filesystem::create_directories(a.output_dir);
    const auto table = prtest::run_study(sc, [](const prtest::StudyCell& c) {
        std::cout << prtest::variant_name(c.variant) << " pi=" << fmt_g12(c.pi)
                  << " reps=" << c.reps << " failures=" << c.failures
                  << ": pi_hat=" << fmt_g12(c.pi_hat_mean) << " (" << fmt_g12(c.pi_hat_sd)
                  << ") fdr=" << fmt_g12(c.prtest_mean.fdr)
                  << " power=" << fmt_g12(c.prtest_mean.power)
                  << " risk=" << fmt_g12(c.prtest_mean.bayes_risk)
                  << " oracle_risk=" << fmt_g12(c.oracle_mean.bayes_risk) << "\n";
    });
    const auto path = std::filesystem::path(a.output_dir) / "study.tsv";
    prtest::write_study_tsv(path.string(), table);
    std::cout << "study table written to " << path.string() << " (" << table.size()
              << " rows)\n";
    return 0;
}

int run_gradcheck(const GradArgs& a) {
    using prtest::fmt_g12;
    if (!(a.fd_step > 0.0)) return usage_error("--fd-step must be > 0");
    if (!(a.tolerance > 0.0)) return usage_error("--tolerance must be > 0");
    if (a.seeds < 1) return usage_error("--seeds must be >= 1");

    prtest::GradCheckConfig gc;
    gc.fd_step = a.fd_step;
    gc.tolerance = a.tolerance;
    gc.n_seeds = a.seeds;
    gc.seed = a.seed;
    gc.inject_defect = a.inject_defect;
    const auto report = prtest::run_gradcheck(gc);

    static const char* kNames[4] = {"mu", "log_sigma", "log_tau_m1", "logit_pi0"};
    for (int c = 0; c < 4; ++c)
        std::cout << "max rel err " << kNames[c] << ": " << fmt_g12(report.max_rel_err[c])
                  << "\n";
    std::cout << (report.pass ? "gradcheck PASS" : "gradcheck FAIL") << " (" << report.cases
              << " cases, fd step " << fmt_g12(a.fd_step) << ", tolerance "
              << fmt_g12(a.tolerance) << ")\n";
    if (!report.pass) {
        std::cerr << "worst case: " << report.worst_case << "\n";
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Empirical-Bayes multiple testing from z-scores"};
    app.require_subcommand(1);

    FitArgs fit_args;
    PriorArgs fit_priors;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the two-groups model to a z-score file");
    fit_cmd->add_option("--input", fit_args.input, "Input file, one z-score per line")
        ->required();
    fit_cmd->add_option("--output-dir", fit_args.output_dir, "Output directory");
    fit_cmd->add_option("--threshold", fit_args.threshold, "fdr decision threshold");
    fit_cmd->add_option("--permutations", fit_args.permutations,
                        "Number of frozen data orderings averaged");
    fit_cmd->add_option("--grid", fit_args.grid, "Mixing-measure grid size");
    fit_cmd->add_option("--gamma", fit_args.gamma, "Recursion weight exponent");
    fit_cmd->add_option("--seed", fit_args.seed, "RNG seed");
    fit_cmd->add_flag("--emit-curves", fit_args.emit_curves, "Write curves.tsv");
    fit_cmd->add_option("--curve-range", fit_args.curve_range, "Curve grid LO HI")
        ->expected(2);
    fit_cmd->add_option("--curve-points", fit_args.curve_points, "Curve grid size");
    fit_cmd->add_option("--threads", fit_args.threads, "Worker threads (0 = auto)");
    fit_cmd->add_flag("--verbose", fit_args.verbose, "Trace optimizer iterations");
    add_prior_flags(fit_cmd, fit_priors);

    SimArgs sim_args;
    PriorArgs sim_priors;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a replicated simulation study");
    sim_cmd->add_option("--variants", sim_args.variants, "Designs among C1 C2 C3 C4")
        ->required()
        ->delimiter(',');
    sim_cmd->add_option("--pis", sim_args.pis, "Null proportions in (0,1)")
        ->required()
        ->delimiter(',');
    sim_cmd->add_option("--reps", sim_args.reps, "Replicates per cell");
    sim_cmd->add_option("--n", sim_args.n, "Observations per replicate");
    sim_cmd->add_option("--threshold", sim_args.threshold, "fdr decision threshold");
    sim_cmd->add_option("--permutations", sim_args.permutations,
                        "Number of frozen data orderings averaged");
    sim_cmd->add_option("--grid", sim_args.grid, "Mixing-measure grid size");
    sim_cmd->add_option("--gamma", sim_args.gamma, "Recursion weight exponent");
    sim_cmd->add_option("--seed", sim_args.seed, "RNG seed");
    sim_cmd->add_option("--output-dir", sim_args.output_dir, "Output directory");
    sim_cmd->add_option("--threads", sim_args.threads, "Worker threads (0 = auto)");
    add_prior_flags(sim_cmd, sim_priors);

    GradArgs grad_args;
    auto* grad_cmd =
        app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradient");
    grad_cmd->add_option("--fd-step", grad_args.fd_step, "Central-difference step");
    grad_cmd->add_option("--tolerance", grad_args.tolerance, "Max relative error allowed");
    grad_cmd->add_option("--seeds", grad_args.seeds, "Random datasets per size");
    grad_cmd->add_option("--seed", grad_args.seed, "Base RNG seed");
    grad_cmd->add_flag("--inject-defect", grad_args.inject_defect,
                       "Flip the tau gradient sign (harness self-test)")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (fit_cmd->parsed()) return run_fit(fit_args, fit_priors);
        if (sim_cmd->parsed()) return run_simulate(sim_args, sim_priors);
        if (grad_cmd->parsed()) return run_gradcheck(grad_args);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 2;
}
