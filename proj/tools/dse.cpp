#include <cstdio>
#include <filesystem>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "dse/case_io.hpp"
#include "dse/errors.hpp"
#include "dse/scenario.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_run(const fs::path& config_path, const std::string& out_override) {
    dse::ScenarioConfig cfg = dse::load_config(config_path);
    dse::apply_seed_override(cfg);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (cfg.output_dir.empty()) throw dse::ConfigError("no output_dir in config and none given with --out");
    const dse::SystemCase sys = dse::load_case(cfg.case_path);
    const auto res = dse::run_scenario(cfg, sys);
    dse::write_artifacts(res, cfg, cfg.output_dir);
    for (const auto& note : res.notes) fmt::print(stderr, "note: {}\n", note);
    for (const auto& run : res.runs)
        if (run.failed) fmt::print(stderr, "{} failed at t = {:.3f} s: {}\n", run.name, run.failed_at, run.failure);
    fmt::print("{:<10}{:>16}{:>16}{:>12}{:>12}{:>12}\n", "estimator", "final_rel_err", "mean_rel_err", "detect",
               "false_alarm", "wall_s");
    for (const auto& r : dse::summary_rows(res))
        fmt::print("{:<10}{:>16.6g}{:>16.6g}{:>12.4g}{:>12.4g}{:>12.4g}\n", r.estimator, r.final_rel_err,
                   r.mean_rel_err, r.detection_rate, r.false_alarm_rate, r.wall_time_s);
    fmt::print("artifacts written to {}\n", cfg.output_dir.string());
    return 0;
}

int cmd_gain(const fs::path& case_path, double rho, double mu, double varphi, bool estimate, bool relax,
             const std::string& out, std::uint64_t seed) {
    const dse::SystemCase sys = dse::load_case(case_path);
    const dse::LinearSplit split = dse::split_linear(sys);
    const dse::Mat C = dse::synthesis_output_matrix(sys);
    if (!out.empty() && fs::exists(out)) {
        const auto g = dse::load_gain(out);
        const double lam = dse::verify_gain(g, split.A, C);
        fmt::print("loaded {} and re-verified: LMI max eigenvalue {:.6e}\n", out, lam);
        return 0;
    }
    dse::ObserverSettings settings;
    settings.constants = {rho, mu, varphi};
    settings.estimate_constants = estimate;
    settings.relax = relax;
    std::vector<std::string> notes;
    try {
        const auto g = dse::synthesize_gain(sys, settings, seed, &notes);
        for (const auto& n : notes) fmt::print(stderr, "note: {}\n", n);
        fmt::print("feasible: rho={} mu={} varphi={} eps1={:.6g} eps2={:.6g} sigma={:.6g} lmi_max_eig={:.6e}\n",
                   g.constants.rho, g.constants.mu, g.constants.varphi, g.eps1, g.eps2, g.sigma, g.lmi_max_eig);
        if (!out.empty()) {
            dse::save_gain(g, out);
            fmt::print("gain written to {}\n", out);
        }
        return 0;
    } catch (const dse::InfeasibleError& e) {
        for (const auto& n : notes) fmt::print(stderr, "note: {}\n", n);
        fmt::print(stderr, "infeasible: {} (best max eigenvalue {:.6e})\n", e.what(), e.best_max_eig);
        return 3;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic state estimation workbench"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "simulate a scenario and run the estimators");
    std::string config_path, out_dir;
    run->add_option("config", config_path, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out_dir, "output directory (overrides output_dir)");

    auto* gain = app.add_subcommand("gain", "synthesize and certify an observer gain");
    std::string case_path, gain_out;
    double rho = 10.0, mu = 1.0, varphi = 1.0;
    bool estimate = false, relax = false;
    std::uint64_t seed = 4;
    gain->add_option("case", case_path, "case file (JSON)")->required()->check(CLI::ExistingFile);
    gain->add_option("--rho", rho, "one-sided Lipschitz constant")->capture_default_str();
    gain->add_option("--mu", mu, "inner-boundedness mu")->capture_default_str();
    gain->add_option("--varphi", varphi, "inner-boundedness varphi")->capture_default_str();
    gain->add_flag("--estimate", estimate, "estimate (rho, mu, varphi) by sampling instead");
    gain->add_flag("--relax", relax, "divide mu by 10 until feasible");
    gain->add_option("--seed", seed, "sampling seed for --estimate")->capture_default_str();
    gain->add_option("-o,--out", gain_out, "gain file; re-verified instead of re-solved when it exists");

    auto* compare = app.add_subcommand("compare", "merge summary.csv files into one ranking table");
    std::vector<std::string> dirs;
    compare->add_option("dirs", dirs, "run output directories")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, out_dir);
        if (*gain) return cmd_gain(case_path, rho, mu, varphi, estimate, relax, gain_out, seed);
        if (*compare) {
            std::vector<fs::path> paths(dirs.begin(), dirs.end());
            std::cout << dse::compare_runs(paths);
            return 0;
        }
    } catch (const dse::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
