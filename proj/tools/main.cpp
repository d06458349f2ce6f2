#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "qbsde/common.hpp"

int main(int argc, char** argv) {
    using namespace qbsde::cli;

    CLI::App app{"Quadratic BSDE laboratory: constant ledger, Picard solver, validation"};
    app.set_version_flag("--version", std::string(qbsde::version()));
    app.require_subcommand(1);

    std::string config;
    CertifyFlags cf;
    auto* certify = app.add_subcommand("certify", "Print the constant ledger of a problem");
    certify->add_option("config", config, "Problem JSON")->required();
    certify->add_option("--lambda-grid", cf.lambda_grid, "Points in the logarithmic lambda grid");
    certify->add_option("--delta-grid", cf.delta_grid, "Denominator of the delta grid m/N");
    certify->add_option("--force-delta", cf.force_delta, "Evaluate the ledger at this delta");

    SolveFlags sf;
    auto* solve = app.add_subcommand("solve", "Solve on [0, T] and print the report");
    solve->add_option("config", config, "Problem JSON")->required();
    solve->add_option("--paths", sf.paths, "Paths per window");
    solve->add_option("--steps", sf.steps, "Time steps per window");
    solve->add_option("--seed", sf.seed, "Master seed");
    solve->add_option("--mode", sf.mode, "girsanov or frozen-driver");
    solve->add_option("--force-delta", sf.force_delta, "Window length as a fraction of T");
    std::string trace;
    solve->add_option("--trace", trace, "Trace CSV path (default: <config>.trace.csv)");

    ValidateFlags vf;
    auto* validate = app.add_subcommand("validate", "Run the built-in oracle and invariant suites");
    validate->add_option("--suite", vf.suite, "oracles, invariants or all");
    validate->add_option("--tol-multiplier", vf.tol_multiplier, "Scale for statistical tolerances");
    validate->add_option("--paths", vf.paths, "Paths for the statistical cases");
    std::string table;
    validate->add_option("--table", table, "Audit a tabulated generator against its declared constants");

    ContractionFlags kf;
    auto* contraction = app.add_subcommand("contraction", "Probe the contraction estimate of the Picard map");
    contraction->add_option("config", config, "Problem JSON")->required();
    contraction->add_option("--trials", kf.trials, "Independent start pairs");
    contraction->add_option("--seed", kf.seed, "Seed for ensemble and starts");
    contraction->add_option("--paths", kf.paths, "Paths in the probe ensemble");
    contraction->add_option("--steps", kf.steps, "Time steps on the probed window");
    contraction->add_option("--mode", kf.mode, "girsanov or frozen-driver");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    if (*certify) return cmd_certify(config, cf, std::cout, std::cerr);
    if (*solve) {
        if (!trace.empty()) sf.trace_path = trace;
        return cmd_solve(config, sf, std::cout, std::cerr);
    }
    if (*validate) {
        if (!table.empty()) vf.table = table;
        return cmd_validate(vf, std::cout, std::cerr);
    }
    return cmd_contraction(config, kf, std::cout, std::cerr);
}
