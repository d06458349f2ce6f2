#include "commands.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "qbsde/certificate.hpp"
#include "qbsde/common.hpp"
#include "qbsde/pasting.hpp"
#include "qbsde/picard.hpp"
#include "qbsde/rng.hpp"
#include "qbsde/serialization.hpp"
#include "suites.hpp"

namespace qbsde::cli {

namespace {

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

void require_flag(bool ok, const char* flag, const char* message) {
    if (!ok) throw ConfigError(flag, std::string(flag) + " " + message);
}

// A start point for the contraction probe: Y with a random constant inside
// the C1 ball plus small random slopes, Z with a random constant whose BMO
// norm over the window stays below R / 2.
ProcessApprox random_start(const ProcessApprox& shape, const ConstantLedger& ledger, std::uint64_t seed,
                           std::uint64_t trial) {
    std::uint32_t slot = 0;
    auto normal = [&] { return rng::gaussian_pair(seed, rng::Stream::probe, trial, 0, slot++).first; };
    const int d = shape.d();
    const int k = shape.k();
    std::vector<double> y0(static_cast<std::size_t>(d));
    for (double& v : y0) v = normal();
    const double r = norm(y0);
    const double u = rng::uniform_pair(seed, rng::Stream::probe, trial, 1, 0).first;
    const double radius = shape.clip_bound() * std::pow(u, 1.0 / d);
    for (double& v : y0) v = r > 0.0 ? v * radius / r : 0.0;

    ProcessApprox a = ProcessApprox::constant(shape.grid(), d, k, shape.basis(), shape.clip_bound(),
                                              shape.terminal(), y0);
    std::vector<double> z(static_cast<std::size_t>(d * k));
    for (double& v : z) v = normal();
    const double span = shape.grid().t1 - shape.grid().t0;
    const double bmo_sq = std::inner_product(z.begin(), z.end(), z.begin(), 0.0) * span;
    const double cap = std::isnan(ledger.R_log) ? 1.0 : 0.5 * std::exp(std::min(ledger.R_log, 700.0));
    const double shrink = bmo_sq > cap ? std::sqrt(cap / bmo_sq) : 1.0;
    for (int i = 0; i < a.steps(); ++i) {
        auto& yc = a.y_coeffs(i);
        for (Eigen::Index row = 1; row < yc.rows(); ++row)
            for (Eigen::Index c = 0; c < yc.cols(); ++c) yc(row, c) = 0.1 * shape.clip_bound() * normal();
        for (int c = 0; c < d * k; ++c) a.z_coeffs(i)(0, c) = shrink * z[static_cast<std::size_t>(c)];
    }
    return a;
}

}  // namespace

std::filesystem::path default_trace_path(const std::filesystem::path& config) {
    auto p = config;
    p.replace_extension(".trace.csv");
    return p;
}

int cmd_certify(const std::filesystem::path& config, const CertifyFlags& flags, std::ostream& out,
                std::ostream& err) {
    return guarded(err, [&] {
        require_flag(flags.lambda_grid >= 1, "--lambda-grid", "must be >= 1");
        require_flag(flags.delta_grid >= 2, "--delta-grid", "must be >= 2");
        const ProblemSpec spec = load_problem(config);
        LedgerOptions opts{flags.lambda_grid, flags.delta_grid, flags.force_delta};
        const ConstantLedger ledger = certify(spec, opts);
        out << to_json(ledger).dump(2) << '\n';
        if (!ledger.existence_gate) {
            err << "not certified: " << (ledger.note.empty() ? "existence gate closed" : ledger.note) << '\n';
            return static_cast<int>(kNotCertified);
        }
        return static_cast<int>(kOk);
    });
}

int cmd_solve(const std::filesystem::path& config, const SolveFlags& flags, std::ostream& out,
              std::ostream& err) {
    return guarded(err, [&] {
        require_flag(flags.paths >= 1, "--paths", "must be >= 1");
        require_flag(flags.steps >= 1, "--steps", "must be >= 1");
        const Mode mode = parse_mode(flags.mode);
        const ProblemSpec spec = load_problem(config);
        LedgerOptions lopts;
        lopts.force_delta = flags.force_delta;
        const ConstantLedger ledger = certify(spec, lopts);

        SolveOptions sopts;
        sopts.n_paths = flags.paths;
        sopts.steps = flags.steps;
        sopts.seed = flags.seed;
        sopts.mode = mode;
        const Solution sol = solve_full(spec, ledger, sopts);
        const SolveReport& rep = sol.report;
        for (const auto& w : rep.warnings) err << "warning: " << w << '\n';

        const auto trace_path = flags.trace_path.value_or(default_trace_path(config));
        std::ofstream csv(trace_path);
        if (!csv) throw InputError("cannot write trace " + trace_path.string());
        write_trace_csv(csv, rep);

        out << to_json(rep).dump(2) << '\n';
        if (!rep.converged) {
            for (int j : rep.failing_windows) err << "window " << j << " did not converge\n";
            return static_cast<int>(kNotConverged);
        }
        return static_cast<int>(kOk);
    });
}

int cmd_validate(const ValidateFlags& flags, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        require_flag(flags.tol_multiplier >= 0.0, "--tol-multiplier", "must be >= 0");
        require_flag(flags.paths >= 100, "--paths", "must be >= 100");
        if (flags.table) {
            const GeneratorTable t = load_generator_table(*flags.table);
            const ValidationReport rep = validate_generator_table(t.rows, t.d, t.k, t.C2, t.C3, t.C4);
            out << to_json(rep).dump(2) << '\n';
            return static_cast<int>(rep.passed() ? kOk : kNotCertified);
        }
        require_flag(flags.suite == "all" || flags.suite == "oracles" || flags.suite == "invariants",
                     "--suite", "must be one of oracles, invariants, all");
        SuiteOptions sopts;
        sopts.tol_multiplier = flags.tol_multiplier;
        sopts.n_paths = flags.paths;
        std::vector<CaseResult> cases;
        if (flags.suite != "oracles") {
            auto inv = run_invariants(sopts);
            cases.insert(cases.end(), inv.begin(), inv.end());
        }
        if (flags.suite != "invariants") {
            auto orc = run_oracles(sopts);
            cases.insert(cases.end(), orc.begin(), orc.end());
        }
        fmt::print(out, "{:<11} {:<44} {:>14} {:>14} {:>11} {:>11}  {}\n", "suite", "case", "expected",
                   "actual", "se", "tolerance", "result");
        int failures = 0;
        const CaseResult* first = nullptr;
        for (const auto& c : cases) {
            fmt::print(out, "{:<11} {:<44} {:>14.8g} {:>14.8g} {:>11.3e} {:>11.3e}  {}\n", c.suite, c.name,
                       c.expected, c.actual, c.se, c.tolerance, c.passed ? "pass" : "FAIL");
            if (!c.passed) {
                ++failures;
                if (!first) first = &c;
            }
        }
        fmt::print(out, "{} of {} cases passed\n", cases.size() - static_cast<std::size_t>(failures),
                   cases.size());
        if (first) {
            fmt::print(err, "first failure: {}/{}: expected {:.10g}, actual {:.10g}, se {:.3e}, tolerance {:.3e}{}{}\n",
                       first->suite, first->name, first->expected, first->actual, first->se,
                       first->tolerance, first->detail.empty() ? "" : "; ", first->detail);
            return static_cast<int>(kNotConverged);
        }
        return static_cast<int>(kOk);
    });
}

int cmd_contraction(const std::filesystem::path& config, const ContractionFlags& flags, std::ostream& out,
                    std::ostream& err) {
    return guarded(err, [&] {
        require_flag(flags.trials >= 1, "--trials", "must be >= 1");
        require_flag(flags.paths >= 100, "--paths", "must be >= 100");
        require_flag(flags.steps >= 1, "--steps", "must be >= 1");
        const Mode mode = parse_mode(flags.mode);
        const ProblemSpec spec = load_problem(config);
        const ConstantLedger ledger = certify(spec);
        if (!ledger.existence_gate) {
            err << "not certified; contraction probe not run"
                << (ledger.note.empty() ? "" : ": " + ledger.note) << '\n';
            return static_cast<int>(kNotCertified);
        }
        const TimeGrid grid(spec.T * (1.0 - ledger.delta), spec.T, flags.steps);
        const PathEnsemble ensemble = generate_ensemble(grid, flags.paths, spec.k, flags.seed);
        auto terminal = std::make_shared<const StateMap>(
            [spec](std::span<const double> w, std::span<double> o) { evaluate_terminal(spec, w, o); });
        const Basis basis(BasisSpec{spec.solver.degree, spec.solver.terminal_feature}, spec.k, terminal, spec.d);
        const ProcessApprox shape(grid, spec.d, spec.k, basis, spec.C1, terminal);

        const double bound = ledger.contraction_factor;
        fmt::print(out, "window [{:.6g}, {:.6g}], {} paths, {} steps, mode {}\n", grid.t0, grid.t1, flags.paths,
                   flags.steps, to_string(mode));
        fmt::print(out, "{:>6} {:>14} {:>12} {:>14}  {}\n", "trial", "ratio", "se", "bound", "result");
        const ProcessApprox same = random_start(shape, ledger, flags.seed, 0);
        const ProbeResult degenerate = contraction_probe(spec, ensemble, same, same, mode);
        fmt::print(out, "{:>6} {:>14.6e} {:>12.3e} {:>14.6e}  identical starts\n", 0, degenerate.ratio,
                   degenerate.se, bound);
        double worst = 0.0;
        bool ok = true;
        for (int t = 1; t <= flags.trials; ++t) {
            const auto a = random_start(shape, ledger, flags.seed, 2 * static_cast<std::uint64_t>(t) - 1);
            const auto b = random_start(shape, ledger, flags.seed, 2 * static_cast<std::uint64_t>(t));
            const ProbeResult p = contraction_probe(spec, ensemble, a, b, mode);
            const bool pass = p.ratio <= bound + 3.0 * p.se;
            ok = ok && pass;
            worst = std::max(worst, p.ratio);
            fmt::print(out, "{:>6} {:>14.6e} {:>12.3e} {:>14.6e}  {}\n", t, p.ratio, p.se, bound,
                       pass ? "pass" : "FAIL");
        }
        fmt::print(out, "max ratio {:.6e}, bound 4*lambda/(1-5*lambda) = {:.6e} (lambda = {:.6g})\n", worst,
                   bound, ledger.lambda);
        return static_cast<int>(ok ? kOk : kNotConverged);
    });
}

}  // namespace qbsde::cli
