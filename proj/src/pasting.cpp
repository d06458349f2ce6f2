#include "qbsde/pasting.hpp"

#include <algorithm>
#include <cmath>

#include "qbsde/common.hpp"
#include "qbsde/rng.hpp"

namespace qbsde {

std::size_t PastedApprox::locate(double t) const {
    if (windows.empty()) throw InputError("PastedApprox: no windows");
    for (std::size_t j = 0; j + 1 < windows.size(); ++j) {
        if (t < windows[j]->grid().t1) return j;
    }
    return windows.size() - 1;
}

void PastedApprox::eval_y(double t, std::span<const double> w, std::span<double> out) const {
    const auto& a = *windows[locate(t)];
    const double pos = (t - a.grid().t0) / a.grid().dt();
    const int i = std::clamp(static_cast<int>(std::floor(pos + 1e-9)), 0, a.steps());
    a.eval_y(i, w, out);
}

std::vector<double> window_boundaries(double T, double delta, int windows) {
    if (!(T > 0.0) || !(delta > 0.0) || windows < 1)
        throw InputError("window_boundaries: need T > 0, delta > 0, windows >= 1");
    std::vector<double> b{T};
    for (int j = 1; j < windows; ++j) b.push_back(T * (1.0 - j * delta));
    b.push_back(0.0);
    return b;
}

Solution solve_full(const ProblemSpec& spec, const ConstantLedger& ledger, const SolveOptions& options) {
    spec.validate();
    if (options.n_paths < 1 || options.steps < 1) throw InputError("solve_full: paths and steps must be >= 1");

    Solution sol;
    SolveReport& rep = sol.report;
    rep.ledger = ledger;
    rep.mode = options.mode;
    rep.n_paths = options.n_paths;
    rep.steps_per_window = options.steps;
    rep.master_seed = options.seed;
    rep.version = version();
    rep.best_effort = !ledger.existence_gate;

    const bool partitioned = ledger.existence_gate || ledger.delta_forced;
    const auto bounds = partitioned ? window_boundaries(spec.T, ledger.delta, ledger.windows)
                                    : std::vector<double>{spec.T, 0.0};
    const int n_windows = static_cast<int>(bounds.size()) - 1;
    if (!partitioned) {
        rep.warnings.push_back("no certified window length; solving on a single window [0, T]");
    }
    const ConstantLedger* check_ledger = std::isnan(ledger.C6_log) ? nullptr : &ledger;

    std::shared_ptr<const StateMap> terminal = std::make_shared<const StateMap>(
        [spec](std::span<const double> w, std::span<double> out) { evaluate_terminal(spec, w, out); });
    std::optional<NormContinuation> tail;
    std::vector<std::shared_ptr<const ProcessApprox>> solved;
    double m2_var = 0.0;

    for (int j = 0; j < n_windows; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const TimeGrid grid(bounds[ju + 1], bounds[ju], options.steps);
        const std::uint64_t seed = rng::mix_seed(options.seed, static_cast<std::uint64_t>(j));
        const PathEnsemble ensemble = generate_ensemble(grid, options.n_paths, spec.k, seed);

        const Basis basis(BasisSpec{spec.solver.degree, spec.solver.terminal_feature}, spec.k, terminal, spec.d);
        const ProcessApprox shape(grid, spec.d, spec.k, basis, spec.C1, terminal);

        IterateOptions it;
        it.mode = options.mode;
        it.max_iter = spec.solver.max_iter;
        it.tol = spec.solver.tol;
        it.ledger = check_ledger;
        it.tail = tail ? &*tail : nullptr;
        IterateResult res = iterate(shape, spec, ensemble, it);

        WindowReport wr;
        wr.index = j;
        wr.t0 = grid.t0;
        wr.t1 = grid.t1;
        wr.seed = seed;
        const BmoEstimate bmo = estimate_bmo_norm(res.approx, ensemble, it.tail);
        wr.z_bmo_sq = bmo.value_sq;
        wr.z_bmo_se = bmo.se;
        wr.z_m2 = estimate_m2_norm(res.approx, ensemble);
        wr.weight_mean = res.trace.last.weight_mean;
        wr.weight_se = res.trace.last.weight_se;
        for (const auto& r : res.trace.records) rep.clip_events += r.clip_events;
        for (const auto& msg : res.trace.warnings)
            rep.warnings.push_back("window " + std::to_string(j) + ", " + msg);
        if (!res.trace.converged()) rep.failing_windows.push_back(j);

        if (bmo.value_sq >= rep.z_bmo_sq) {
            rep.z_bmo_sq = bmo.value_sq;
            rep.z_bmo_se = bmo.se;
        }
        rep.z_m2.value += wr.z_m2.value;
        m2_var += wr.z_m2.se * wr.z_m2.se;
        if (j == n_windows - 1) {
            rep.y0 = res.trace.last.y0;
            rep.y0_se = res.trace.last.y0_se;
            rep.z0 = res.trace.last.z0;
        }
        wr.trace = std::move(res.trace);
        rep.windows.push_back(std::move(wr));

        auto approx = std::make_shared<const ProcessApprox>(std::move(res.approx));
        terminal = std::make_shared<const StateMap>(
            [approx](std::span<const double> w, std::span<double> out) { approx->eval_y(0, w, out); });
        tail = bmo.continuation;
        solved.push_back(std::move(approx));
    }
    rep.z_m2.se = std::sqrt(m2_var);
    rep.converged = rep.failing_windows.empty();

    if (!std::isnan(ledger.tilde_R_log)) {
        rep.tilde_R_check = ledger.tilde_R_log > 700.0 ||
                            rep.z_bmo_sq <= std::exp(ledger.tilde_R_log) + 3.0 * rep.z_bmo_se;
    }
    if (options.oracles) {
        if (auto ref = options.oracles->lookup(spec)) {
            OracleDeviation dev;
            dev.name = ref->name;
            dev.reference = ref->y0;
            dev.deviation = rep.y0 - ref->y0;
            dev.within_3se = std::abs(dev.deviation) <= 3.0 * rep.y0_se;
            rep.oracle = dev;
        }
    }
    std::reverse(solved.begin(), solved.end());
    sol.approx.windows = std::move(solved);
    return sol;
}

}  // namespace qbsde
