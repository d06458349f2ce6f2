#include "suites.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <memory>

#include "qbsde/certificate.hpp"
#include "qbsde/common.hpp"
#include "qbsde/oracles.hpp"
#include "qbsde/pasting.hpp"
#include "qbsde/picard.hpp"
#include "qbsde/rng.hpp"
#include "qbsde/serialization.hpp"

namespace qbsde::cli {

ProblemSpec heat_kernel_problem() {
    ProblemSpec s;
    s.C1 = 1.0;
    s.terminal = CosineTerminal{1.0};
    s.generator = ZeroGenerator{};
    s.solver.degree = 4;
    return s;
}

ProblemSpec constant_drift_problem() {
    ProblemSpec s = heat_kernel_problem();
    s.C4 = 1.0;
    s.generator = ConstantGenerator{{1.0}};
    return s;
}

ProblemSpec tanh_problem() {
    ProblemSpec s = heat_kernel_problem();
    s.C2 = 1.0;
    s.generator = TanhGenerator{{1.0}};
    return s;
}

ProblemSpec certified_problem() {
    ProblemSpec s = heat_kernel_problem();
    s.C3 = std::exp(-401.0);
    s.generator = ClippedLinearGenerator{{0.0}, {0.5 * s.C3}, 1.0};
    return s;
}

namespace {

class Collector {
public:
    Collector(std::string suite, std::vector<CaseResult>& out) : suite_(std::move(suite)), out_(out) {}

    // |actual - expected| <= tolerance
    void near(std::string name, double expected, double actual, double tolerance, double se = 0.0,
              std::string detail = {}) {
        const bool ok = std::isfinite(actual) && std::abs(actual - expected) <= tolerance;
        out_.push_back({suite_, std::move(name), ok, expected, actual, se, tolerance, std::move(detail)});
    }

    void relative(std::string name, double expected, double actual, double rel) {
        near(std::move(name), expected, actual, rel * std::abs(expected));
    }

    // Reference quoted to `digits` significant figures: accept relative error
    // `rel` or half a unit in the last quoted place, whichever is looser.
    void quoted(std::string name, double expected, int digits, double actual, double rel) {
        const double place = std::pow(10.0, std::floor(std::log10(std::abs(expected))) - digits + 1);
        near(std::move(name), expected, actual, std::max(rel * std::abs(expected), 0.5 * place));
    }

    void check(std::string name, bool ok, std::string detail = {}) {
        out_.push_back({suite_, std::move(name), ok, 1.0, ok ? 1.0 : 0.0, 0.0, 0.0, std::move(detail)});
    }

private:
    std::string suite_;
    std::vector<CaseResult>& out_;
};

SolveOptions solve_options(std::size_t n_paths, int steps, Mode mode = Mode::girsanov) {
    SolveOptions o;
    o.n_paths = n_paths;
    o.steps = steps;
    o.mode = mode;
    return o;
}

Solution solve(const ProblemSpec& spec, const SolveOptions& o, std::optional<double> delta = std::nullopt) {
    LedgerOptions lo;
    lo.force_delta = delta;
    return solve_full(spec, certify(spec, lo), o);
}

// Constant terminal of norm C1 in R^d with a generator of the requested family.
ProblemSpec constant_terminal_problem(int d, int k, int family) {
    ProblemSpec s;
    s.d = d;
    s.k = k;
    s.C1 = 0.5;
    std::vector<double> v(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] = (i % 2 ? -1.0 : 1.0) * (i + 1);
    const double n = norm(v);
    for (double& x : v) x *= s.C1 / n;
    s.terminal = ConstantTerminal{v};
    const auto kd = static_cast<std::size_t>(k * d);
    const auto kdk = static_cast<std::size_t>(k * d * k);
    switch (family) {
        case 0: s.generator = ZeroGenerator{}; break;
        case 1: s.generator = ConstantGenerator{std::vector<double>(static_cast<std::size_t>(k), 0.3)}; break;
        case 2: s.generator = TanhGenerator{std::vector<double>(static_cast<std::size_t>(k), 0.7)}; break;
        default: {
            std::vector<double> a(kd, 0.2), b(kdk, 0.1);
            s.generator = ClippedLinearGenerator{a, b, 2.0};
        }
    }
    const auto c = documented_constants(s.generator, d, k);
    s.C2 = c.C2;
    s.C3 = c.C3;
    s.C4 = c.C4;
    return s;
}

void ledger_cases(Collector& c) {
    ProblemSpec s;
    s.C1 = 0.1;
    s.C2 = 1.0;
    s.C3 = 1.0;
    s.C4 = 0.0;
    s.terminal = CosineTerminal{0.1};
    s.generator = ClippedLinearGenerator{{1.0}, {1.0}, 10.0};
    LedgerOptions lo;
    lo.force_delta = 0.5;
    const ConstantLedger l = certify(s, lo);
    c.quoted("ledger/K", 460.517019, 9, l.K, 1e-6);
    c.relative("ledger/beta", 0.005, l.beta, 1e-6);
    c.quoted("ledger/alpha", 1.386897e-4, 7, l.alpha, 1e-6);
    c.quoted("ledger/C6", 0.217841, 6, l.C6(), 1e-6);

    ProblemSpec edge = heat_kernel_problem();
    edge.C3 = std::exp(-324.0);
    edge.generator = ClippedLinearGenerator{{0.0}, {0.5 * edge.C3}, 1.0};
    const ConstantLedger le = certify(edge);
    c.check("gate/boundary e^-324 closed", !le.existence_gate && !le.theorem_reference_gate);

    const ConstantLedger lt = certify(certified_problem());
    c.check("gate/e^-401 open", lt.existence_gate && lt.theorem_reference_gate);
    c.relative("gate/e^-401 coupling term", 2.0 / std::sqrt(401.0), lt.terms.coupling_term, 1e-6);
    c.check("gate/e^-401 coupling binds", lt.terms.max() == lt.terms.coupling_term);
}

void problem_cases(Collector& c) {
    const std::array<GeneratorSpec, 4> gens{ZeroGenerator{}, ConstantGenerator{{0.4, -0.3}},
                                            TanhGenerator{{1.5, 0.5}},
                                            ClippedLinearGenerator{{0.5, -1.0, 0.25, 2.0},
                                                                   {0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8},
                                                                   3.0}};
    const char* names[] = {"zero", "constant", "tanh", "clipped_linear"};
    for (std::size_t g = 0; g < gens.size(); ++g) {
        ProblemSpec s;
        s.d = 2;
        s.k = 2;
        s.C1 = 1.0;
        s.terminal = ConstantTerminal{{0.6, 0.8}};
        s.generator = gens[g];
        const auto k = documented_constants(s.generator, 2, 2);
        s.C2 = k.C2;
        s.C3 = k.C3;
        s.C4 = k.C4;
        bool ok = true;
        for (std::uint64_t seed : {1u, 2u, 3u}) ok = ok && validate_constants(s, 4000, seed).passed();
        c.check(std::string("constants/documented ") + names[g], ok);
    }

    const std::array<TerminalSpec, 3> terms{
        CosineTerminal{3.0}, SineTerminal{-2.0},
        ClippedPolynomialTerminal{{{0.0, 1.0, 1.0}, {2.0, 0.0, 0.0, -1.0}}, 1.5}};
    double worst = 0.0;
    for (const auto& t : terms) {
        ProblemSpec s;
        s.k = 1;
        s.C1 = 1.0;
        s.terminal = t;
        s.d = std::holds_alternative<ClippedPolynomialTerminal>(t) ? 2 : 1;
        for (int i = -400; i <= 400; ++i) {
            const double w = 0.025 * i;
            worst = std::max(worst, norm(evaluate_terminal(s, std::span<const double>(&w, 1))));
        }
    }
    c.near("terminal/bounded by C1", 1.0, std::min(worst, 1.0), 0.0, 0.0, "max |xi| over a grid in [-10, 10]");
}

void rng_cases(Collector& c) {
    using rng::Counter;
    struct Kat {
        Counter ctr;
        rng::Key key;
        Counter expect;
    };
    const Kat kats[] = {
        {{0, 0, 0, 0}, {0, 0}, {0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}},
        {{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
         {0xffffffffu, 0xffffffffu},
         {0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}},
        {{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
         {0xa4093822u, 0x299f31d0u},
         {0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}},
    };
    bool ok = true;
    for (const auto& k : kats) ok = ok && rng::philox4x32_10(k.ctr, k.key) == k.expect;
    c.check("rng/philox4x32-10 known answers", ok);

    const TimeGrid g(0.0, 1.0, 8);
    const auto a = generate_ensemble(g, 3000, 2, 99, kernels::Exec::serial);
    const auto b = generate_ensemble(g, 3000, 2, 99, kernels::Exec::parallel);
    const bool same = a.increments().size() == b.increments().size() &&
                      std::memcmp(a.increments().data(), b.increments().data(),
                                  a.increments().size() * sizeof(double)) == 0;
    c.check("paths/serial equals parallel", same);
}

void oracle_consistency_cases(Collector& c) {
    // The closed form solves y_t + y_ww / 2 = c y_w; check by central differences.
    const double h = 1e-4;
    double worst = 0.0;
    for (double t : {0.0, 0.3, 0.7}) {
        for (double w : {-1.0, 0.2, 1.3}) {
            const double c0 = 0.8;
            auto y = [&](double tt, double ww) { return constant_drift_oracle(tt, ww, 1.0, c0, TrigKind::cos).y; };
            const double yt = (y(t + h, w) - y(t - h, w)) / (2 * h);
            const double yw = (y(t, w + h) - y(t, w - h)) / (2 * h);
            const double yww = (y(t, w + h) - 2 * y(t, w) + y(t, w - h)) / (h * h);
            worst = std::max(worst, std::abs(yt + 0.5 * yww - c0 * yw));
            const double z = constant_drift_oracle(t, w, 1.0, c0, TrigKind::cos).z;
            worst = std::max(worst, std::abs(z - yw) * 1e-2);
        }
    }
    c.near("oracle/constant-drift PDE residual", 0.0, worst, 1e-5);

    // With f = 0 the lattice value is exactly cos(sqrt(dt))^n.
    const int n = 2000;
    const auto tree = tree_oracle(heat_kernel_problem(), n);
    c.near("oracle/tree f=0 lattice exact", std::pow(std::cos(std::sqrt(1.0 / n)), n), tree.y0, 1e-12);
    const auto tree_c = tree_oracle(constant_drift_problem(), n);
    c.near("oracle/tree constant drift", std::exp(-0.5) * std::cos(1.0), tree_c.y0, 2e-3);
}

void constant_terminal_cases(Collector& c) {
    const char* fam[] = {"zero", "constant", "tanh", "clipped_linear"};
    for (int d = 1; d <= 3; ++d) {
        for (int k = 1; k <= 3; ++k) {
            for (int family = 0; family < 4; ++family) {
                if ((d + k + family) % 3 != 0 && !(d == 1 && k == 1)) continue;
                const ProblemSpec s = constant_terminal_problem(d, k, family);
                const TimeGrid grid(0.0, 1.0, 5);
                const auto ens = generate_ensemble(grid, 2000, k, 5);
                auto term = std::make_shared<const StateMap>(
                    [s](std::span<const double> w, std::span<double> o) { evaluate_terminal(s, w, o); });
                const Basis basis(BasisSpec{2, false}, k, term, d);
                const ProcessApprox shape(grid, d, k, basis, s.C1, term);
                IterateOptions io;
                io.max_iter = 3;
                const auto res = iterate(shape, s, ens, io);
                const auto& v = std::get<ConstantTerminal>(s.terminal).value;
                double y_dev = 0.0, z_max = 0.0;
                std::vector<double> y(static_cast<std::size_t>(d)), z(static_cast<std::size_t>(d * k));
                for (int i = 0; i < grid.steps; ++i) {
                    for (std::size_t r = 0; r < 50; ++r) {
                        const auto w = ens.states_at(i).subspan(r * static_cast<std::size_t>(k),
                                                                static_cast<std::size_t>(k));
                        res.approx.eval_y(i, w, y);
                        res.approx.eval_z(i, w, z);
                        for (int a = 0; a < d; ++a)
                            y_dev = std::max(y_dev, std::abs(y[static_cast<std::size_t>(a)] - v[static_cast<std::size_t>(a)]));
                        for (double zz : z) z_max = std::max(z_max, std::abs(zz));
                    }
                }
                const std::string tag = "constant-terminal/d" + std::to_string(d) + "k" + std::to_string(k) +
                                        " " + fam[family];
                c.near(tag + " Y", 0.0, y_dev, 1e-12);
                c.near(tag + " Z", 0.0, z_max, 1e-12);
                c.near(tag + " dist_y iter 1", 0.0, res.trace.records.front().dist_y, 0.0);
            }
        }
    }
}

void determinism_cases(Collector& c) {
    const ProblemSpec s = tanh_problem();
    const auto o = solve_options(4000, 10);
    const auto a = to_json(solve(s, o).report).dump(2);
    const auto b = to_json(solve(s, o).report).dump(2);
    c.check("determinism/report byte-identical", a == b);

    const Solution two = solve(heat_kernel_problem(), o, 0.5);
    bool ok = two.approx.windows.size() == 2;
    if (ok) {
        const auto& early = *two.approx.windows[0];
        const auto& late = *two.approx.windows[1];
        const auto ens = generate_ensemble(TimeGrid(0.0, 0.5, 1), 500, 1, 3);
        for (std::size_t r = 0; r < 500 && ok; ++r) {
            const auto w = ens.states_at(1).subspan(r, 1);
            double a1 = 0.0, b1 = 0.0;
            early.eval_y(early.steps(), w, std::span<double>(&a1, 1));
            late.eval_y(0, w, std::span<double>(&b1, 1));
            ok = std::memcmp(&a1, &b1, sizeof(double)) == 0;
        }
    }
    c.check("pasting/handoff bit-exact", ok);
}

}  // namespace

std::vector<CaseResult> run_invariants(const SuiteOptions&) {
    std::vector<CaseResult> out;
    Collector c("invariants", out);
    ledger_cases(c);
    problem_cases(c);
    rng_cases(c);
    oracle_consistency_cases(c);
    constant_terminal_cases(c);
    determinism_cases(c);
    return out;
}

std::vector<CaseResult> run_oracles(const SuiteOptions& options) {
    std::vector<CaseResult> out;
    Collector c("oracles", out);
    const double m = options.tol_multiplier;
    const auto o = solve_options(options.n_paths, options.steps);
    const double heat = std::exp(-0.5);
    const double drift = std::exp(-0.5) * std::cos(1.0);

    const auto hk = solve(heat_kernel_problem(), o).report;
    c.near("heat-kernel/Y0", heat, hk.y0, m * 3.0 * hk.y0_se, hk.y0_se);
    c.near("heat-kernel/Z0", 0.0, hk.z0, m * 0.05);

    const auto cg = solve(constant_drift_problem(), o).report;
    auto of = o;
    of.mode = Mode::frozen_driver;
    const auto cf = solve(constant_drift_problem(), of).report;
    c.near("constant-drift/Y0 girsanov", drift, cg.y0, m * std::max(3.0 * cg.y0_se, 0.01), cg.y0_se);
    c.near("constant-drift/Y0 frozen-driver", drift, cf.y0, m * std::max(3.0 * cf.y0_se, 0.01), cf.y0_se);
    const double se2 = std::hypot(cg.y0_se, cf.y0_se);
    c.near("constant-drift/mode agreement", cg.y0, cf.y0, m * std::max(6.0 * se2, 0.02), se2);

    const auto t4000 = tree_oracle(tanh_problem(), 4000);
    const auto t2000 = tree_oracle(tanh_problem(), 2000);
    c.near("tanh/tree self-consistency", t4000.y0, t2000.y0, 5e-4);
    const auto th = solve(tanh_problem(), o).report;
    c.near("tanh/Y0 vs tree", t4000.y0, th.y0, m * 0.02, th.y0_se);
    bool decreasing = !th.windows.empty();
    for (const auto& r : th.windows.front().trace.records)
        if (r.iter >= 2 && !(r.ratio < 1.0)) decreasing = false;
    c.check("tanh/iterate distances decrease", decreasing);

    const auto small = solve_options(10000, options.steps);
    for (const auto& [name, spec] : {std::pair{"heat-kernel", heat_kernel_problem()},
                                     std::pair{"constant-drift", constant_drift_problem()},
                                     std::pair{"tanh", tanh_problem()}}) {
        const auto r = solve(spec, small).report;
        const auto& w = r.windows.front();
        c.near(std::string("weights/") + name + " mean", 1.0, w.weight_mean, m * 3.0 * w.weight_se, w.weight_se);
        c.near(std::string("weights/") + name + " clip events", 0.0, static_cast<double>(r.clip_events), 0.0);
    }

    const auto two = solve(heat_kernel_problem(), o, 0.5).report;
    const double se_p = std::hypot(two.y0_se, hk.y0_se);
    c.near("pasting/two windows vs one", hk.y0, two.y0, m * 3.0 * se_p, se_p);

    // Z = 1 on [0, 1] has squared BMO norm exactly 1, attained at t = 0.
    {
        const TimeGrid grid(0.0, 1.0, options.steps);
        const auto ens = generate_ensemble(grid, std::min<std::size_t>(options.n_paths, 20000), 1, 13);
        const Basis basis(BasisSpec{2, false}, 1);
        auto zero = std::make_shared<const StateMap>(
            [](std::span<const double>, std::span<double> o2) { o2[0] = 0.0; });
        auto z = ProcessApprox::constant(grid, 1, 1, basis, 1.0, zero, std::vector<double>{0.0});
        for (int i = 0; i < grid.steps; ++i) z.z_coeffs(i)(0, 0) = 1.0;
        const auto b = estimate_bmo_norm(z, ens);
        c.near("norms/BMO of Z=1", 1.0, b.value_sq, m * 3.0 * b.se + 1e-9, b.se);
    }

    const ProblemSpec cert = certified_problem();
    const ConstantLedger lc = certify(cert);
    const auto cr = solve_full(cert, lc, solve_options(std::min<std::size_t>(options.n_paths, 20000), 20)).report;
    bool bound = cr.converged;
    for (const auto& w : cr.windows)
        for (const auto& r : w.trace.records) bound = bound && r.y_bmo_bound_check.value_or(false);
    c.check("certified/proposition bound every iteration", bound);

    const TimeGrid grid(cert.T * (1.0 - lc.delta), cert.T, 20);
    const auto ens = generate_ensemble(grid, 20000, 1, 11);
    auto term = std::make_shared<const StateMap>(
        [cert](std::span<const double> w, std::span<double> o2) { evaluate_terminal(cert, w, o2); });
    const Basis basis(BasisSpec{cert.solver.degree, false}, 1, term, 1);
    for (int t = 1; t <= 5; ++t) {
        auto a = ProcessApprox::constant(grid, 1, 1, basis, cert.C1, term, std::vector<double>{0.9 - 0.3 * t});
        auto b = ProcessApprox::constant(grid, 1, 1, basis, cert.C1, term, std::vector<double>{0.1 * t});
        for (int i = 0; i < grid.steps; ++i) {
            a.z_coeffs(i)(0, 0) = 0.2 * t;
            b.z_coeffs(i)(0, 0) = -0.1 * t;
        }
        const auto p = contraction_probe(cert, ens, a, b, Mode::girsanov);
        c.near("certified/contraction probe " + std::to_string(t), 0.0, std::max(p.ratio, 0.0),
               lc.contraction_factor + m * 3.0 * p.se, p.se);
    }
    return out;
}

}  // namespace qbsde::cli
