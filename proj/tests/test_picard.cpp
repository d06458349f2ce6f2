#include <gtest/gtest.h>

#include <cmath>

#include "qbsde/common.hpp"
#include "qbsde/picard.hpp"
#include "suites.hpp"

using namespace qbsde;

namespace {

struct Window {
    ProblemSpec spec;
    TimeGrid grid;
    PathEnsemble ensemble;
    ProcessApprox shape;
};

Window make_window(const ProblemSpec& spec, std::size_t n, int steps, std::uint64_t seed, double t0 = 0.0) {
    const TimeGrid grid(t0, spec.T, steps);
    auto term = std::make_shared<const StateMap>(
        [spec](std::span<const double> w, std::span<double> o) { evaluate_terminal(spec, w, o); });
    const Basis basis(BasisSpec{spec.solver.degree, false}, spec.k, term, spec.d);
    return {spec, grid, generate_ensemble(grid, n, spec.k, seed), ProcessApprox(grid, spec.d, spec.k, basis, spec.C1, term)};
}

}  // namespace

TEST(Mode, Parse) {
    EXPECT_EQ(parse_mode("girsanov"), Mode::girsanov);
    EXPECT_EQ(parse_mode("frozen-driver"), Mode::frozen_driver);
    EXPECT_EQ(parse_mode("frozen_driver"), Mode::frozen_driver);
    EXPECT_THROW(parse_mode("euler"), ConfigError);
    EXPECT_STREQ(to_string(Mode::frozen_driver), "frozen-driver");
}

TEST(Phi, InitialIterateIsClippedTerminalMean) {
    const auto w = make_window(cli::heat_kernel_problem(), 20000, 5, 1);
    const auto init = initial_iterate(w.shape, w.ensemble);
    double y = 0.0;
    const double origin = 0.0;
    init.eval_y(0, std::span<const double>(&origin, 1), std::span<double>(&y, 1));
    EXPECT_NEAR(y, std::exp(-0.5), 0.02);
    double z = 1.0;
    init.eval_z(2, std::span<const double>(&origin, 1), std::span<double>(&z, 1));
    EXPECT_EQ(z, 0.0);
    EXPECT_EQ(sup_distance(init, init, w.ensemble), 0.0);
}

TEST(Phi, HeatKernelOneStepBothModes) {
    const auto w = make_window(cli::heat_kernel_problem(), 40000, 20, 2);
    const auto init = initial_iterate(w.shape, w.ensemble);
    for (Mode m : {Mode::girsanov, Mode::frozen_driver}) {
        const auto r = phi_step(init, w.spec, w.ensemble, m);
        EXPECT_NEAR(r.diagnostics.y0, std::exp(-0.5), 4.0 * r.diagnostics.y0_se + 1e-3);
        EXPECT_NEAR(r.diagnostics.z0, 0.0, 0.05);
        EXPECT_EQ(r.diagnostics.clip_events, 0u);
    }
}

TEST(Phi, ZeroGeneratorConvergesAfterOneStep) {
    // with f = 0 the map ignores its input, so iteration 2 reproduces iteration 1
    const auto w = make_window(cli::heat_kernel_problem(), 5000, 10, 3);
    const auto res = iterate(w.shape, w.spec, w.ensemble, IterateOptions{});
    ASSERT_EQ(res.trace.records.size(), 2u);
    EXPECT_EQ(res.trace.verdict, Verdict::converged);
    EXPECT_EQ(res.trace.records[1].dist_y, 0.0);
    EXPECT_EQ(res.trace.records[1].dist_z, 0.0);
    EXPECT_TRUE(std::isnan(res.trace.records[0].ratio));
}

TEST(Phi, TanhIterationContracts) {
    const auto w = make_window(cli::tanh_problem(), 20000, 20, 4);
    IterateOptions o;
    o.tol = 1e-7;
    const auto res = iterate(w.shape, w.spec, w.ensemble, o);
    EXPECT_TRUE(res.trace.converged());
    for (const auto& r : res.trace.records) {
        if (r.iter >= 2) {
            EXPECT_LT(r.ratio, 1.0) << "iteration " << r.iter;
        }
    }
}

TEST(Phi, BudgetExhaustedReportsMaxIter) {
    const auto w = make_window(cli::tanh_problem(), 5000, 10, 5);
    IterateOptions o;
    o.max_iter = 2;
    o.tol = 1e-30;
    const auto res = iterate(w.shape, w.spec, w.ensemble, o);
    EXPECT_EQ(res.trace.records.size(), 2u);
    EXPECT_EQ(res.trace.verdict, Verdict::max_iter);
}

TEST(PropBound, Arithmetic) {
    ConstantLedger L;
    L.C6_log = std::log(0.2);
    EXPECT_TRUE(check_prop_bound(1.0, 0.0, 0.7, 0.0, L));
    EXPECT_FALSE(check_prop_bound(1.0, 0.0, 0.71, 0.0, L));
    EXPECT_TRUE(check_prop_bound(1.0, 0.0, 0.71, 0.01, L));
    L.C6_log = 800.0;
    EXPECT_TRUE(check_prop_bound(1.0, 0.0, 1e300, 0.0, L));
    L.C6_log = std::nan("");
    EXPECT_FALSE(check_prop_bound(0.0, 0.0, 0.0, 0.0, L));
}

TEST(Probe, IdenticalStartsGiveZero) {
    const auto w = make_window(cli::tanh_problem(), 4000, 10, 6);
    const auto a = initial_iterate(w.shape, w.ensemble);
    const auto p = contraction_probe(w.spec, w.ensemble, a, a, Mode::girsanov);
    EXPECT_EQ(p.ratio, 0.0);
    EXPECT_EQ(p.denominator, 0.0);
}

TEST(Probe, DistinctStartsContractForSmallLipschitz) {
    ProblemSpec s = cli::tanh_problem();
    s.generator = TanhGenerator{{0.05}};
    s.C2 = 0.05;
    const auto w = make_window(s, 10000, 10, 7);
    const auto a = ProcessApprox::constant(w.grid, 1, 1, w.shape.basis(), 1.0, w.shape.terminal(), std::vector<double>{0.8});
    const auto b = ProcessApprox::constant(w.grid, 1, 1, w.shape.basis(), 1.0, w.shape.terminal(), std::vector<double>{-0.8});
    const auto p = contraction_probe(s, w.ensemble, a, b, Mode::girsanov);
    EXPECT_GT(p.denominator, 0.0);
    EXPECT_LT(p.ratio, 0.5);
}
