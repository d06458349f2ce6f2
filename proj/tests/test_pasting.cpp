#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "qbsde/certificate.hpp"
#include "qbsde/common.hpp"
#include "qbsde/pasting.hpp"
#include "suites.hpp"

using namespace qbsde;

namespace {

SolveOptions small(std::size_t n = 4000, int steps = 10) {
    SolveOptions o;
    o.n_paths = n;
    o.steps = steps;
    return o;
}

ConstantLedger forced(const ProblemSpec& s, double delta) {
    LedgerOptions lo;
    lo.force_delta = delta;
    return certify(s, lo);
}

}  // namespace

TEST(Windows, BoundariesFromTheEnd) {
    const auto b = window_boundaries(2.0, 0.4, 3);
    ASSERT_EQ(b.size(), 4u);
    EXPECT_EQ(b[0], 2.0);
    EXPECT_DOUBLE_EQ(b[1], 1.2);
    EXPECT_DOUBLE_EQ(b[2], 0.4);
    EXPECT_EQ(b[3], 0.0);
    EXPECT_THROW(window_boundaries(1.0, 0.0, 1), InputError);
}

TEST(Solve, UncertifiedRunsOneBestEffortWindow) {
    const auto sol = solve_full(cli::tanh_problem(), certify(cli::tanh_problem()), small());
    EXPECT_TRUE(sol.report.best_effort);
    EXPECT_EQ(sol.report.windows.size(), 1u);
    EXPECT_FALSE(sol.report.warnings.empty());
    EXPECT_TRUE(sol.report.converged);
    ASSERT_TRUE(sol.report.oracle.has_value());
    EXPECT_EQ(sol.report.oracle->name, "tree");
    EXPECT_NEAR(sol.report.y0, sol.report.oracle->reference, 0.03);
}

TEST(Solve, ForcedDeltaPastesWindowsWithExactHandoff) {
    const auto spec = cli::heat_kernel_problem();
    const auto sol = solve_full(spec, forced(spec, 0.3), small());
    const auto& rep = sol.report;
    ASSERT_EQ(rep.windows.size(), 4u);  // ceil(1 / 0.3)
    EXPECT_EQ(rep.windows[0].t1, 1.0);
    EXPECT_EQ(rep.windows.back().t0, 0.0);
    for (std::size_t j = 1; j < rep.windows.size(); ++j) {
        EXPECT_EQ(rep.windows[j].t1, rep.windows[j - 1].t0);
        EXPECT_NE(rep.windows[j].seed, rep.windows[j - 1].seed);
    }

    const auto& ws = sol.approx.windows;
    ASSERT_EQ(ws.size(), 4u);
    for (std::size_t j = 0; j + 1 < ws.size(); ++j) {
        for (double w : {-1.3, 0.0, 0.42, 2.0}) {
            double a = 0.0, b = 0.0;
            ws[j]->eval_y(ws[j]->steps(), std::span<const double>(&w, 1), std::span<double>(&a, 1));
            ws[j + 1]->eval_y(0, std::span<const double>(&w, 1), std::span<double>(&b, 1));
            EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
        }
    }
    EXPECT_EQ(sol.approx.locate(0.0), 0u);
    EXPECT_EQ(sol.approx.locate(0.95), 3u);
    EXPECT_EQ(sol.approx.locate(1.0), 3u);
    EXPECT_NEAR(rep.y0, std::exp(-0.5), 0.05);
}

TEST(Solve, CertifiedRunCarriesLedgerChecks) {
    const auto spec = cli::certified_problem();
    const auto L = certify(spec);
    const auto sol = solve_full(spec, L, small(4000, 10));
    const auto& rep = sol.report;
    EXPECT_FALSE(rep.best_effort);
    EXPECT_EQ(static_cast<int>(rep.windows.size()), L.windows);
    ASSERT_TRUE(rep.tilde_R_check.has_value());
    EXPECT_TRUE(*rep.tilde_R_check);
    for (const auto& w : rep.windows)
        for (const auto& r : w.trace.records) EXPECT_EQ(r.y_bmo_bound_check, std::optional<bool>(true));
}

TEST(Solve, NonConvergedWindowIsReportedNotFatal) {
    auto spec = cli::tanh_problem();
    spec.solver.max_iter = 1;
    const auto sol = solve_full(spec, forced(spec, 0.5), small(2000, 5));
    EXPECT_FALSE(sol.report.converged);
    EXPECT_EQ(sol.report.failing_windows, (std::vector<int>{0, 1}));
    EXPECT_EQ(sol.report.windows.size(), 2u);
}

TEST(Solve, RejectsEmptyRun) {
    auto o = small();
    o.n_paths = 0;
    EXPECT_THROW(solve_full(cli::tanh_problem(), certify(cli::tanh_problem()), o), InputError);
}
