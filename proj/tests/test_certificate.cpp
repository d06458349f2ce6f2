#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "qbsde/certificate.hpp"
#include "qbsde/common.hpp"

using namespace qbsde;

namespace {

// Reference values evaluated independently in 30-digit arithmetic.
struct Reference {
    double C1, C2, C3, C4, deltaT;
    double K, beta, alpha, C6, drift, lipschitz, coupling;
};

constexpr Reference kRefs[] = {
    {0.1, 1.0, 1.0, 0.0, 0.5, 460.51701859880914, 0.005, 1.3868970789321057e-4, 0.21784068949109197,
     0.1414213562373095, 0.93346813441293638, 1.3201232957298859},
    {0.5, 0.3, 0.2, 0.1, 0.25, 18.420680743952365, 0.025, 8.6681067433256604e-3, 5.4828566909364332, 0.25,
     0.9934355562232298, 1.3245807416309731},
};

ProblemSpec spec_for(double C1, double C2, double C3, double C4) {
    ProblemSpec s;
    s.C1 = C1;
    s.C2 = C2;
    s.C3 = C3;
    s.C4 = C4;
    s.terminal = CosineTerminal{C1};
    return s;
}

}  // namespace

TEST(Ledger, ClosedFormsMatchReference) {
    for (const auto& r : kRefs) {
        const double K = compute_K(r.C1, r.C3);
        const double beta = compute_beta(r.C1, r.C3, K);
        const double alpha = compute_alpha(r.C1, r.C2, r.C3, r.C4, K, beta);
        EXPECT_NEAR(K, r.K, 1e-12 * r.K);
        EXPECT_NEAR(beta, r.beta, 1e-12 * r.beta);
        EXPECT_NEAR(alpha, r.alpha, 1e-12 * r.alpha);
        const double c6 = std::exp(compute_C6_log(r.C1, r.C2, r.C3, r.C4, alpha, K, r.deltaT));
        EXPECT_NEAR(c6, r.C6, 1e-12 * r.C6);

        const CertificateInputs in{r.C1, r.C2, r.C3, r.C4, K, alpha};
        const auto t = delta_terms(in, r.deltaT, 1.0);
        EXPECT_NEAR(t.drift_term, r.drift, 1e-12);
        EXPECT_NEAR(t.lipschitz_term, r.lipschitz, 1e-12);
        EXPECT_NEAR(t.coupling_term, r.coupling, 1e-12);
        EXPECT_DOUBLE_EQ(t.max(), std::max({r.drift, r.lipschitz, r.coupling}));
    }
}

TEST(Ledger, CertifyWithForcedDeltaReproducesReference) {
    const auto start = std::chrono::steady_clock::now();
    LedgerOptions o;
    o.force_delta = 0.5;
    const auto L = certify(spec_for(0.1, 1.0, 1.0, 0.0), o);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_LT(seconds, 1.0);
    EXPECT_NEAR(L.K, 460.517019, 1e-6 * 460.517019);
    EXPECT_NEAR(L.beta, 0.005, 1e-6 * 0.005);
    EXPECT_NEAR(L.alpha, 1.386897e-4, 1e-6 * 1.386897e-4);
    EXPECT_NEAR(L.C6(), 0.21784068949109197, 1e-12);
    EXPECT_NEAR(L.R(), 2.0 * L.C6(), 1e-12);
    EXPECT_EQ(L.windows, 2);
    EXPECT_TRUE(L.delta_forced);
    EXPECT_TRUE(L.prop_gate);
    EXPECT_FALSE(L.existence_gate);
}

TEST(Ledger, GateBoundaryAtEminus324) {
    const auto L = certify(spec_for(1.0, 0.0, std::exp(-324.0), 0.0));
    EXPECT_FALSE(L.existence_gate);
    EXPECT_FALSE(L.theorem_reference_gate);
    EXPECT_TRUE(L.prop_gate);
}

TEST(Ledger, TheoremGradeWithoutOverflow) {
    const auto start = std::chrono::steady_clock::now();
    const auto L = certify(spec_for(1.0, 0.0, std::exp(-401.0), 0.0));
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
    EXPECT_TRUE(L.existence_gate);
    EXPECT_TRUE(L.theorem_reference_gate);
    EXPECT_NEAR(L.terms.coupling_term, 2.0 / std::sqrt(401.0), 1e-9);
    EXPECT_DOUBLE_EQ(L.terms.max(), L.terms.coupling_term);
    // C6 = e^{802} / 802 is far outside double range; the log carries it.
    EXPECT_NEAR(L.C6_log, 802.0 - std::log(802.0), 1e-9);
    EXPECT_TRUE(std::isinf(L.C6()));
    EXPECT_LE(L.terms.max(), L.lambda);
    EXPECT_LT(L.lambda, 1.0 / 9.0);
    EXPECT_NEAR(L.contraction_factor, 4 * L.lambda / (1 - 5 * L.lambda), 1e-15);
    EXPECT_GE(L.windows, 1);
    EXPECT_EQ(L.windows, static_cast<int>(std::ceil(1.0 / L.delta)));
}

TEST(Ledger, LambdaGridAscendingBelowCap) {
    const auto g = lambda_grid(64);
    ASSERT_EQ(g.size(), 64u);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i - 1], g[i]);
    EXPECT_LT(g.back(), 1.0 / 9.0);
    EXPECT_GT(g.front(), 0.0);
    EXPECT_THROW(lambda_grid(0), InputError);
}

TEST(Ledger, DeltaSearchPicksLargestFeasible) {
    const double K = compute_K(1.0, 1e-200);
    const double a = compute_alpha(1.0, 0.0, 1e-200, 0.0, K, compute_beta(1.0, 1e-200, K));
    const CertificateInputs in{1.0, 0.0, 1e-200, 0.0, K, a};
    const auto choice = search_delta(in, 0.1, 1.0, 1024);
    EXPECT_LE(choice.terms.max(), 0.1);
    if (choice.delta < 1023.0 / 1024.0) {
        EXPECT_GT(delta_terms(in, choice.delta + 1.0 / 1024.0, 1.0).max(), 0.1);
    }
    const CertificateInputs hard{0.1, 1.0, 1.0, 0.0, compute_K(0.1, 1.0), 1e-4};
    EXPECT_FALSE(try_search_delta(hard, 0.01, 1.0, 64).has_value());
    EXPECT_THROW(search_delta(hard, 0.01, 1.0, 64), GateError);
}

TEST(Ledger, HypothesisFailureIsGateError) {
    EXPECT_THROW(compute_K(1.0, 1.0), GateError);
    const auto L = certify(spec_for(1.0, 0.0, 1.0, 0.0));
    EXPECT_FALSE(L.prop_gate);
    EXPECT_FALSE(L.existence_gate);
    EXPECT_FALSE(L.note.empty());
}

TEST(Ledger, DegenerateZeroConstants) {
    const auto L = certify(spec_for(1.0, 0.0, 0.0, 0.0));
    EXPECT_FALSE(L.existence_gate);
    EXPECT_TRUE(std::isnan(L.K));
    EXPECT_TRUE(std::isnan(L.C6_log));
    EXPECT_FALSE(L.note.empty());
}

TEST(Ledger, RejectsForcedDeltaOutsideUnitInterval) {
    LedgerOptions o;
    o.force_delta = 1.5;
    EXPECT_THROW(certify(spec_for(0.1, 1.0, 1.0, 0.0), o), InputError);
}
