#pragma once

// Constant ledger for the existence/uniqueness argument of quadratic BSDEs with
// product generators.
//
// Everything that involves exp(K C1^2) is carried in natural-log space. With
// K = -(2 / C1^2) ln(C1 C3) one has exp(K C1^2) = (C1 C3)^-2, so for the
// parameter regime where the gates open (C1 C3 < e^-324) plain arithmetic
// would overflow long before the gate is reached.

#include <optional>
#include <string>

#include "qbsde/problem.hpp"

namespace qbsde {

/// The three left-hand terms of the window-length condition for a given
/// (lambda, delta); the condition is max(...) <= lambda.
struct DeltaTerms {
    double drift_term = 0.0;      // 2 (C1 C2 + C4) sqrt(delta T)
    double lipschitz_term = 0.0;  // 2 C2 sqrt(delta T) sqrt(R)
    double coupling_term = 0.0;   // 2 C3 sqrt(R)

    double max() const noexcept;
};

struct DeltaChoice {
    double delta = 0.0;
    int windows = 0;  // ceil(1 / delta)
    DeltaTerms terms;
};

struct LedgerOptions {
    int lambda_points = 64;
    int delta_points = 1024;
    /// Evaluate the ledger at this delta instead of searching for one.
    std::optional<double> force_delta;
};

struct ConstantLedger {
    double C1 = 0, C2 = 0, C3 = 0, C4 = 0, T = 0;

    double K = 0.0;
    double e_KC1sq_log = 0.0;  // K C1^2, i.e. ln exp(K C1^2)
    double beta = 0.0;
    double alpha = 0.0;
    double C6_log = 0.0;
    double R_log = 0.0;        // ln(2 C6)
    double delta = 0.0;
    double lambda = 0.0;
    int windows = 0;
    double tilde_R_log = 0.0;  // ln(ceil(1/delta) R)
    double contraction_factor = 0.0;  // 4 lambda / (1 - 5 lambda)
    DeltaTerms terms;

    bool prop_gate = false;        // C1 C3 < e^{-1/2}
    bool existence_gate = false;   // some grid lambda admits a feasible delta
    bool uniqueness_gate = false;  // sqrt(ceil(1/delta)) lambda < 1/9
    bool theorem_reference_gate = false;  // C1 C3 < e^{-324}
    bool delta_forced = false;
    std::string note;

    double C6() const noexcept;  // may be +inf
    double R() const noexcept;
};

/// K = -(2 / C1^2) ln(C1 C3). Throws GateError when C1 C3 >= e^{-1/2}.
double compute_K(double C1, double C3);

/// beta with C3 beta exp(K C1^2) = 1/2, evaluated as exp(-ln 2 - ln C3 - K C1^2).
/// For K from compute_K this equals C1^2 C3 / 2.
double compute_beta(double C1, double C3, double K);

/// Smallest alpha with 2K - C3/beta - (C1 C2 + C4)/alpha >= 0. Returns the
/// floor 1e-300 when C1 C2 + C4 = 0 (alpha then only multiplies zero).
double compute_alpha(double C1, double C2, double C3, double C4, double K, double beta);

inline constexpr double kAlphaFloor = 1e-300;

/// ln C6 with C6 = exp(K C1^2) (1/K + alpha (C1 C2 + C4) deltaT).
double compute_C6_log(double C1, double C2, double C3, double C4, double alpha, double K,
                      double deltaT);

/// Inputs to the window-length search that do not depend on delta.
struct CertificateInputs {
    double C1 = 0, C2 = 0, C3 = 0, C4 = 0;
    double K = 0, alpha = 0;
};

/// The three terms for one delta, computed in log space.
DeltaTerms delta_terms(const CertificateInputs& in, double delta, double T);

/// Largest delta = m / grid (1 <= m < grid) whose terms are all <= lambda,
/// or nullopt when none is.
std::optional<DeltaChoice> try_search_delta(const CertificateInputs& in, double lambda, double T,
                                            int grid = 1024);

/// As try_search_delta but throws GateError when no grid delta is feasible.
DeltaChoice search_delta(const CertificateInputs& in, double lambda, double T, int grid = 1024);

/// The lambda grid scanned by certify: `points` log-spaced values
/// (1/9) * 100^{-i/points}, i = 1..points, all strictly below 1/9.
std::vector<double> lambda_grid(int points);

/// Full ledger. Infeasibility is reported through the gate flags, never thrown.
/// The smallest feasible grid lambda is selected, with the largest feasible
/// delta for it.
ConstantLedger certify(const ProblemSpec& spec, const LedgerOptions& options = {});

}  // namespace qbsde
