#pragma once

// Built-in validation cases run by `qbsde validate`, and the reference
// problems they are built on (shared with the test binaries).

#include <cstddef>
#include <string>
#include <vector>

#include "qbsde/problem.hpp"

namespace qbsde::cli {

struct CaseResult {
    std::string suite;
    std::string name;
    bool passed = false;
    double expected = 0.0;
    double actual = 0.0;
    double se = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct SuiteOptions {
    double tol_multiplier = 1.0;  // scales every statistical tolerance
    std::size_t n_paths = 100000;
    int steps = 50;
};

/// f = 0, xi = cos(W_1), C1 = 1. Y0 = exp(-1/2).
ProblemSpec heat_kernel_problem();
/// f = 1, xi = cos(W_1). Y0 = exp(-1/2) cos(1).
ProblemSpec constant_drift_problem();
/// f(y) = tanh(y), xi = cos(W_1).
ProblemSpec tanh_problem();
/// Small-coupling problem that passes the existence gate.
ProblemSpec certified_problem();

/// Exact checks: ledger arithmetic, gates, boundedness, terminal exactness,
/// determinism, bit-exact handoff. Independent of the tolerance multiplier.
std::vector<CaseResult> run_invariants(const SuiteOptions& options);

/// Statistical comparisons against closed forms and the tree.
std::vector<CaseResult> run_oracles(const SuiteOptions& options);

}  // namespace qbsde::cli
