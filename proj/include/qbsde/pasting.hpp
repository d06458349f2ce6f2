#pragma once

// Solution on [0, T] by backward concatenation of window solves. Window 0 is
// the terminal window [T - delta T, T]; window j covers
// [T - (j+1) delta T, T - j delta T], and the last one is cut at 0.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qbsde/certificate.hpp"
#include "qbsde/oracles.hpp"
#include "qbsde/picard.hpp"

namespace qbsde {

struct SolveOptions {
    std::size_t n_paths = 100000;
    int steps = 50;  // per window
    std::uint64_t seed = 7;
    Mode mode = Mode::girsanov;
    const OracleRegistry* oracles = &default_oracles();  // nullptr disables
};

struct WindowReport {
    int index = 0;  // 0 is the terminal window
    double t0 = 0.0;
    double t1 = 0.0;
    std::uint64_t seed = 0;
    ConvergenceTrace trace;
    double z_bmo_sq = 0.0;  // includes the later windows' contribution
    double z_bmo_se = 0.0;
    NormEstimate z_m2;      // this window only
    double weight_mean = 1.0;
    double weight_se = 0.0;
};

struct OracleDeviation {
    std::string name;
    double reference = 0.0;
    double deviation = 0.0;  // Y0 - reference
    bool within_3se = false;
};

struct SolveReport {
    ConstantLedger ledger;
    Mode mode = Mode::girsanov;
    std::size_t n_paths = 0;
    int steps_per_window = 0;
    std::uint64_t master_seed = 0;
    std::string version;
    bool best_effort = false;  // no existence certificate backs this run
    bool converged = false;
    std::vector<int> failing_windows;
    std::vector<WindowReport> windows;  // in solve order, terminal window first

    double y0 = 0.0;
    double y0_se = 0.0;
    double z0 = 0.0;
    double z_bmo_sq = 0.0;  // global estimate over [0, T]
    double z_bmo_se = 0.0;
    NormEstimate z_m2;
    std::optional<bool> tilde_R_check;  // |Z|_B^2 <= R~ + 3 SE; unset without a ledger value
    std::size_t clip_events = 0;
    std::optional<OracleDeviation> oracle;
    std::vector<std::string> warnings;
};

/// Window solutions in chronological order. windows[j] hands its slice-0 Y
/// to windows[j-1] as terminal map.
struct PastedApprox {
    std::vector<std::shared_ptr<const ProcessApprox>> windows;

    /// Index of the window whose grid contains t (left-closed, the last one closed).
    std::size_t locate(double t) const;
    void eval_y(double t, std::span<const double> w, std::span<double> out) const;
};

struct Solution {
    PastedApprox approx;
    SolveReport report;
};

/// Window boundaries from the terminal end: T, T - delta T, ..., 0.
std::vector<double> window_boundaries(double T, double delta, int windows);

/// Solves every window in turn. The partition comes from ledger.delta when the
/// ledger certifies existence or the delta was forced; otherwise a single
/// window [0, T] is used and the report is marked best-effort.
Solution solve_full(const ProblemSpec& spec, const ConstantLedger& ledger, const SolveOptions& options);

}  // namespace qbsde
