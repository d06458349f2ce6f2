#pragma once

// The fixed-point map Phi(Y, Z) = (Y~, Z~) on one time window, its iteration,
// and the empirical checks attached to it.

#include <optional>
#include <string>
#include <vector>

#include "qbsde/certificate.hpp"
#include "qbsde/paths.hpp"
#include "qbsde/problem.hpp"
#include "qbsde/regression.hpp"

namespace qbsde {

enum class Mode { girsanov, frozen_driver };

const char* to_string(Mode mode) noexcept;
/// Accepts "girsanov" and "frozen-driver" (or "frozen_driver").
Mode parse_mode(const std::string& name);

struct PhiDiagnostics {
    std::size_t clip_events = 0;
    std::size_t weight_evaluations = 0;
    double max_condition = 1.0;
    double y0 = 0.0;      // first component of Y~(t0, 0)
    double y0_se = 0.0;
    double z0 = 0.0;      // first entry of Z~(t0, 0)
    double weight_mean = 1.0;  // full-window density at t0, girsanov mode only
    double weight_se = 0.0;
    std::vector<std::string> warnings;

    double clip_fraction() const noexcept;
};

struct PhiResult {
    ProcessApprox approx;
    PhiDiagnostics diagnostics;
};

/// Clip fractions above this raise a warning in the diagnostics.
inline constexpr double kClipWarning = 0.01;

/// One application of Phi. `current` carries the window grid, the basis and
/// the terminal map; the ensemble must live on the same grid.
///
/// girsanov: f_s = f(Y_s, Z_s) from `current` at left endpoints; Y~ at each
/// slice is the regression of the terminal value weighted by the remaining
/// stochastic exponential; Z~ is the conditional covariation of Y~ with the
/// Q-Brownian increment dW + f dt under one-step weights.
///
/// frozen-driver: backward recursion y_i = E[y_{i+1} - dt z~_i f_i | W_i] with
/// z~_i from the centred covariation of y_{i+1} and dW. The pathwise values
/// y_{i+1} - dt z~_i f_i are carried backward as the next targets, so every
/// fit sees the terminal value minus the accumulated drift along its path.
PhiResult phi_step(const ProcessApprox& current, const ProblemSpec& spec,
                   const PathEnsemble& ensemble, Mode mode);

/// (Y0, Z0) = (mean of the terminal values over the ensemble, clipped; 0).
ProcessApprox initial_iterate(const ProcessApprox& shape, const PathEnsemble& ensemble);

/// Maximum of |Y_a - Y_b| over slices 0..steps-1 and all ensemble states.
double sup_distance(const ProcessApprox& a, const ProcessApprox& b, const PathEnsemble& ensemble);

struct TraceRecord {
    int iter = 0;
    double dist_y = 0.0;
    double dist_z = 0.0;
    double ratio = 0.0;  // (dist_y + dist_z) over the previous iteration's; NaN at iter 1
    std::size_t clip_events = 0;
    double z_bmo_sq = 0.0;  // of the new iterate
    double z_bmo_se = 0.0;
    std::optional<bool> y_bmo_bound_check;  // set when a ledger is supplied
    double y0 = 0.0;
    double y0_se = 0.0;
};

enum class Verdict { converged, max_iter, no_contraction };
const char* to_string(Verdict v) noexcept;

struct ConvergenceTrace {
    std::vector<TraceRecord> records;
    Verdict verdict = Verdict::max_iter;
    std::vector<std::string> warnings;
    PhiDiagnostics last;

    bool converged() const noexcept { return verdict == Verdict::converged; }
};

struct IterateOptions {
    Mode mode = Mode::girsanov;
    int max_iter = 30;
    double tol = 1e-8;
    const ConstantLedger* ledger = nullptr;  // enables the proposition bound check
    /// Z part of the norm carried in from later windows (global BMO estimate).
    const NormContinuation* tail = nullptr;
};

struct IterateResult {
    ProcessApprox approx;
    ConvergenceTrace trace;
};

/// Iterates Phi from the initial iterate until dist_y + dist_z <= tol, the
/// iteration budget is spent, or three consecutive iterations fail to
/// decrease the distance ("no empirical contraction").
IterateResult iterate(const ProcessApprox& shape, const ProblemSpec& spec,
                      const PathEnsemble& ensemble, const IterateOptions& options);

/// after <= C6 + before / 2 + 3 * combined standard error, in squared BMO norms.
bool check_prop_bound(double before_sq, double before_se, double after_sq, double after_se,
                      const ConstantLedger& ledger);

struct ProbeResult {
    double ratio = 0.0;
    double se = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
};

/// (|dY~|_S + |dZ~|_B) / (|dY|_S + |dZ|_B) after one Phi step from each start.
/// Identical starts give ratio 0.
ProbeResult contraction_probe(const ProblemSpec& spec, const PathEnsemble& ensemble,
                              const ProcessApprox& start_a, const ProcessApprox& start_b,
                              Mode mode);

}  // namespace qbsde
