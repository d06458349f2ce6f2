#pragma once

// Reference solutions: closed forms for the zero and constant generators with
// trigonometric terminal values, and a recombining binomial tree for any
// scalar problem.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qbsde/problem.hpp"

namespace qbsde {

enum class TrigKind { cos, sin };

struct OracleValue {
    double y = 0.0;
    double z = 0.0;
};

/// f = 0, xi = cos(W_T) or sin(W_T): Y = e^{-(T-t)/2} cos w, Z = -e^{-(T-t)/2} sin w
/// (and Y = e^{-(T-t)/2} sin w, Z = e^{-(T-t)/2} cos w for sin).
OracleValue heat_kernel_oracle(double t, double w, double T, TrigKind kind);

/// f = c: the heat kernel evaluated at the shifted state w - c (T - t).
OracleValue constant_drift_oracle(double t, double w, double T, double c, TrigKind kind);

struct TreeResult {
    double y0 = 0.0;
    double z0 = 0.0;
    int steps = 0;
    bool converged = true;
    int failed_level = -1;  // first node whose inner iteration did not settle
    int failed_node = -1;
    /// Level i holds i + 1 nodes at x = (2j - i) sqrt(dt); filled on request.
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> z;
};

inline constexpr int kTreeInnerIterations = 50;
inline constexpr double kTreeInnerTol = 1e-12;
inline constexpr double kTreeDamping = 0.5;

/// Backward induction y = (y+ + y-)/2 - dt z f(y, z), z = (y+ - y-) / (2 sqrt dt),
/// solved per node by damped fixed-point iteration. Requires d = k = 1.
TreeResult tree_oracle(const ProblemSpec& spec, int n_steps, bool keep_lattice = false);

/// Reference value of Y(0, 0) for a problem, if some oracle covers it.
struct OracleReference {
    std::string name;
    double y0 = 0.0;
};

struct OracleEntry {
    std::string name;
    std::function<bool(const ProblemSpec&)> applies;
    std::function<double(const ProblemSpec&)> y0;
};

/// Ordered list of oracles; the first entry that applies wins.
class OracleRegistry {
public:
    void add(OracleEntry entry) { entries_.push_back(std::move(entry)); }
    std::optional<OracleReference> lookup(const ProblemSpec& spec) const;
    const std::vector<OracleEntry>& entries() const noexcept { return entries_; }

private:
    std::vector<OracleEntry> entries_;
};

inline constexpr int kRegistryTreeSteps = 2000;

/// constant-terminal, heat-kernel, constant-drift, then tree (2000 steps).
const OracleRegistry& default_oracles();

}  // namespace qbsde
