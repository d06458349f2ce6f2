#pragma once

// BSDE problem instances dY = Z f(Y, Z) dt + Z dW, Y_T = xi, with a bounded
// terminal value and a Lipschitz, linearly growing generator f: R^d x R^{dxk} -> R^k.
//
// Terminal values and generators are closed families so that the declared
// constants C1..C4 can be audited.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace qbsde {

// ---- terminal values: functions of the terminal Brownian state w_T in R^k ----

struct ConstantTerminal {
    std::vector<double> value;  // in R^d
};

/// xi = (scale * cos(w_1), 0, ..., 0)
struct CosineTerminal {
    double scale = 1.0;
};

/// xi = (scale * sin(w_1), 0, ..., 0)
struct SineTerminal {
    double scale = 1.0;
};

/// xi_i = sum_n coefficients[i][n] * w_1^n, radially clipped to clip_radius.
struct ClippedPolynomialTerminal {
    std::vector<std::vector<double>> coefficients;  // one polynomial per output component
    double clip_radius = 1.0;
};

using TerminalSpec =
    std::variant<ConstantTerminal, CosineTerminal, SineTerminal, ClippedPolynomialTerminal>;

// ---- generators ----

struct ZeroGenerator {};

/// f(y, z) = c
struct ConstantGenerator {
    std::vector<double> c;  // in R^k
};

/// f(y, z) = c * tanh(y_1)
struct TanhGenerator {
    std::vector<double> c;  // in R^k
};

/// f(y, z) = clip_r(A y + B vec(z)); A is k x d, B is k x (d k), both row-major,
/// vec(z) is the row-major flattening of z.
struct ClippedLinearGenerator {
    std::vector<double> A;
    std::vector<double> B;
    double clip_radius = 1.0;
};

using GeneratorSpec =
    std::variant<ZeroGenerator, ConstantGenerator, TanhGenerator, ClippedLinearGenerator>;

/// Optional solver settings carried in the same configuration document.
struct SolverSettings {
    int degree = 2;
    bool terminal_feature = false;
    int max_iter = 30;
    double tol = 1e-8;
};

struct ProblemSpec {
    int d = 1;
    int k = 1;
    double T = 1.0;
    double C1 = 1.0;
    double C2 = 0.0;
    double C3 = 0.0;
    double C4 = 0.0;
    TerminalSpec terminal = ConstantTerminal{{0.0}};
    GeneratorSpec generator = ZeroGenerator{};
    SolverSettings solver{};

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// f(y, z) written into `out` (size k). Throws InputError on non-finite input.
void evaluate_generator(const GeneratorSpec& spec, int d, int k, std::span<const double> y,
                        std::span<const double> z, std::span<double> out);
std::vector<double> evaluate_generator(const GeneratorSpec& spec, int d, int k,
                                       std::span<const double> y, std::span<const double> z);

/// xi(w_T) written into `out` (size d), radially clipped to C1.
void evaluate_terminal(const ProblemSpec& spec, std::span<const double> w, std::span<double> out);
std::vector<double> evaluate_terminal(const ProblemSpec& spec, std::span<const double> w);

struct GeneratorConstants {
    double C2 = 0.0;
    double C3 = 0.0;
    double C4 = 0.0;
};

/// Constants that provably dominate the built-in generator: operator norms for
/// the linear parts, |c| for the constant and tanh kinds. Norms computed in
/// floating point are inflated by a relative 1e-12 so that the zero-tolerance
/// empirical check cannot be tripped by rounding.
GeneratorConstants documented_constants(const GeneratorSpec& spec, int d, int k);

struct ConstantsWitness {
    std::vector<double> y1, z1, y2, z2;
};

struct ValidationReport {
    std::size_t samples = 0;
    double max_lipschitz_ratio = 0.0;   // |df| / (C2|dy| + C3|dz|)
    double max_growth_excess = 0.0;     // max of |f| - (C2|y| + C3|z| + C4)
    bool lipschitz_ok = true;
    bool growth_ok = true;
    ConstantsWitness lipschitz_witness;
    ConstantsWitness growth_witness;     // y1, z1 only

    bool passed() const noexcept { return lipschitz_ok && growth_ok; }
};

/// Empirical audit of the declared C2, C3, C4 with zero tolerance. y is sampled
/// uniformly in the ball of radius 2 C1, z with standard normal entries.
ValidationReport validate_constants(const ProblemSpec& spec, std::size_t n_samples,
                                    std::uint64_t seed);

/// One row of a user-supplied generator table.
struct GeneratorSample {
    std::vector<double> y, z, f;
};

/// Audit of a tabulated generator against declared constants over all pairs
/// of rows. Tables are accepted only here, never by the solver.
ValidationReport validate_generator_table(std::span<const GeneratorSample> rows, int d, int k,
                                          double C2, double C3, double C4);

}  // namespace qbsde
