#pragma once

// Least-squares estimation of conditional expectations given the Brownian
// state, the (Y, Z) coefficient tables built from them, and sample estimators
// of the BMO and M^2 norms of Z.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "qbsde/kernels.hpp"
#include "qbsde/paths.hpp"

namespace qbsde {

struct BasisSpec {
    int degree = 2;
    bool include_terminal_feature = false;
};

/// Vector-valued map of the Brownian state, e.g. the terminal value.
using StateMap = std::function<void(std::span<const double> w, std::span<double> out)>;

/// Tensor-product Hermite polynomials He_a(w_j / scale) of total degree
/// <= degree in the k Brownian coordinates, optionally followed by the
/// `feature_dim` components of a feature map evaluated at w. The first basis
/// function is the constant 1. A slice whose scale is 0 (deterministic state)
/// uses the constant alone.
class Basis {
public:
    Basis(BasisSpec spec, int k, std::shared_ptr<const StateMap> feature = nullptr,
          int feature_dim = 0);

    const BasisSpec& spec() const noexcept { return spec_; }
    int k() const noexcept { return k_; }
    std::size_t polynomial_size() const noexcept { return exponents_.size(); }
    /// C(k + degree, degree), plus feature_dim when the feature is enabled.
    std::size_t size() const noexcept;
    std::size_t size_at(double scale) const noexcept { return scale > 0.0 ? size() : 1; }
    const std::vector<std::vector<int>>& exponents() const noexcept { return exponents_; }
    int feature_dim() const noexcept { return feature_ ? feature_dim_ : 0; }

    /// Writes size_at(scale) values into `out`.
    void evaluate(std::span<const double> w, double scale, std::span<double> out) const;

private:
    BasisSpec spec_;
    int k_;
    std::shared_ptr<const StateMap> feature_;
    int feature_dim_;
    std::vector<std::vector<int>> exponents_;
    std::vector<int> flat_;  // exponents_ row-major, for the evaluation loop
};

struct FitOptions {
    bool covariance = false;  // heteroskedasticity-robust coefficient covariance
    bool keep_fitted = false;
    kernels::Exec exec = kernels::Exec::parallel;
};

struct SliceFit {
    Eigen::MatrixXd coeffs;  // [basis, m]
    double condition = 1.0;  // of the regularised normal matrix
    std::vector<Eigen::MatrixXd> covariance;  // per target column, when requested
    std::vector<double> fitted;  // [n, m] when keep_fitted; equals predict() on the same states
};

inline constexpr double kRidge = 1e-10;
inline constexpr double kMaxCondition = 1e14;

/// Weighted least squares of `targets` [n, m] on the basis at `states` [n, k].
/// Normal equations with ridge 1e-10 * trace / p. Targets are centred on the
/// first row before solving, so a constant target column is reproduced
/// exactly (constant coefficient equal to it, all others zero). Empty
/// `weights` means unit weights and takes the same arithmetic path as
/// weights of 1.0.
SliceFit fit_conditional_expectation(std::span<const double> states, std::size_t n,
                                     std::span<const double> targets, std::size_t m,
                                     std::span<const double> weights, const Basis& basis,
                                     double scale, const FitOptions& options = {});

/// Martingale-representation integrand by conditional covariation: regresses
/// y_next (x) dW^T / dt, [n, d*k], on the basis. `y_next` is [n, d],
/// `increments` [n, k].
SliceFit extract_Z(std::span<const double> y_next, std::size_t d, std::span<const double> increments,
                   std::span<const double> states, std::size_t n, double dt,
                   std::span<const double> weights, const Basis& basis, double scale,
                   const FitOptions& options = {});

/// Fitted values X * coeffs for every row of `states`, [n, m].
void predict(const Basis& basis, double scale, const Eigen::MatrixXd& coeffs,
             std::span<const double> states, std::size_t n, std::span<double> out);

/// Prediction standard error sqrt(x^T Cov x) for one target column.
double prediction_se(const Basis& basis, double scale, const Eigen::MatrixXd& covariance,
                     std::span<const double> w);

/// Per-timestep regression representation of (Y, Z) on one time grid.
/// Y slices 0..steps-1 and Z slices 0..steps-1 are coefficient tables; the Y
/// slice at `steps` is the terminal map itself. Y evaluations are radially
/// clipped to the clip bound.
class ProcessApprox {
public:
    ProcessApprox(TimeGrid grid, int d, int k, Basis basis, double clip_bound,
                  std::shared_ptr<const StateMap> terminal);

    const TimeGrid& grid() const noexcept { return grid_; }
    int d() const noexcept { return d_; }
    int k() const noexcept { return k_; }
    int steps() const noexcept { return grid_.steps; }
    const Basis& basis() const noexcept { return basis_; }
    double clip_bound() const noexcept { return clip_bound_; }
    const std::shared_ptr<const StateMap>& terminal() const noexcept { return terminal_; }

    /// Standardisation of the state at grid point i: sqrt(t_i).
    double scale(int i) const noexcept { return scales_[static_cast<std::size_t>(i)]; }

    Eigen::MatrixXd& y_coeffs(int i) { return y_coeffs_[static_cast<std::size_t>(i)]; }
    const Eigen::MatrixXd& y_coeffs(int i) const { return y_coeffs_[static_cast<std::size_t>(i)]; }
    Eigen::MatrixXd& z_coeffs(int i) { return z_coeffs_[static_cast<std::size_t>(i)]; }
    const Eigen::MatrixXd& z_coeffs(int i) const { return z_coeffs_[static_cast<std::size_t>(i)]; }

    /// Y(t_i, w), i in [0, steps]; clipped. i == steps evaluates the terminal map.
    void eval_y(int i, std::span<const double> w, std::span<double> out) const;
    /// Z(t_i, w) as row-major d x k, i in [0, steps).
    void eval_z(int i, std::span<const double> w, std::span<double> out) const;

    /// Whole slices: states [n, k] -> out [n, d] or [n, d*k].
    void eval_y_slice(int i, std::span<const double> states, std::size_t n, std::span<double> out) const;
    void eval_z_slice(int i, std::span<const double> states, std::size_t n, std::span<double> out) const;

    /// Same grid and basis, Y set to the constant `y` (clipped), Z set to zero.
    static ProcessApprox constant(TimeGrid grid, int d, int k, Basis basis, double clip_bound,
                                  std::shared_ptr<const StateMap> terminal,
                                  std::span<const double> y);

private:
    TimeGrid grid_;
    int d_;
    int k_;
    Basis basis_;
    double clip_bound_;
    std::shared_ptr<const StateMap> terminal_;
    std::vector<double> scales_;
    std::vector<Eigen::MatrixXd> y_coeffs_;
    std::vector<Eigen::MatrixXd> z_coeffs_;
};

/// Z coefficients of a minus b; Y of the result is left at zero. Requires the
/// same grid and basis.
ProcessApprox z_difference(const ProcessApprox& a, const ProcessApprox& b);

/// Conditional expectation function handed from a later window to an earlier
/// one: E[ int_{b}^{T} |Z|^2 ds | W_b = w ].
struct NormContinuation {
    std::shared_ptr<const Basis> basis;
    double scale = 0.0;
    Eigen::MatrixXd coeffs;  // [basis, 1]
    double max_value = 0.0;  // over the ensemble states it was fitted on

    double operator()(std::span<const double> w) const;
};

struct BmoEstimate {
    double value_sq = 0.0;  // estimate of ||Z||_B^2
    double se = 0.0;        // standard error at the maximiser
    int argmax_slice = 0;
    NormContinuation continuation;  // fitted slice-0 conditional expectation
};

/// max over grid times t_i and ensemble states of the regression estimate of
/// E[ sum_{s >= i} |Z_s|^2 dt (+ tail(W_end)) | W_{t_i} ].
BmoEstimate estimate_bmo_norm(const ProcessApprox& z, const PathEnsemble& ensemble,
                              const NormContinuation* tail = nullptr);

struct NormEstimate {
    double value = 0.0;
    double se = 0.0;
};

/// Ensemble mean of sum_s |Z_s|^2 dt with its standard error.
NormEstimate estimate_m2_norm(const ProcessApprox& z, const PathEnsemble& ensemble);

}  // namespace qbsde
