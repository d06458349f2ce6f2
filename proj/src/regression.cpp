#include "qbsde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qbsde/common.hpp"

namespace qbsde {

namespace {

constexpr std::size_t kRowBlock = 1024;

// Runs fn(begin, end) over consecutive row blocks, in parallel across blocks.
template <class Fn>
void for_each_block(std::size_t n, Fn&& fn) {
    const std::size_t blocks = (n + kRowBlock - 1) / kRowBlock;
    kernels::for_each_index(kernels::Exec::parallel, blocks, [&](std::size_t b) {
        fn(b * kRowBlock, std::min(n, (b + 1) * kRowBlock));
    });
}

void enumerate_exponents(int k, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> current(static_cast<std::size_t>(k), 0);
    for (int total = 0; total <= degree; ++total) {
        // All compositions of `total` into k non-negative parts, lexicographically descending.
        std::function<void(int, int)> rec = [&](int pos, int remaining) {
            if (pos == k - 1) {
                current[static_cast<std::size_t>(pos)] = remaining;
                out.push_back(current);
                return;
            }
            for (int a = remaining; a >= 0; --a) {
                current[static_cast<std::size_t>(pos)] = a;
                rec(pos + 1, remaining - a);
            }
        };
        rec(0, total);
    }
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> rows(
    std::span<const double> data, std::size_t n, std::size_t cols) {
    return {data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols)};
}

}  // namespace

// ---------------------------------------------------------------- Basis

Basis::Basis(BasisSpec spec, int k, std::shared_ptr<const StateMap> feature, int feature_dim)
    : spec_(spec), k_(k), feature_(spec.include_terminal_feature ? std::move(feature) : nullptr),
      feature_dim_(feature_dim) {
    if (spec.degree < 0) throw InputError("Basis: degree must be >= 0");
    if (k < 1) throw InputError("Basis: k must be >= 1");
    if (spec.include_terminal_feature && (!feature_ || feature_dim < 1))
        throw InputError("Basis: terminal feature requested without a feature map");
    enumerate_exponents(k, spec.degree, exponents_);
    for (const auto& e : exponents_) flat_.insert(flat_.end(), e.begin(), e.end());
}

std::size_t Basis::size() const noexcept {
    return exponents_.size() + static_cast<std::size_t>(feature_dim());
}

void Basis::evaluate(std::span<const double> w, double scale, std::span<double> out) const {
    if (!(scale > 0.0)) {
        out[0] = 1.0;
        return;
    }
    const int D = spec_.degree;
    const std::size_t P = exponents_.size();
    if (k_ == 1) {
        // Exponents are 0..D in order, so the basis is He_0..He_D itself.
        const double x = w[0] / scale;
        out[0] = 1.0;
        if (D >= 1) out[1] = x;
        for (int n = 1; n < D; ++n) out[static_cast<std::size_t>(n) + 1] = x * out[static_cast<std::size_t>(n)] - n * out[static_cast<std::size_t>(n) - 1];
    } else {
        // He_0..He_D per coordinate; He_{n+1}(x) = x He_n(x) - n He_{n-1}(x).
        const std::size_t stride = static_cast<std::size_t>(D) + 1;
        double local[64];
        std::vector<double> heap;
        double* h = local;
        if (static_cast<std::size_t>(k_) * stride > 64) {
            heap.resize(static_cast<std::size_t>(k_) * stride);
            h = heap.data();
        }
        for (int j = 0; j < k_; ++j) {
            double* hj = h + static_cast<std::size_t>(j) * stride;
            const double x = w[static_cast<std::size_t>(j)] / scale;
            hj[0] = 1.0;
            if (D >= 1) hj[1] = x;
            for (int n = 1; n < D; ++n) hj[n + 1] = x * hj[n] - n * hj[n - 1];
        }
        const int* e = flat_.data();
        for (std::size_t b = 0; b < P; ++b) {
            double v = 1.0;
            for (int j = 0; j < k_; ++j, ++e) {
                if (*e) v *= h[static_cast<std::size_t>(j) * stride + static_cast<std::size_t>(*e)];
            }
            out[b] = v;
        }
    }
    if (feature_) (*feature_)(w, out.subspan(P, static_cast<std::size_t>(feature_dim_)));
}

// ---------------------------------------------------------------- fitting

SliceFit fit_conditional_expectation(std::span<const double> states, std::size_t n,
                                     std::span<const double> targets, std::size_t m,
                                     std::span<const double> weights, const Basis& basis,
                                     double scale, const FitOptions& options) {
    const auto k = static_cast<std::size_t>(basis.k());
    const std::size_t p = basis.size_at(scale);
    if (states.size() != n * k || targets.size() != n * m || (!weights.empty() && weights.size() != n))
        throw InputError("fit_conditional_expectation: shape mismatch");
    if (n < 2 * p) {
        std::ostringstream msg;
        msg << "fit_conditional_expectation: need at least " << 2 * p << " samples for " << p
            << " basis functions, got " << n;
        throw InputError(msg.str());
    }

    std::vector<double> design(n * p);
    std::vector<double> centred(n * m);
    for_each_block(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            basis.evaluate(states.subspan(r * k, k), scale, std::span<double>(design).subspan(r * p, p));
            for (std::size_t c = 0; c < m; ++c) centred[r * m + c] = targets[r * m + c] - targets[c];
        }
    });

    std::vector<double> gram(p * p), rhs(p * m);
    kernels::normal_equations(options.exec, design, n, p, weights, centred, m, gram, rhs);

    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> G(
        gram.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> B(
        rhs.data(), static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m));
    const double trace = G.trace();
    if (!(trace > 0.0) || !std::isfinite(trace))
        throw RegressionError("fit_conditional_expectation: degenerate design (zero trace)",
                              std::numeric_limits<double>::infinity());
    const double ridge = kRidge * trace / static_cast<double>(p);
    Eigen::MatrixXd A = G;
    A.diagonal().array() += ridge;

    SliceFit fit;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    fit.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success || !(fit.condition <= kMaxCondition)) {
        std::ostringstream msg;
        msg << "fit_conditional_expectation: rank-deficient design, condition number "
            << fit.condition;
        throw RegressionError(msg.str(), fit.condition);
    }
    fit.coeffs = llt.solve(Eigen::MatrixXd(B));
    for (std::size_t c = 0; c < m; ++c) fit.coeffs(0, static_cast<Eigen::Index>(c)) += targets[c];

    if (options.keep_fitted) {
        fit.fitted.resize(n * m);
        for_each_block(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r) {
                for (std::size_t c = 0; c < m; ++c) {
                    double v = 0.0;
                    for (std::size_t a = 0; a < p; ++a)
                        v += design[r * p + a] * fit.coeffs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
                    fit.fitted[r * m + c] = v;
                }
            }
        });
    }

    if (options.covariance) {
        const auto X = rows(design, n, p);
        const auto Y = rows(targets, n, m);
        const Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p),
                                                                         static_cast<Eigen::Index>(p)));
        for (std::size_t c = 0; c < m; ++c) {
            const auto ci = static_cast<Eigen::Index>(c);
            Eigen::VectorXd resid = Y.col(ci) - X * fit.coeffs.col(ci);
            if (!weights.empty()) {
                for (std::size_t r = 0; r < n; ++r) resid(static_cast<Eigen::Index>(r)) *= weights[r];
            }
            Eigen::MatrixXd scaled = X;
            for (Eigen::Index r = 0; r < scaled.rows(); ++r) scaled.row(r) *= resid(r);
            const Eigen::MatrixXd meat = scaled.transpose() * scaled;
            fit.covariance.push_back(Ainv * meat * Ainv);
        }
    }
    return fit;
}

SliceFit extract_Z(std::span<const double> y_next, std::size_t d, std::span<const double> increments,
                   std::span<const double> states, std::size_t n, double dt,
                   std::span<const double> weights, const Basis& basis, double scale,
                   const FitOptions& options) {
    const auto k = static_cast<std::size_t>(basis.k());
    if (y_next.size() != n * d || increments.size() != n * k)
        throw InputError("extract_Z: shape mismatch");
    std::vector<double> targets(n * d * k);
    for_each_block(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r)
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < k; ++j)
                    targets[(r * d + i) * k + j] = y_next[r * d + i] * increments[r * k + j] / dt;
    });
    return fit_conditional_expectation(states, n, targets, d * k, weights, basis, scale, options);
}

void predict(const Basis& basis, double scale, const Eigen::MatrixXd& coeffs,
             std::span<const double> states, std::size_t n, std::span<double> out) {
    const auto k = static_cast<std::size_t>(basis.k());
    const auto p = static_cast<std::size_t>(coeffs.rows());
    const auto m = static_cast<std::size_t>(coeffs.cols());
    for_each_block(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> row(basis.size());
        for (std::size_t r = begin; r < end; ++r) {
            basis.evaluate(states.subspan(r * k, k), scale, row);
            for (std::size_t c = 0; c < m; ++c) {
                double s = 0.0;
                for (std::size_t a = 0; a < p; ++a)
                    s += row[a] * coeffs(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c));
                out[r * m + c] = s;
            }
        }
    });
}

double prediction_se(const Basis& basis, double scale, const Eigen::MatrixXd& covariance,
                     std::span<const double> w) {
    const auto p = static_cast<Eigen::Index>(covariance.rows());
    std::vector<double> row(basis.size());
    basis.evaluate(w, scale, row);
    Eigen::Map<const Eigen::VectorXd> x(row.data(), p);
    return std::sqrt(std::max(0.0, x.dot(covariance * x)));
}

// ---------------------------------------------------------------- ProcessApprox

ProcessApprox::ProcessApprox(TimeGrid grid, int d, int k, Basis basis, double clip_bound,
                             std::shared_ptr<const StateMap> terminal)
    : grid_(grid), d_(d), k_(k), basis_(std::move(basis)), clip_bound_(clip_bound),
      terminal_(std::move(terminal)) {
    if (!terminal_) throw InputError("ProcessApprox: terminal map required");
    const auto steps = static_cast<std::size_t>(grid_.steps);
    scales_.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
        scales_[i] = std::sqrt(std::max(0.0, grid_.time(static_cast<int>(i))));
    y_coeffs_.resize(steps);
    z_coeffs_.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const auto p = static_cast<Eigen::Index>(basis_.size_at(scales_[i]));
        y_coeffs_[i] = Eigen::MatrixXd::Zero(p, d_);
        z_coeffs_[i] = Eigen::MatrixXd::Zero(p, d_ * k_);
    }
}

void ProcessApprox::eval_y(int i, std::span<const double> w, std::span<double> out) const {
    if (i == steps()) {
        (*terminal_)(w, out);
        return;
    }
    predict(basis_, scale(i), y_coeffs(i), w, 1, out);
    clip_to_ball(out.first(static_cast<std::size_t>(d_)), clip_bound_);
}

void ProcessApprox::eval_z(int i, std::span<const double> w, std::span<double> out) const {
    predict(basis_, scale(i), z_coeffs(i), w, 1, out);
}

void ProcessApprox::eval_y_slice(int i, std::span<const double> states, std::size_t n,
                                 std::span<double> out) const {
    const auto k = static_cast<std::size_t>(k_);
    const auto d = static_cast<std::size_t>(d_);
    if (i == steps()) {
        for_each_block(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r)
                (*terminal_)(states.subspan(r * k, k), out.subspan(r * d, d));
        });
        return;
    }
    predict(basis_, scale(i), y_coeffs(i), states, n, out);
    for_each_block(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) clip_to_ball(out.subspan(r * d, d), clip_bound_);
    });
}

void ProcessApprox::eval_z_slice(int i, std::span<const double> states, std::size_t n,
                                 std::span<double> out) const {
    predict(basis_, scale(i), z_coeffs(i), states, n, out);
}

ProcessApprox ProcessApprox::constant(TimeGrid grid, int d, int k, Basis basis, double clip_bound,
                                      std::shared_ptr<const StateMap> terminal,
                                      std::span<const double> y) {
    ProcessApprox a(grid, d, k, std::move(basis), clip_bound, std::move(terminal));
    std::vector<double> v(y.begin(), y.end());
    clip_to_ball(v, clip_bound);
    for (int i = 0; i < a.steps(); ++i)
        for (int c = 0; c < d; ++c) a.y_coeffs(i)(0, c) = v[static_cast<std::size_t>(c)];
    return a;
}

ProcessApprox z_difference(const ProcessApprox& a, const ProcessApprox& b) {
    if (a.steps() != b.steps() || a.basis().size() != b.basis().size())
        throw InputError("z_difference: approximations live on different grids or bases");
    ProcessApprox out(a.grid(), a.d(), a.k(), a.basis(), a.clip_bound(), a.terminal());
    for (int i = 0; i < a.steps(); ++i) out.z_coeffs(i) = a.z_coeffs(i) - b.z_coeffs(i);
    return out;
}

// ---------------------------------------------------------------- norms

double NormContinuation::operator()(std::span<const double> w) const {
    double v = 0.0;
    predict(*basis, scale, coeffs, w, 1, std::span<double>(&v, 1));
    return v;
}

namespace {

// q[s, path] = |Z(t_s, W_s)|^2 dt
std::vector<double> quadratic_increments(const ProcessApprox& z, const PathEnsemble& e) {
    const std::size_t n = e.n_paths();
    const auto steps = static_cast<std::size_t>(e.steps());
    const std::size_t width = static_cast<std::size_t>(z.d() * z.k());
    const double dt = e.grid().dt();
    std::vector<double> q(steps * n);
    std::vector<double> zv(n * width);
    for (std::size_t s = 0; s < steps; ++s) {
        z.eval_z_slice(static_cast<int>(s), e.states_at(static_cast<int>(s)), n, zv);
        for_each_block(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < width; ++c) acc += zv[r * width + c] * zv[r * width + c];
                q[s * n + r] = acc * dt;
            }
        });
    }
    return q;
}

}  // namespace

BmoEstimate estimate_bmo_norm(const ProcessApprox& z, const PathEnsemble& e,
                              const NormContinuation* tail) {
    const std::size_t n = e.n_paths();
    const int steps = e.steps();
    const auto k = static_cast<std::size_t>(e.k());
    const auto q = quadratic_increments(z, e);

    std::vector<double> suffix(n, 0.0);
    BmoEstimate best;
    best.value_sq = 0.0;
    best.argmax_slice = steps;
    auto basis_ptr = std::make_shared<const Basis>(z.basis());
    if (tail) {
        const auto end_states = e.states_at(steps);
        for (std::size_t r = 0; r < n; ++r) suffix[r] = (*tail)(end_states.subspan(r * k, k));
        best.value_sq = std::max(0.0, tail->max_value);
    }
    std::vector<double> best_suffix;
    for (int s = steps - 1; s >= 0; --s) {
        const auto su = static_cast<std::size_t>(s);
        for (std::size_t r = 0; r < n; ++r) suffix[r] += q[su * n + r];
        const auto states = e.states_at(s);
        auto fit = fit_conditional_expectation(states, n, suffix, 1, {}, z.basis(), z.scale(s),
                                               FitOptions{.keep_fitted = true});
        const double mx = *std::max_element(fit.fitted.begin(), fit.fitted.end());
        if (s == 0) {
            best.continuation.basis = basis_ptr;
            best.continuation.scale = z.scale(0);
            best.continuation.coeffs = fit.coeffs;
            best.continuation.max_value = mx;
        }
        if (mx > best.value_sq || (best.argmax_slice == steps && !tail)) {
            best.value_sq = std::max(0.0, mx);
            best.argmax_slice = s;
            best_suffix = suffix;
        }
    }
    if (best.argmax_slice < steps && !best_suffix.empty()) {
        const int s = best.argmax_slice;
        const auto states = e.states_at(s);
        const auto fit = fit_conditional_expectation(states, n, best_suffix, 1, {}, z.basis(), z.scale(s),
                                                     FitOptions{.covariance = true, .keep_fitted = true});
        const auto& fv = fit.fitted;
        const auto arg = static_cast<std::size_t>(std::max_element(fv.begin(), fv.end()) - fv.begin());
        best.se = prediction_se(z.basis(), z.scale(s), fit.covariance[0], states.subspan(arg * k, k));
    }
    return best;
}

NormEstimate estimate_m2_norm(const ProcessApprox& z, const PathEnsemble& e) {
    const std::size_t n = e.n_paths();
    const auto steps = static_cast<std::size_t>(e.steps());
    const auto q = quadratic_increments(z, e);
    std::vector<double> total(n, 0.0);
    for (std::size_t s = 0; s < steps; ++s)
        for (std::size_t r = 0; r < n; ++r) total[r] += q[s * n + r];
    double mean = 0.0;
    for (double v : total) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : total) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace qbsde
