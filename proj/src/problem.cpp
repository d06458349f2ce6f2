#include "qbsde/problem.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qbsde/common.hpp"
#include "qbsde/rng.hpp"

namespace qbsde {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* field, const std::string& message) {
    if (!ok) throw ConfigError(field, std::string("invalid field \"") + field + "\": " + message);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

double spectral_norm(const std::vector<double>& m, int rows, int cols) {
    if (m.empty()) return 0.0;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> mat(
        m.data(), rows, cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mat);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

constexpr double kNormInflation = 1.0 + 1e-12;

// Sequential standard normals from one counter-based stream index.
class NormalDraws {
public:
    NormalDraws(std::uint64_t seed, std::uint64_t index) : seed_(seed), index_(index) {}
    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const auto [a, b] = rng::gaussian_pair(seed_, rng::Stream::validation, index_, 0, slot_++);
        spare_ = b;
        have_spare_ = true;
        return a;
    }
    double uniform() {
        return rng::uniform_pair(seed_, rng::Stream::validation, index_, 1, slot_++).first;
    }

private:
    std::uint64_t seed_;
    std::uint64_t index_;
    std::uint32_t slot_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

std::vector<double> sample_ball(NormalDraws& draws, int dim, double radius) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = draws.next();
    const double n = norm(v);
    const double r = radius * std::pow(draws.uniform(), 1.0 / dim);
    for (double& x : v) x = n > 0.0 ? x * r / n : 0.0;
    return v;
}

std::vector<double> sample_normal(NormalDraws& draws, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (double& x : v) x = draws.next();
    return v;
}

double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

double lipschitz_ratio(double df, double dy, double dz, double C2, double C3) {
    const double bound = C2 * dy + C3 * dz;
    if (df == 0.0) return 0.0;
    if (bound == 0.0) return std::numeric_limits<double>::infinity();
    return df / bound;
}

struct Auditor {
    double C2, C3, C4;
    ValidationReport report;

    Auditor(double c2, double c3, double c4) : C2(c2), C3(c3), C4(c4) {
        report.max_lipschitz_ratio = 0.0;
        report.max_growth_excess = -std::numeric_limits<double>::infinity();
    }

    void growth(const std::vector<double>& y, const std::vector<double>& z,
                std::span<const double> f) {
        const double excess = norm(f) - (C2 * norm(y) + C3 * norm(z) + C4);
        if (excess > report.max_growth_excess) {
            report.max_growth_excess = excess;
            report.growth_witness = {y, z, {}, {}};
        }
    }

    void pair(const std::vector<double>& y1, const std::vector<double>& z1,
              std::span<const double> f1, const std::vector<double>& y2,
              const std::vector<double>& z2, std::span<const double> f2) {
        const double r = lipschitz_ratio(distance(f1, f2), distance(y1, y2), distance(z1, z2), C2, C3);
        if (r > report.max_lipschitz_ratio) {
            report.max_lipschitz_ratio = r;
            report.lipschitz_witness = {y1, z1, y2, z2};
        }
    }

    ValidationReport finish(std::size_t samples) {
        report.samples = samples;
        report.lipschitz_ok = report.max_lipschitz_ratio <= 1.0;
        report.growth_ok = report.max_growth_excess <= 0.0;
        return report;
    }
};

}  // namespace

void ProblemSpec::validate() const {
    require(d >= 1, "d", "must be >= 1");
    require(k >= 1, "k", "must be >= 1");
    require(std::isfinite(T) && T > 0.0, "T", "must be a positive finite horizon");
    require(finite_nonneg(C1), "C1", "must be finite and >= 0");
    require(finite_nonneg(C2), "C2", "must be finite and >= 0");
    require(finite_nonneg(C3), "C3", "must be finite and >= 0");
    require(finite_nonneg(C4), "C4", "must be finite and >= 0");
    const auto du = static_cast<std::size_t>(d);
    const auto ku = static_cast<std::size_t>(k);
    std::visit(overloaded{
                   [&](const ConstantTerminal& t) {
                       require(t.value.size() == du, "terminal", "constant value must have d entries");
                       require(all_finite(t.value), "terminal", "constant value must be finite");
                   },
                   [&](const CosineTerminal& t) {
                       require(std::isfinite(t.scale), "terminal", "scale must be finite");
                   },
                   [&](const SineTerminal& t) {
                       require(std::isfinite(t.scale), "terminal", "scale must be finite");
                   },
                   [&](const ClippedPolynomialTerminal& t) {
                       require(t.coefficients.size() == du, "terminal",
                               "clipped polynomial needs one coefficient list per component");
                       for (const auto& c : t.coefficients)
                           require(all_finite(c), "terminal", "coefficients must be finite");
                       require(finite_nonneg(t.clip_radius), "terminal", "clip radius must be >= 0");
                   },
               },
               terminal);
    std::visit(overloaded{
                   [&](const ZeroGenerator&) {},
                   [&](const ConstantGenerator& g) {
                       require(g.c.size() == ku && all_finite(g.c), "generator",
                               "constant c must have k finite entries");
                   },
                   [&](const TanhGenerator& g) {
                       require(g.c.size() == ku && all_finite(g.c), "generator",
                               "tanh c must have k finite entries");
                   },
                   [&](const ClippedLinearGenerator& g) {
                       require(g.A.size() == ku * du && all_finite(g.A), "generator",
                               "A must be k x d");
                       require(g.B.size() == ku * du * ku && all_finite(g.B), "generator",
                               "B must be k x (d k)");
                       require(finite_nonneg(g.clip_radius), "generator", "clip radius must be >= 0");
                   },
               },
               generator);
    require(solver.degree >= 0 && solver.degree <= 10, "solver", "degree must be in [0, 10]");
    require(solver.max_iter >= 1, "solver", "max_iter must be >= 1");
    require(std::isfinite(solver.tol) && solver.tol > 0.0, "solver", "tol must be > 0");
}

void evaluate_generator(const GeneratorSpec& spec, int d, int k, std::span<const double> y,
                        std::span<const double> z, std::span<double> out) {
    if (!all_finite(y) || !all_finite(z)) throw InputError("evaluate_generator: non-finite (y, z)");
    const auto du = static_cast<std::size_t>(d);
    const auto ku = static_cast<std::size_t>(k);
    std::visit(overloaded{
                   [&](const ZeroGenerator&) { std::fill(out.begin(), out.end(), 0.0); },
                   [&](const ConstantGenerator& g) { std::copy(g.c.begin(), g.c.end(), out.begin()); },
                   [&](const TanhGenerator& g) {
                       const double t = std::tanh(y[0]);
                       for (std::size_t j = 0; j < ku; ++j) out[j] = g.c[j] * t;
                   },
                   [&](const ClippedLinearGenerator& g) {
                       for (std::size_t j = 0; j < ku; ++j) {
                           double s = 0.0;
                           for (std::size_t i = 0; i < du; ++i) s += g.A[j * du + i] * y[i];
                           for (std::size_t m = 0; m < du * ku; ++m) s += g.B[j * du * ku + m] * z[m];
                           out[j] = s;
                       }
                       clip_to_ball(out.first(ku), g.clip_radius);
                   },
               },
               spec);
}

std::vector<double> evaluate_generator(const GeneratorSpec& spec, int d, int k,
                                       std::span<const double> y, std::span<const double> z) {
    std::vector<double> out(static_cast<std::size_t>(k));
    evaluate_generator(spec, d, k, y, z, out);
    return out;
}

void evaluate_terminal(const ProblemSpec& spec, std::span<const double> w, std::span<double> out) {
    if (!all_finite(w)) throw InputError("evaluate_terminal: non-finite state");
    const auto du = static_cast<std::size_t>(spec.d);
    std::visit(overloaded{
                   [&](const ConstantTerminal& t) { std::copy(t.value.begin(), t.value.end(), out.begin()); },
                   [&](const CosineTerminal& t) {
                       std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(du), 0.0);
                       out[0] = t.scale * std::cos(w[0]);
                   },
                   [&](const SineTerminal& t) {
                       std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(du), 0.0);
                       out[0] = t.scale * std::sin(w[0]);
                   },
                   [&](const ClippedPolynomialTerminal& t) {
                       for (std::size_t i = 0; i < du; ++i) {
                           double acc = 0.0;
                           const auto& c = t.coefficients[i];
                           for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * w[0] + *it;
                           out[i] = acc;
                       }
                       clip_to_ball(out.first(du), t.clip_radius);
                   },
               },
               spec.terminal);
    clip_to_ball(out.first(du), spec.C1);
}

std::vector<double> evaluate_terminal(const ProblemSpec& spec, std::span<const double> w) {
    std::vector<double> out(static_cast<std::size_t>(spec.d));
    evaluate_terminal(spec, w, out);
    return out;
}

GeneratorConstants documented_constants(const GeneratorSpec& spec, int d, int k) {
    return std::visit(
        overloaded{
            [](const ZeroGenerator&) { return GeneratorConstants{}; },
            [](const ConstantGenerator& g) { return GeneratorConstants{0.0, 0.0, norm(g.c)}; },
            [](const TanhGenerator& g) {
                return GeneratorConstants{norm(g.c) * kNormInflation, 0.0, 0.0};
            },
            [&](const ClippedLinearGenerator& g) {
                return GeneratorConstants{spectral_norm(g.A, k, d) * kNormInflation,
                                          spectral_norm(g.B, k, d * k) * kNormInflation, 0.0};
            },
        },
        spec);
}

ValidationReport validate_constants(const ProblemSpec& spec, std::size_t n_samples,
                                    std::uint64_t seed) {
    if (n_samples < 2) throw InputError("validate_constants: n_samples must be >= 2");
    const int dk = spec.d * spec.k;
    const double radius = 2.0 * spec.C1;
    Auditor audit(spec.C2, spec.C3, spec.C4);
    std::vector<double> f1(static_cast<std::size_t>(spec.k)), f2(f1.size());
    for (std::size_t s = 0; s < n_samples; ++s) {
        NormalDraws draws(seed, s);
        auto y1 = sample_ball(draws, spec.d, radius);
        auto z1 = sample_normal(draws, dk);
        std::vector<double> y2, z2;
        if (s % 2 == 0) {
            y2 = sample_ball(draws, spec.d, radius);
            z2 = sample_normal(draws, dk);
        } else {
            // Local pair: probes the slope rather than the secant.
            constexpr double eps = 1e-3;
            y2 = y1;
            z2 = z1;
            for (double& v : y2) v += eps * draws.next();
            for (double& v : z2) v += eps * draws.next();
        }
        evaluate_generator(spec.generator, spec.d, spec.k, y1, z1, f1);
        evaluate_generator(spec.generator, spec.d, spec.k, y2, z2, f2);
        audit.growth(y1, z1, f1);
        audit.growth(y2, z2, f2);
        audit.pair(y1, z1, f1, y2, z2, f2);
    }
    return audit.finish(n_samples);
}

ValidationReport validate_generator_table(std::span<const GeneratorSample> rows, int d, int k,
                                          double C2, double C3, double C4) {
    const auto du = static_cast<std::size_t>(d);
    const auto ku = static_cast<std::size_t>(k);
    for (const auto& r : rows) {
        if (r.y.size() != du || r.z.size() != du * ku || r.f.size() != ku)
            throw InputError("generator table row has wrong dimensions");
        if (!all_finite(r.y) || !all_finite(r.z) || !all_finite(r.f))
            throw InputError("generator table row is not finite");
    }
    Auditor audit(C2, C3, C4);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        audit.growth(rows[a].y, rows[a].z, rows[a].f);
        for (std::size_t b = a + 1; b < rows.size(); ++b)
            audit.pair(rows[a].y, rows[a].z, rows[a].f, rows[b].y, rows[b].z, rows[b].f);
    }
    return audit.finish(rows.size());
}

}  // namespace qbsde
