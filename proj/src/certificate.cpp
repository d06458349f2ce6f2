#include "qbsde/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "qbsde/common.hpp"

namespace qbsde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLambdaCap = 1.0 / 9.0;

double safe_exp(double x) { return x > 709.0 ? kInf : std::exp(x); }

}  // namespace

double DeltaTerms::max() const noexcept {
    return std::max({drift_term, lipschitz_term, coupling_term});
}

double ConstantLedger::C6() const noexcept { return safe_exp(C6_log); }
double ConstantLedger::R() const noexcept { return safe_exp(R_log); }

double compute_K(double C1, double C3) {
    if (!(C1 > 0.0) || !(C3 > 0.0))
        throw InputError("compute_K: C1 and C3 must be positive");
    const double product = C1 * C3;
    if (!(product < std::exp(-0.5))) {
        std::ostringstream msg;
        msg << "proposition hypothesis fails: C1*C3 = " << product << " >= e^{-1/2}";
        throw GateError(msg.str(), product);
    }
    return -(2.0 / (C1 * C1)) * (std::log(C1) + std::log(C3));
}

double compute_beta(double C1, double C3, double K) {
    return std::exp(-std::numbers::ln2 - std::log(C3) - K * C1 * C1);
}

double compute_alpha(double C1, double C2, double C3, double C4, double K, double beta) {
    const double numerator = C1 * C2 + C4;
    const double c3_over_beta = std::exp(std::log(C3) - std::log(beta));
    const double denominator = 2.0 * K - c3_over_beta;
    if (!(denominator > 0.0)) {
        throw GateError("proposition hypothesis fails: 2K - C3/beta <= 0", denominator);
    }
    if (numerator == 0.0) return kAlphaFloor;
    return numerator / denominator;
}

double compute_C6_log(double C1, double C2, double, double C4, double alpha, double K,
                      double deltaT) {
    return K * C1 * C1 + std::log(1.0 / K + alpha * (C1 * C2 + C4) * deltaT);
}

DeltaTerms delta_terms(const CertificateInputs& in, double delta, double T) {
    const double deltaT = delta * T;
    const double c6_log = compute_C6_log(in.C1, in.C2, in.C3, in.C4, in.alpha, in.K, deltaT);
    const double half_R_log = 0.5 * (std::numbers::ln2 + c6_log);
    DeltaTerms t;
    t.drift_term = 2.0 * (in.C1 * in.C2 + in.C4) * std::sqrt(deltaT);
    t.lipschitz_term = in.C2 > 0.0
        ? safe_exp(std::numbers::ln2 + std::log(in.C2) + 0.5 * std::log(deltaT) + half_R_log)
        : 0.0;
    t.coupling_term = in.C3 > 0.0
        ? safe_exp(std::numbers::ln2 + std::log(in.C3) + half_R_log)
        : 0.0;
    return t;
}

std::optional<DeltaChoice> try_search_delta(const CertificateInputs& in, double lambda, double T,
                                            int grid) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw InputError("search_delta: lambda must lie in (0, 1)");
    if (grid < 2) throw InputError("search_delta: grid must have at least 2 points");
    // Every term is nondecreasing in delta, so the first feasible point from
    // the top is the largest feasible one.
    for (int m = grid - 1; m >= 1; --m) {
        const double delta = static_cast<double>(m) / grid;
        const DeltaTerms t = delta_terms(in, delta, T);
        if (t.max() <= lambda) {
            return DeltaChoice{delta, static_cast<int>(std::ceil(1.0 / delta)), t};
        }
    }
    return std::nullopt;
}

DeltaChoice search_delta(const CertificateInputs& in, double lambda, double T, int grid) {
    auto choice = try_search_delta(in, lambda, T, grid);
    if (!choice) {
        throw GateError("window-length condition unsatisfiable for this lambda", lambda);
    }
    return *choice;
}

std::vector<double> lambda_grid(int points) {
    if (points < 1) throw InputError("lambda grid needs at least one point");
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(points));
    for (int i = points; i >= 1; --i) {
        grid.push_back(kLambdaCap * std::pow(100.0, -static_cast<double>(i) / points));
    }
    return grid;  // ascending
}

ConstantLedger certify(const ProblemSpec& spec, const LedgerOptions& options) {
    spec.validate();
    ConstantLedger L;
    L.C1 = spec.C1;
    L.C2 = spec.C2;
    L.C3 = spec.C3;
    L.C4 = spec.C4;
    L.T = spec.T;
    const double product = spec.C1 * spec.C3;
    L.prop_gate = product < std::exp(-0.5);
    L.theorem_reference_gate = product < std::exp(-324.0);

    const auto grid = lambda_grid(options.lambda_points);
    if (options.force_delta) {
        const double fd = *options.force_delta;
        if (!(fd > 0.0 && fd < 1.0)) throw InputError("forced delta must lie in (0, 1)");
        L.delta = fd;
        L.windows = static_cast<int>(std::ceil(1.0 / fd));
        L.delta_forced = true;
    }

    auto degenerate = [&](const std::string& why) {
        L.K = L.e_KC1sq_log = L.beta = L.alpha = kNaN;
        L.C6_log = L.R_log = L.tilde_R_log = kNaN;
        L.lambda = grid.back();
        if (!L.delta_forced) {
            L.delta = 1.0 / options.delta_points;
            L.windows = options.delta_points;
        }
        L.contraction_factor = 4.0 * L.lambda / (1.0 - 5.0 * L.lambda);
        L.existence_gate = false;
        L.uniqueness_gate = false;
        L.note = why;
        return L;
    };

    if (!(spec.C1 > 0.0) || !(spec.C3 > 0.0)) {
        return degenerate("C1 = 0 or C3 = 0: the constant formulas need C1, C3 > 0; "
                          "declare a small positive bound instead");
    }
    if (!L.prop_gate) {
        std::ostringstream msg;
        msg << "proposition hypothesis fails: C1*C3 = " << product << " >= e^{-1/2}";
        return degenerate(msg.str());
    }

    CertificateInputs in;
    in.C1 = spec.C1;
    in.C2 = spec.C2;
    in.C3 = spec.C3;
    in.C4 = spec.C4;
    in.K = compute_K(spec.C1, spec.C3);
    L.K = in.K;
    L.e_KC1sq_log = in.K * spec.C1 * spec.C1;
    L.beta = compute_beta(spec.C1, spec.C3, in.K);
    in.alpha = compute_alpha(spec.C1, spec.C2, spec.C3, spec.C4, in.K, L.beta);
    L.alpha = in.alpha;

    bool found = false;
    if (L.delta_forced) {
        L.terms = delta_terms(in, L.delta, spec.T);
        L.lambda = grid.back();
        for (double lam : grid) {
            if (L.terms.max() <= lam) {
                L.lambda = lam;
                found = true;
                break;
            }
        }
    } else {
        for (double lam : grid) {
            if (auto choice = try_search_delta(in, lam, spec.T, options.delta_points)) {
                L.lambda = lam;
                L.delta = choice->delta;
                L.windows = choice->windows;
                L.terms = choice->terms;
                found = true;
                break;
            }
        }
        if (!found) {
            L.lambda = grid.back();
            L.delta = 1.0 / options.delta_points;
            L.windows = options.delta_points;
            L.terms = delta_terms(in, L.delta, spec.T);
        }
    }

    L.C6_log = compute_C6_log(spec.C1, spec.C2, spec.C3, spec.C4, in.alpha, in.K, L.delta * spec.T);
    L.R_log = std::numbers::ln2 + L.C6_log;
    L.tilde_R_log = std::log(static_cast<double>(L.windows)) + L.R_log;
    L.contraction_factor = 4.0 * L.lambda / (1.0 - 5.0 * L.lambda);
    L.existence_gate = found;
    L.uniqueness_gate = found && std::sqrt(static_cast<double>(L.windows)) * L.lambda < kLambdaCap;
    if (!found) L.note = "window-length condition unsatisfiable for every grid lambda";
    return L;
}

}  // namespace qbsde
