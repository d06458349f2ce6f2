#include "qbsde/picard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qbsde/common.hpp"

namespace qbsde {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using kernels::Exec;

/// f(Y(t_s, W_s), Z(t_s, W_s)) for every path at slice s, [n, k].
void driver_slice(const ProcessApprox& approx, const ProblemSpec& spec, const PathEnsemble& e,
                  int s, std::span<double> out) {
    const std::size_t n = e.n_paths();
    const auto d = static_cast<std::size_t>(spec.d);
    const auto k = static_cast<std::size_t>(spec.k);
    std::vector<double> y(n * d), z(n * d * k);
    const auto states = e.states_at(s);
    approx.eval_y_slice(s, states, n, y);
    approx.eval_z_slice(s, states, n, z);
    kernels::for_each_index(Exec::parallel, n, [&](std::size_t r) {
        evaluate_generator(spec.generator, spec.d, spec.k, std::span<const double>(y).subspan(r * d, d),
                           std::span<const double>(z).subspan(r * d * k, d * k),
                           out.subspan(r * k, k));
    });
}

double clipped_exp(double lw, std::size_t& clips) {
    if (lw > kLogWeightClip || lw < -kLogWeightClip) {
        ++clips;
        lw = std::clamp(lw, -kLogWeightClip, kLogWeightClip);
    }
    return std::exp(lw);
}

void record_slice0(const ProcessApprox& next, const SliceFit& yfit, PhiDiagnostics& diag) {
    const std::vector<double> origin(static_cast<std::size_t>(next.k()), 0.0);
    std::vector<double> y(static_cast<std::size_t>(next.d()));
    std::vector<double> z(static_cast<std::size_t>(next.d() * next.k()));
    next.eval_y(0, origin, y);
    next.eval_z(0, origin, z);
    diag.y0 = y[0];
    diag.z0 = z[0];
    diag.y0_se = prediction_se(next.basis(), next.scale(0), yfit.covariance.at(0), origin);
}

PhiResult phi_girsanov(const ProcessApprox& current, const ProblemSpec& spec, const PathEnsemble& e) {
    const std::size_t n = e.n_paths();
    const int steps = e.steps();
    const auto d = static_cast<std::size_t>(spec.d);
    const auto k = static_cast<std::size_t>(spec.k);
    const double dt = e.grid().dt();

    std::vector<double> drift(static_cast<std::size_t>(steps) * n * k);
    for (int s = 0; s < steps; ++s) {
        driver_slice(current, spec, e, s,
                     std::span<double>(drift).subspan(static_cast<std::size_t>(s) * n * k, n * k));
    }
    std::vector<double> suffix((static_cast<std::size_t>(steps) + 1) * n);
    kernels::suffix_log_weights(Exec::parallel, drift, e.increments(), n, steps, spec.k, dt, suffix);

    ProcessApprox next(current.grid(), spec.d, spec.k, current.basis(), current.clip_bound(),
                       current.terminal());
    PhiDiagnostics diag;
    std::vector<double> xi(n * d);
    next.eval_y_slice(steps, e.states_at(steps), n, xi);

    std::vector<double> w(n);
    SliceFit fit0;
    for (int i = 0; i < steps; ++i) {
        const double* lw = suffix.data() + static_cast<std::size_t>(i) * n;
        for (std::size_t r = 0; r < n; ++r) w[r] = clipped_exp(lw[r], diag.clip_events);
        diag.weight_evaluations += n;
        auto fit = fit_conditional_expectation(e.states_at(i), n, xi, d, w, next.basis(), next.scale(i),
                                               FitOptions{.covariance = i == 0});
        diag.max_condition = std::max(diag.max_condition, fit.condition);
        next.y_coeffs(i) = fit.coeffs;
        if (i == 0) {
            double mean = 0.0;
            for (double v : w) mean += v;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (double v : w) var += (v - mean) * (v - mean);
            var /= static_cast<double>(std::max<std::size_t>(n - 1, 1));
            diag.weight_mean = mean;
            diag.weight_se = std::sqrt(var / static_cast<double>(n));
            fit0 = std::move(fit);
        }
    }

    std::vector<double> y_next = xi, y_here(n * d), diff(n * d), dwq(n * k);
    for (int i = steps - 1; i >= 0; --i) {
        const auto si = static_cast<std::size_t>(i);
        next.eval_y_slice(i, e.states_at(i), n, y_here);
        const auto dw = e.increments_at(i);
        const double* f = drift.data() + si * n * k;
        for (std::size_t r = 0; r < n; ++r) {
            double lw = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const double fj = f[r * k + j];
                lw -= fj * dw[r * k + j] + 0.5 * fj * fj * dt;
                dwq[r * k + j] = dw[r * k + j] + fj * dt;
            }
            w[r] = clipped_exp(lw, diag.clip_events);
            for (std::size_t c = 0; c < d; ++c) diff[r * d + c] = y_next[r * d + c] - y_here[r * d + c];
        }
        diag.weight_evaluations += n;
        auto zfit = extract_Z(diff, d, dwq, e.states_at(i), n, dt, w, next.basis(), next.scale(i));
        diag.max_condition = std::max(diag.max_condition, zfit.condition);
        next.z_coeffs(i) = std::move(zfit.coeffs);
        std::swap(y_next, y_here);
    }
    record_slice0(next, fit0, diag);
    return {std::move(next), std::move(diag)};
}

PhiResult phi_frozen(const ProcessApprox& current, const ProblemSpec& spec, const PathEnsemble& e) {
    const std::size_t n = e.n_paths();
    const int steps = e.steps();
    const auto d = static_cast<std::size_t>(spec.d);
    const auto k = static_cast<std::size_t>(spec.k);
    const double dt = e.grid().dt();

    ProcessApprox next(current.grid(), spec.d, spec.k, current.basis(), current.clip_bound(),
                       current.terminal());
    PhiDiagnostics diag;
    std::vector<double> y_next(n * d), diff(n * d), target(n * d), f(n * k);
    next.eval_y_slice(steps, e.states_at(steps), n, y_next);

    SliceFit fit0;
    for (int i = steps - 1; i >= 0; --i) {
        const auto states = e.states_at(i);
        const double sc = next.scale(i);
        driver_slice(current, spec, e, i, f);

        const auto mfit = fit_conditional_expectation(states, n, y_next, d, {}, next.basis(), sc,
                                                      FitOptions{.keep_fitted = true});
        for (std::size_t x = 0; x < n * d; ++x) diff[x] = y_next[x] - mfit.fitted[x];
        auto zfit = extract_Z(diff, d, e.increments_at(i), states, n, dt, {}, next.basis(), sc,
                              FitOptions{.keep_fitted = true});
        const auto& zv = zfit.fitted;

        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) {
                double zf = 0.0;
                for (std::size_t j = 0; j < k; ++j) zf += zv[(r * d + c) * k + j] * f[r * k + j];
                target[r * d + c] = y_next[r * d + c] - dt * zf;
            }
        }
        auto yfit = fit_conditional_expectation(states, n, target, d, {}, next.basis(), sc,
                                                FitOptions{.covariance = i == 0});
        diag.max_condition = std::max({diag.max_condition, mfit.condition, zfit.condition, yfit.condition});
        next.y_coeffs(i) = yfit.coeffs;
        next.z_coeffs(i) = std::move(zfit.coeffs);
        if (i == 0) fit0 = std::move(yfit);
        std::swap(y_next, target);
    }
    record_slice0(next, fit0, diag);
    return {std::move(next), std::move(diag)};
}

}  // namespace

const char* to_string(Mode mode) noexcept {
    return mode == Mode::girsanov ? "girsanov" : "frozen-driver";
}

Mode parse_mode(const std::string& name) {
    if (name == "girsanov") return Mode::girsanov;
    if (name == "frozen-driver" || name == "frozen_driver") return Mode::frozen_driver;
    throw ConfigError("mode", "unknown mode '" + name + "' (expected girsanov or frozen-driver)");
}

const char* to_string(Verdict v) noexcept {
    switch (v) {
        case Verdict::converged: return "converged";
        case Verdict::max_iter: return "max_iter";
        case Verdict::no_contraction: return "no empirical contraction";
    }
    return "unknown";
}

double PhiDiagnostics::clip_fraction() const noexcept {
    return weight_evaluations ? static_cast<double>(clip_events) / static_cast<double>(weight_evaluations)
                              : 0.0;
}

PhiResult phi_step(const ProcessApprox& current, const ProblemSpec& spec, const PathEnsemble& ensemble,
                   Mode mode) {
    if (current.steps() != ensemble.steps() || current.grid().t0 != ensemble.grid().t0 ||
        current.grid().t1 != ensemble.grid().t1)
        throw InputError("phi_step: iterate and ensemble live on different grids");
    if (current.d() != spec.d || current.k() != spec.k || ensemble.k() != spec.k)
        throw InputError("phi_step: dimension mismatch between iterate, ensemble and problem");
    PhiResult out = mode == Mode::girsanov ? phi_girsanov(current, spec, ensemble)
                                           : phi_frozen(current, spec, ensemble);
    if (out.diagnostics.clip_fraction() > kClipWarning) {
        std::ostringstream msg;
        msg << "log-weight clipping on " << 100.0 * out.diagnostics.clip_fraction()
            << "% of weights; the measure change is unreliable";
        out.diagnostics.warnings.push_back(msg.str());
    }
    return out;
}

ProcessApprox initial_iterate(const ProcessApprox& shape, const PathEnsemble& e) {
    const std::size_t n = e.n_paths();
    const auto d = static_cast<std::size_t>(shape.d());
    std::vector<double> xi(n * d);
    shape.eval_y_slice(shape.steps(), e.states_at(e.steps()), n, xi);
    // Accumulating offsets from the first row keeps a constant terminal exact.
    std::vector<double> mean(d);
    for (std::size_t c = 0; c < d; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += xi[r * d + c] - xi[c];
        mean[c] = xi[c] + acc / static_cast<double>(n);
    }
    return ProcessApprox::constant(shape.grid(), shape.d(), shape.k(), shape.basis(),
                                   shape.clip_bound(), shape.terminal(), mean);
}

double sup_distance(const ProcessApprox& a, const ProcessApprox& b, const PathEnsemble& e) {
    const std::size_t n = e.n_paths();
    const auto d = static_cast<std::size_t>(a.d());
    std::vector<double> ya(n * d), yb(n * d), dist(n);
    double best = 0.0;
    for (int s = 0; s < a.steps(); ++s) {
        a.eval_y_slice(s, e.states_at(s), n, ya);
        b.eval_y_slice(s, e.states_at(s), n, yb);
        kernels::for_each_index(Exec::parallel, n, [&](std::size_t r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double x = ya[r * d + c] - yb[r * d + c];
                acc += x * x;
            }
            dist[r] = std::sqrt(acc);
        });
        best = std::max(best, *std::max_element(dist.begin(), dist.end()));
    }
    return best;
}

bool check_prop_bound(double before_sq, double before_se, double after_sq, double after_se,
                      const ConstantLedger& ledger) {
    if (std::isnan(ledger.C6_log)) return false;
    if (ledger.C6_log > 700.0) return true;  // C6 beyond any representable norm estimate
    const double tol = 3.0 * std::hypot(after_se, 0.5 * before_se);
    return after_sq <= std::exp(ledger.C6_log) + 0.5 * before_sq + tol;
}

IterateResult iterate(const ProcessApprox& shape, const ProblemSpec& spec, const PathEnsemble& e,
                      const IterateOptions& options) {
    if (options.max_iter < 1) throw InputError("iterate: max_iter must be >= 1");
    if (!(options.tol > 0.0)) throw InputError("iterate: tol must be > 0");

    ProcessApprox current = initial_iterate(shape, e);
    BmoEstimate before = estimate_bmo_norm(current, e, options.tail);
    ConvergenceTrace trace;
    double previous = kNaN;
    int stalls = 0;

    for (int it = 1; it <= options.max_iter; ++it) {
        PhiResult step = phi_step(current, spec, e, options.mode);
        TraceRecord rec;
        rec.iter = it;
        rec.dist_y = sup_distance(step.approx, current, e);
        const BmoEstimate dz = estimate_bmo_norm(z_difference(step.approx, current), e);
        rec.dist_z = std::sqrt(std::max(0.0, dz.value_sq));
        const BmoEstimate after = estimate_bmo_norm(step.approx, e, options.tail);
        rec.z_bmo_sq = after.value_sq;
        rec.z_bmo_se = after.se;
        rec.clip_events = step.diagnostics.clip_events;
        rec.y0 = step.diagnostics.y0;
        rec.y0_se = step.diagnostics.y0_se;
        if (options.ledger) {
            rec.y_bmo_bound_check =
                check_prop_bound(before.value_sq, before.se, after.value_sq, after.se, *options.ledger);
        }
        const double total = rec.dist_y + rec.dist_z;
        rec.ratio = it == 1 ? kNaN : (previous > 0.0 ? total / previous : 0.0);
        trace.records.push_back(rec);
        for (const auto& wmsg : step.diagnostics.warnings)
            trace.warnings.push_back("iteration " + std::to_string(it) + ": " + wmsg);
        trace.last = step.diagnostics;
        current = std::move(step.approx);
        before = after;

        if (total <= options.tol) {
            trace.verdict = Verdict::converged;
            break;
        }
        if (it > 1 && total >= previous) {
            if (++stalls >= 3) {
                trace.verdict = Verdict::no_contraction;
                break;
            }
        } else {
            stalls = 0;
        }
        previous = total;
    }
    return {std::move(current), std::move(trace)};
}

ProbeResult contraction_probe(const ProblemSpec& spec, const PathEnsemble& e, const ProcessApprox& start_a,
                              const ProcessApprox& start_b, Mode mode) {
    auto distance = [&](const ProcessApprox& a, const ProcessApprox& b) {
        const double dy = sup_distance(a, b, e);
        const BmoEstimate bz = estimate_bmo_norm(z_difference(a, b), e);
        const double root = std::sqrt(std::max(0.0, bz.value_sq));
        const double se = root > 0.0 ? bz.se / (2.0 * root) : 0.0;
        return std::pair{dy + root, se};
    };
    ProbeResult out;
    const auto [den, den_se] = distance(start_a, start_b);
    out.denominator = den;
    if (den == 0.0) return out;
    const auto img_a = phi_step(start_a, spec, e, mode);
    const auto img_b = phi_step(start_b, spec, e, mode);
    const auto [num, num_se] = distance(img_a.approx, img_b.approx);
    out.numerator = num;
    out.ratio = num / den;
    const double rel_num = num > 0.0 ? num_se / num : 0.0;
    out.se = out.ratio * std::hypot(rel_num, den_se / den);
    return out;
}

}  // namespace qbsde
