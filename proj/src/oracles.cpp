#include "qbsde/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <variant>

#include "qbsde/common.hpp"
#include "qbsde/kernels.hpp"

namespace qbsde {

OracleValue heat_kernel_oracle(double t, double w, double T, TrigKind kind) {
    const double decay = std::exp(-0.5 * (T - t));
    if (kind == TrigKind::cos) return {decay * std::cos(w), -decay * std::sin(w)};
    return {decay * std::sin(w), decay * std::cos(w)};
}

OracleValue constant_drift_oracle(double t, double w, double T, double c, TrigKind kind) {
    return heat_kernel_oracle(t, w - c * (T - t), T, kind);
}

namespace {

// The generator as a plain scalar function for d = k = 1, resolved once so the
// per-node inner loop skips the variant dispatch and input screening.
std::function<double(double, double)> scalar_generator(const GeneratorSpec& g) {
    if (std::holds_alternative<ZeroGenerator>(g)) return [](double, double) { return 0.0; };
    if (const auto* c = std::get_if<ConstantGenerator>(&g)) {
        const double v = c->c.at(0);
        return [v](double, double) { return v; };
    }
    if (const auto* t = std::get_if<TanhGenerator>(&g)) {
        const double v = t->c.at(0);
        return [v](double y, double) { return v * std::tanh(y); };
    }
    const auto& lin = std::get<ClippedLinearGenerator>(g);
    const double a = lin.A.at(0), b = lin.B.at(0), r = lin.clip_radius;
    return [a, b, r](double y, double z) { return std::clamp(a * y + b * z, -r, r); };
}

}  // namespace

TreeResult tree_oracle(const ProblemSpec& spec, int n_steps, bool keep_lattice) {
    if (spec.d != 1 || spec.k != 1) throw InputError("tree_oracle: needs d = k = 1");
    if (n_steps < 1) throw InputError("tree_oracle: n_steps must be >= 1");
    const double dt = spec.T / n_steps;
    const double sq = std::sqrt(dt);
    const auto gen = scalar_generator(spec.generator);

    TreeResult out;
    out.steps = n_steps;
    std::vector<double> next(static_cast<std::size_t>(n_steps) + 1);
    std::vector<double> here(next.size());
    std::vector<double> zlev(next.size());
    for (int j = 0; j <= n_steps; ++j) {
        const double x = (2.0 * j - n_steps) * sq;
        double xi = 0.0;
        evaluate_terminal(spec, std::span<const double>(&x, 1), std::span<double>(&xi, 1));
        next[static_cast<std::size_t>(j)] = xi;
    }
    if (keep_lattice) {
        out.y.resize(static_cast<std::size_t>(n_steps) + 1);
        out.z.resize(static_cast<std::size_t>(n_steps));
        out.y.back() = next;
    }

    for (int i = n_steps - 1; i >= 0; --i) {
        const auto nodes = static_cast<std::size_t>(i) + 1;
        std::vector<int> bad(nodes, 0);
        kernels::for_each_index(kernels::Exec::parallel, nodes, [&](std::size_t j) {
            const double up = next[j + 1];
            const double down = next[j];
            const double m = 0.5 * (up + down);
            const double z = (up - down) / (2.0 * sq);
            double y = m;
            bool settled = false;
            for (int it = 0; it < kTreeInnerIterations; ++it) {
                const double f = gen(y, z);
                if (!std::isfinite(f)) break;
                const double y_new = (1.0 - kTreeDamping) * y + kTreeDamping * (m - dt * z * f);
                const double change = std::abs(y_new - y);
                y = y_new;
                if (change <= kTreeInnerTol) {
                    settled = true;
                    break;
                }
            }
            here[j] = y;
            zlev[j] = z;
            bad[j] = settled ? 0 : 1;
        });
        if (out.converged) {
            const auto it = std::find(bad.begin(), bad.end(), 1);
            if (it != bad.end()) {
                out.converged = false;
                out.failed_level = i;
                out.failed_node = static_cast<int>(it - bad.begin());
            }
        }
        if (keep_lattice) {
            out.y[static_cast<std::size_t>(i)].assign(here.begin(), here.begin() + static_cast<std::ptrdiff_t>(nodes));
            out.z[static_cast<std::size_t>(i)].assign(zlev.begin(), zlev.begin() + static_cast<std::ptrdiff_t>(nodes));
        }
        std::swap(next, here);
        if (i == 0) out.z0 = zlev[0];
    }
    out.y0 = next[0];
    return out;
}

std::optional<OracleReference> OracleRegistry::lookup(const ProblemSpec& spec) const {
    for (const auto& e : entries_) {
        if (e.applies(spec)) return OracleReference{e.name, e.y0(spec)};
    }
    return std::nullopt;
}

namespace {

// Amplitude and kind of a scalar trigonometric terminal that clipping leaves
// untouched (|scale| <= C1), so the closed forms apply verbatim.
std::optional<std::pair<double, TrigKind>> unclipped_trig(const ProblemSpec& spec) {
    if (spec.d != 1 || spec.k != 1) return std::nullopt;
    if (const auto* c = std::get_if<CosineTerminal>(&spec.terminal)) {
        if (std::abs(c->scale) <= spec.C1) return std::pair{c->scale, TrigKind::cos};
    }
    if (const auto* s = std::get_if<SineTerminal>(&spec.terminal)) {
        if (std::abs(s->scale) <= spec.C1) return std::pair{s->scale, TrigKind::sin};
    }
    return std::nullopt;
}

OracleRegistry make_default() {
    OracleRegistry reg;
    reg.add({"constant-terminal",
             [](const ProblemSpec& s) { return std::holds_alternative<ConstantTerminal>(s.terminal); },
             [](const ProblemSpec& s) {
                 const std::vector<double> origin(static_cast<std::size_t>(s.k), 0.0);
                 return evaluate_terminal(s, origin)[0];
             }});
    reg.add({"heat-kernel",
             [](const ProblemSpec& s) {
                 return std::holds_alternative<ZeroGenerator>(s.generator) && unclipped_trig(s).has_value();
             },
             [](const ProblemSpec& s) {
                 const auto [a, kind] = *unclipped_trig(s);
                 return a * heat_kernel_oracle(0.0, 0.0, s.T, kind).y;
             }});
    reg.add({"constant-drift",
             [](const ProblemSpec& s) {
                 return std::holds_alternative<ConstantGenerator>(s.generator) && unclipped_trig(s).has_value();
             },
             [](const ProblemSpec& s) {
                 const auto [a, kind] = *unclipped_trig(s);
                 const double c = std::get<ConstantGenerator>(s.generator).c.at(0);
                 return a * constant_drift_oracle(0.0, 0.0, s.T, c, kind).y;
             }});
    reg.add({"tree",
             [](const ProblemSpec& s) { return s.d == 1 && s.k == 1; },
             [](const ProblemSpec& s) { return tree_oracle(s, kRegistryTreeSteps).y0; }});
    return reg;
}

}  // namespace

const OracleRegistry& default_oracles() {
    static const OracleRegistry registry = make_default();
    return registry;
}

}  // namespace qbsde
