#include "qbsde/paths.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qbsde/common.hpp"

namespace qbsde {

TimeGrid::TimeGrid(double start, double end, int n) : t0(start), t1(end), steps(n) {
    if (!(std::isfinite(start) && std::isfinite(end) && start < end))
        throw InputError("TimeGrid: need finite t0 < t1");
    if (n < 1) throw InputError("TimeGrid: steps must be >= 1");
}

PathEnsemble::PathEnsemble(TimeGrid grid, std::size_t n_paths, int k, std::uint64_t seed,
                           std::vector<double> initial, std::vector<double> increments)
    : grid_(grid), n_paths_(n_paths), k_(k), seed_(seed), increments_(std::move(increments)) {
    const auto width = n_paths * static_cast<std::size_t>(k);
    const auto steps = static_cast<std::size_t>(grid.steps);
    if (n_paths < 1 || k < 1) throw InputError("PathEnsemble: need n_paths >= 1 and k >= 1");
    if (initial.size() != width || increments_.size() != width * steps)
        throw InputError("PathEnsemble: tensor sizes do not match (n_paths, steps, k)");
    states_.resize(width * (steps + 1));
    std::copy(initial.begin(), initial.end(), states_.begin());
    for (std::size_t s = 0; s < steps; ++s) {
        const double* prev = states_.data() + s * width;
        const double* inc = increments_.data() + s * width;
        double* next = states_.data() + (s + 1) * width;
        for (std::size_t i = 0; i < width; ++i) next[i] = prev[i] + inc[i];
    }
}

std::span<const double> PathEnsemble::increments_at(int step) const noexcept {
    const auto width = n_paths_ * static_cast<std::size_t>(k_);
    return std::span<const double>(increments_).subspan(static_cast<std::size_t>(step) * width, width);
}

double PathEnsemble::increment(std::size_t path, int step, int j) const noexcept {
    return increments_[(static_cast<std::size_t>(step) * n_paths_ + path) * static_cast<std::size_t>(k_) +
                       static_cast<std::size_t>(j)];
}

std::span<const double> PathEnsemble::states_at(int i) const noexcept {
    const auto width = n_paths_ * static_cast<std::size_t>(k_);
    return std::span<const double>(states_).subspan(static_cast<std::size_t>(i) * width, width);
}

std::size_t ensemble_bytes(std::size_t n_paths, int steps, int k) noexcept {
    const auto width = n_paths * static_cast<std::size_t>(k);
    return sizeof(double) * width * (2 * static_cast<std::size_t>(steps) + 2);
}

PathEnsemble generate_ensemble(const TimeGrid& grid, std::size_t n_paths, int k, std::uint64_t seed,
                               kernels::Exec exec, std::size_t memory_budget) {
    if (n_paths < 1) throw InputError("generate_ensemble: n_paths must be >= 1");
    if (k < 1) throw InputError("generate_ensemble: k must be >= 1");
    if (n_paths > 0xFFFFFFFFull) throw SizeError("generate_ensemble: at most 2^32 - 1 paths");
    const std::size_t bytes = ensemble_bytes(n_paths, grid.steps, k);
    if (bytes > memory_budget) {
        std::ostringstream msg;
        msg << "ensemble of " << n_paths << " paths x " << grid.steps << " steps x " << k
            << " needs " << bytes << " bytes, budget is " << memory_budget;
        throw SizeError(msg.str());
    }
    const auto width = n_paths * static_cast<std::size_t>(k);
    std::vector<double> initial(width, 0.0);
    if (grid.t0 > 0.0) {
        kernels::fill_gaussian(exec, seed, rng::Stream::initial_state, n_paths, 1, k, grid.t0, initial);
    }
    std::vector<double> increments(width * static_cast<std::size_t>(grid.steps));
    kernels::fill_gaussian(exec, seed, rng::Stream::increments, n_paths, grid.steps, k, grid.dt(),
                           increments);
    return PathEnsemble(grid, n_paths, k, seed, std::move(initial), std::move(increments));
}

WeightResult stochastic_exponential_weights(const PathEnsemble& ensemble,
                                            std::span<const double> drift) {
    const std::size_t n = ensemble.n_paths();
    const int steps = ensemble.steps();
    if (drift.size() != ensemble.increments().size())
        throw InputError("stochastic_exponential_weights: drift must be [steps, n_paths, k]");
    if (!all_finite(drift)) throw InputError("stochastic_exponential_weights: non-finite drift");
    std::vector<double> suffix((static_cast<std::size_t>(steps) + 1) * n);
    kernels::suffix_log_weights(kernels::Exec::parallel, drift, ensemble.increments(), n, steps,
                                ensemble.k(), ensemble.grid().dt(), suffix);
    WeightResult out;
    out.weights.resize(n);
    out.log_weights.assign(suffix.begin(), suffix.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t p = 0; p < n; ++p) {
        double& lw = out.log_weights[p];
        if (lw > kLogWeightClip || lw < -kLogWeightClip) {
            lw = std::clamp(lw, -kLogWeightClip, kLogWeightClip);
            ++out.clip_events;
        }
        out.weights[p] = std::exp(lw);
    }
    return out;
}

ItoSums integrate(const PathEnsemble& ensemble, std::span<const double> integrand) {
    const std::size_t n = ensemble.n_paths();
    const auto k = static_cast<std::size_t>(ensemble.k());
    const auto steps = static_cast<std::size_t>(ensemble.steps());
    const std::size_t per_cell = steps * n * k;
    if (integrand.empty() || integrand.size() % per_cell != 0)
        throw InputError("integrate: integrand must be [steps, n_paths, d, k]");
    const std::size_t d = integrand.size() / per_cell;
    const double dt = ensemble.grid().dt();
    ItoSums out;
    out.ito.assign(n * d, 0.0);
    out.quadratic.assign(n, 0.0);
    kernels::for_each_index(kernels::Exec::parallel, n, [&](std::size_t p) {
        for (std::size_t s = 0; s < steps; ++s) {
            const double* z = integrand.data() + (s * n + p) * d * k;
            const auto dw = ensemble.increments_at(static_cast<int>(s)).subspan(p * k, k);
            double sq = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    acc += z[i * k + j] * dw[j];
                    sq += z[i * k + j] * z[i * k + j];
                }
                out.ito[p * d + i] += acc;
            }
            out.quadratic[p] += sq * dt;
        }
    });
    return out;
}

namespace {

constexpr char kMagic[8] = {'Q', 'B', 'S', 'D', 'E', '1', '\0', '\0'};

template <class T>
void put(std::ostream& os, T value) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    os.write(buf, 8);
}

template <class T>
T get(std::istream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw InputError("ensemble file truncated");
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | buf[i];
    T value;
    std::memcpy(&value, &bits, 8);
    return value;
}

}  // namespace

void write_ensemble(const PathEnsemble& e, const std::filesystem::path& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw InputError("cannot open " + file.string() + " for writing");
    os.write(kMagic, 8);
    const std::size_t n = e.n_paths();
    const auto k = static_cast<std::size_t>(e.k());
    put<std::uint64_t>(os, n);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(e.steps()));
    put<std::uint64_t>(os, k);
    put<std::uint64_t>(os, e.seed());
    put<double>(os, e.grid().t0);
    put<double>(os, e.grid().t1);
    for (double x : e.initial_states()) put<double>(os, x);
    for (std::size_t p = 0; p < n; ++p)
        for (int s = 0; s < e.steps(); ++s)
            for (std::size_t j = 0; j < k; ++j) put<double>(os, e.increment(p, s, static_cast<int>(j)));
    if (!os) throw InputError("write to " + file.string() + " failed");
}

PathEnsemble read_ensemble(const std::filesystem::path& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw InputError("cannot open " + file.string());
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw InputError(file.string() + " is not a QBSDE1 ensemble file");
    const auto n = static_cast<std::size_t>(get<std::uint64_t>(is));
    const auto steps = static_cast<int>(get<std::uint64_t>(is));
    const auto k = static_cast<int>(get<std::uint64_t>(is));
    const auto seed = get<std::uint64_t>(is);
    const double t0 = get<double>(is);
    const double t1 = get<double>(is);
    const auto ku = static_cast<std::size_t>(k);
    std::vector<double> initial(n * ku);
    for (double& x : initial) x = get<double>(is);
    std::vector<double> inc(n * ku * static_cast<std::size_t>(steps));
    for (std::size_t p = 0; p < n; ++p)
        for (int s = 0; s < steps; ++s)
            for (std::size_t j = 0; j < ku; ++j)
                inc[(static_cast<std::size_t>(s) * n + p) * ku + j] = get<double>(is);
    return PathEnsemble(TimeGrid(t0, t1, steps), n, k, seed, std::move(initial), std::move(inc));
}

}  // namespace qbsde
