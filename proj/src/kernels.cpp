#include "qbsde/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qbsde::kernels {

namespace {

void gaussian_path(std::uint64_t seed, rng::Stream stream, std::size_t path, std::size_t n_paths,
                   int steps, int k, double sd, std::span<double> out) {
    const auto kk = static_cast<std::size_t>(k);
    for (int s = 0; s < steps; ++s) {
        double* cell = out.data() + (static_cast<std::size_t>(s) * n_paths + path) * kk;
        for (int j = 0; j < k; j += 2) {
            const auto [g0, g1] = rng::gaussian_pair(seed, stream, path, static_cast<std::uint32_t>(s),
                                                     static_cast<std::uint32_t>(j / 2));
            cell[j] = sd * g0;
            if (j + 1 < k) cell[j + 1] = sd * g1;
        }
    }
}

void accumulate_rows(std::span<const double> design, std::size_t begin, std::size_t end,
                     std::size_t p, std::span<const double> weights,
                     std::span<const double> targets, std::size_t m, double* __restrict gram,
                     double* __restrict rhs) {
    for (std::size_t r = begin; r < end; ++r) {
        const double* x = design.data() + r * p;
        const double* y = targets.data() + r * m;
        const double w = weights.empty() ? 1.0 : weights[r];
        for (std::size_t a = 0; a < p; ++a) {
            const double wx = w * x[a];
            for (std::size_t b = a; b < p; ++b) gram[a * p + b] += wx * x[b];
            for (std::size_t c = 0; c < m; ++c) rhs[a * m + c] += wx * y[c];
        }
    }
}

void symmetrize(std::span<double> gram, std::size_t p) {
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < a; ++b) gram[a * p + b] = gram[b * p + a];
}

void suffix_path(std::span<const double> drift, std::span<const double> increments,
                 std::size_t path, std::size_t n_paths, int steps, int k, double dt,
                 std::span<double> out) {
    const auto kk = static_cast<std::size_t>(k);
    double acc = 0.0;
    out[static_cast<std::size_t>(steps) * n_paths + path] = 0.0;
    for (int s = steps - 1; s >= 0; --s) {
        const std::size_t base = (static_cast<std::size_t>(s) * n_paths + path) * kk;
        double dot = 0.0;
        double sq = 0.0;
        for (std::size_t j = 0; j < kk; ++j) {
            const double f = drift[base + j];
            dot += f * increments[base + j];
            sq += f * f;
        }
        acc += -dot - 0.5 * sq * dt;
        out[static_cast<std::size_t>(s) * n_paths + path] = acc;
    }
}

}  // namespace

void fill_gaussian(Exec exec, std::uint64_t seed, rng::Stream stream, std::size_t n_paths,
                   int steps, int k, double variance, std::span<double> out) {
    const double sd = std::sqrt(variance);
    for_each_index(exec, n_paths, [&](std::size_t path) {
        gaussian_path(seed, stream, path, n_paths, steps, k, sd, out);
    });
}

void normal_equations(Exec exec, std::span<const double> design, std::size_t n, std::size_t p,
                      std::span<const double> weights, std::span<const double> targets,
                      std::size_t m, std::span<double> gram, std::span<double> rhs) {
    std::fill(gram.begin(), gram.end(), 0.0);
    std::fill(rhs.begin(), rhs.end(), 0.0);
    if (exec == Exec::serial) {
        accumulate_rows(design, 0, n, p, weights, targets, m, gram.data(), rhs.data());
        symmetrize(gram, p);
        return;
    }
    const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
    const std::size_t stride = p * p + p * m;
    std::vector<double> partial(blocks * stride, 0.0);
    for_each_index(Exec::parallel, blocks, [&](std::size_t b) {
        double* g = partial.data() + b * stride;
        const std::size_t begin = b * kReductionBlock;
        const std::size_t end = std::min(n, begin + kReductionBlock);
        accumulate_rows(design, begin, end, p, weights, targets, m, g, g + p * p);
    });
    for (std::size_t b = 0; b < blocks; ++b) {
        const double* g = partial.data() + b * stride;
        for (std::size_t i = 0; i < p * p; ++i) gram[i] += g[i];
        for (std::size_t i = 0; i < p * m; ++i) rhs[i] += g[p * p + i];
    }
    symmetrize(gram, p);
}

void suffix_log_weights(Exec exec, std::span<const double> drift,
                        std::span<const double> increments, std::size_t n_paths, int steps,
                        int k, double dt, std::span<double> out) {
    for_each_index(exec, n_paths, [&](std::size_t path) {
        suffix_path(drift, increments, path, n_paths, steps, k, dt, out);
    });
}

}  // namespace qbsde::kernels
