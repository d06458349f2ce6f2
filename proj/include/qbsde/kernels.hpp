#pragma once

// Data-parallel inner loops. Each kernel has a serial reference path and an
// OpenMP path selected by `Exec`; the reference path is what the unit tests
// compare against and what the benchmark uses as baseline.
//
// Layout convention for per-path tensors: time-major, element (step, path, j)
// lives at ((step * n_paths) + path) * width + j.

#include <cstddef>
#include <cstdint>
#include <span>

#include "qbsde/rng.hpp"

namespace qbsde::kernels {

enum class Exec { serial, parallel };

/// Rows per partial sum in the parallel reductions. Fixed so that the
/// parallel result does not depend on the thread count.
inline constexpr std::size_t kReductionBlock = 2048;

/// Runs fn(i) for i in [0, n). Iterations must be independent.
template <class Fn>
void for_each_index(Exec exec, std::size_t n, Fn&& fn) {
    if (exec == Exec::serial) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) fn(static_cast<std::size_t>(i));
}

/// Centered Gaussian draws with the given variance, keyed by
/// (seed, stream, path, step, component). Output is time-major [steps, n, k].
/// Both paths produce bit-identical tensors.
void fill_gaussian(Exec exec, std::uint64_t seed, rng::Stream stream, std::size_t n_paths,
                   int steps, int k, double variance, std::span<double> out);

/// Weighted normal equations G = X^T W X (p x p) and B = X^T W Y (p x m).
/// X is row-major [n, p], Y row-major [n, m]; empty `weights` means unit
/// weights. The parallel path sums fixed blocks of kReductionBlock rows and
/// combines them in block order.
void normal_equations(Exec exec, std::span<const double> design, std::size_t n, std::size_t p,
                      std::span<const double> weights, std::span<const double> targets,
                      std::size_t m, std::span<double> gram, std::span<double> rhs);

/// Backward cumulative log-density of the discrete stochastic exponential:
/// out[i, path] = sum_{s >= i} ( -f_s . dW_s - 0.5 |f_s|^2 dt ), out[steps, .] = 0.
/// `drift` and `increments` are time-major [steps, n, k]; out is [steps + 1, n].
void suffix_log_weights(Exec exec, std::span<const double> drift,
                        std::span<const double> increments, std::size_t n_paths, int steps,
                        int k, double dt, std::span<double> out);

}  // namespace qbsde::kernels
