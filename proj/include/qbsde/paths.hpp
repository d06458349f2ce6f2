#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qbsde/kernels.hpp"

namespace qbsde {

struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    int steps = 1;

    TimeGrid() = default;
    TimeGrid(double start, double end, int n);

    double dt() const noexcept { return (t1 - t0) / steps; }
    /// Grid point i in [0, steps]; the last point is exactly t1.
    double time(int i) const noexcept { return i == steps ? t1 : t0 + i * dt(); }
};

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{4} << 30;  // bytes

/// Brownian increments over a grid, plus the Brownian state at the grid start.
///
/// The start state W_{t0} is drawn from N(0, t0) (zero when t0 = 0) so that an
/// ensemble on a later window sees the same marginal law of W as a path
/// started at time 0. Tensors are stored time-major: element (step, path, j)
/// at (step * n_paths + path) * k + j.
class PathEnsemble {
public:
    PathEnsemble(TimeGrid grid, std::size_t n_paths, int k, std::uint64_t seed,
                 std::vector<double> initial, std::vector<double> increments);

    const TimeGrid& grid() const noexcept { return grid_; }
    std::size_t n_paths() const noexcept { return n_paths_; }
    int k() const noexcept { return k_; }
    int steps() const noexcept { return grid_.steps; }
    std::uint64_t seed() const noexcept { return seed_; }

    std::span<const double> increments() const noexcept { return increments_; }
    /// Increments of every path at one step, [n_paths, k].
    std::span<const double> increments_at(int step) const noexcept;
    double increment(std::size_t path, int step, int j) const noexcept;

    /// Brownian state at grid point i for every path, [n_paths, k].
    std::span<const double> states_at(int i) const noexcept;
    std::span<const double> initial_states() const noexcept { return states_at(0); }

private:
    TimeGrid grid_;
    std::size_t n_paths_;
    int k_;
    std::uint64_t seed_;
    std::vector<double> increments_;
    std::vector<double> states_;  // [steps + 1, n, k]
};

/// Bytes that generate_ensemble would allocate.
std::size_t ensemble_bytes(std::size_t n_paths, int steps, int k) noexcept;

/// Deterministic in (grid, n_paths, k, seed). Throws SizeError before
/// allocating when the ensemble would exceed `memory_budget` bytes.
PathEnsemble generate_ensemble(const TimeGrid& grid, std::size_t n_paths, int k, std::uint64_t seed,
                               kernels::Exec exec = kernels::Exec::parallel,
                               std::size_t memory_budget = kDefaultMemoryBudget);

struct WeightResult {
    std::vector<double> weights;      // [n_paths], all > 0
    std::vector<double> log_weights;  // after clipping
    std::size_t clip_events = 0;
};

inline constexpr double kLogWeightClip = 30.0;

/// exp(-sum f.dW - 0.5 sum |f|^2 dt) per path over the whole grid, with the
/// exponent clipped to [-30, 30]. `drift` holds f at left endpoints, time-major
/// [steps, n, k].
WeightResult stochastic_exponential_weights(const PathEnsemble& ensemble,
                                            std::span<const double> drift);

struct ItoSums {
    std::vector<double> ito;        // [n_paths, d]: sum z_s dW_s
    std::vector<double> quadratic;  // [n_paths]: sum |z_s|^2 dt
};

/// Left-endpoint stochastic and Lebesgue sums. `integrand` is time-major
/// [steps, n, d, k]; `d` is inferred from its size and rejected on mismatch.
ItoSums integrate(const PathEnsemble& ensemble, std::span<const double> integrand);

/// Binary dump: magic "QBSDE1\0\0" (8 bytes), then u64 n_paths, u64 steps,
/// u64 k, u64 seed, f64 t0, f64 t1, then initial states [n_paths, k] and
/// increments [n_paths, steps, k] (path-major), all little-endian.
void write_ensemble(const PathEnsemble& ensemble, const std::filesystem::path& file);
PathEnsemble read_ensemble(const std::filesystem::path& file);

}  // namespace qbsde
