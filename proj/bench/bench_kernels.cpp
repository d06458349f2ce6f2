// Serial reference against the OpenMP path for the hot kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "qbsde/kernels.hpp"
#include "qbsde/paths.hpp"
#include "qbsde/regression.hpp"

using namespace qbsde;

namespace {

kernels::Exec exec_of(const benchmark::State& state) {
    return state.range(1) ? kernels::Exec::parallel : kernels::Exec::serial;
}

void label(benchmark::State& state) { state.SetLabel(state.range(1) ? "openmp" : "serial"); }

void BM_FillGaussian(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::vector<double> out(n * 50);
    for (auto _ : state) {
        kernels::fill_gaussian(exec_of(state), 7, rng::Stream::increments, n, 50, 1, 0.02, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * out.size()));
    label(state);
}

void BM_NormalEquations(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const std::size_t p = 5;
    std::vector<double> design(n * p), targets(n), weights(n, 1.0), gram(p * p), rhs(p);
    for (std::size_t i = 0; i < design.size(); ++i) design[i] = static_cast<double>(i % 17) * 0.1;
    for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<double>(i % 13) * 0.05;
    for (auto _ : state) {
        kernels::normal_equations(exec_of(state), design, n, p, weights, targets, 1, gram, rhs);
        benchmark::DoNotOptimize(gram.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
    label(state);
}

void BM_SuffixLogWeights(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const int steps = 50;
    std::vector<double> drift(n * steps, 0.3), out(n * (steps + 1));
    const auto ens = generate_ensemble(TimeGrid(0.0, 1.0, steps), n, 1, 3);
    for (auto _ : state) {
        kernels::suffix_log_weights(exec_of(state), drift, ens.increments(), n, steps, 1, 1.0 / steps, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * steps));
    label(state);
}

void BM_Regression(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto ens = generate_ensemble(TimeGrid(0.0, 1.0, 1), n, 1, 5);
    std::vector<double> y(n);
    const auto s = ens.states_at(1);
    for (std::size_t i = 0; i < n; ++i) y[i] = s[i] * s[i];
    const Basis basis(BasisSpec{4, false}, 1);
    FitOptions o;
    o.exec = exec_of(state);
    for (auto _ : state) {
        auto fit = fit_conditional_expectation(s, n, y, 1, {}, basis, 1.0, o);
        benchmark::DoNotOptimize(fit.coeffs.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
    label(state);
}

void Args(benchmark::internal::Benchmark* b) {
    for (int n : {10000, 100000})
        for (int par : {0, 1}) b->Args({n, par});
    b->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_FillGaussian)->Apply(Args);
BENCHMARK(BM_NormalEquations)->Apply(Args);
BENCHMARK(BM_SuffixLogWeights)->Apply(Args);
BENCHMARK(BM_Regression)->Apply(Args);

BENCHMARK_MAIN();
