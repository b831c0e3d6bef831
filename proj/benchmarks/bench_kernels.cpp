#include <benchmark/benchmark.h>

#include <random>

#include "lddm/kernels.hpp"

using namespace lddm;

namespace {

VectorField noise(const Grid2D &g) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorField f(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        f.ux()[k] = u(rng);
        f.uy()[k] = u(rng);
    }
    return f;
}

void BM_gaussian_apply(benchmark::State &state) {
    const Grid2D g(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
    const VectorField p = noise(g);
    const KernelSpec k = KernelSpec::gaussian(static_cast<double>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_kernel(k, p));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.size()));
}
BENCHMARK(BM_gaussian_apply)->Args({64, 4})->Args({128, 7})->Args({128, 25})->Args({256, 25});

void BM_soft_symmetry_apply(benchmark::State &state) {
    const int n = static_cast<int>(state.range(0));
    const Grid2D g(n, n);
    const VectorField p = noise(g);
    const KernelSpec k = KernelSpec::sum(
        {KernelSpec::symmetrized(0.5, KernelSpec::gaussian(n / 5.0)), KernelSpec::gaussian(n / 18.0)});
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_kernel(k, p));
    }
}
BENCHMARK(BM_soft_symmetry_apply)->Arg(64)->Arg(128);

} // namespace
