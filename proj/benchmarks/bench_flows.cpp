#include <benchmark/benchmark.h>

#include <cmath>

#include "lddm/flows.hpp"

using namespace lddm;

namespace {

VelocityPath swirl(int size, int steps) {
    const Grid2D g(size, size);
    VectorField v(g);
    const double c = 0.5 * (size - 1), s = size / 6.0;
    for (int j = 0; j < size; ++j) {
        for (int i = 0; i < size; ++i) {
            const double x = i - c, y = j - c;
            const double w = 2.0 * std::exp(-(x * x + y * y) / (2 * s * s));
            v.set(i, j, {-w * y / s, w * x / s});
        }
    }
    return VelocityPath(std::vector<VectorField>(static_cast<std::size_t>(steps), v));
}

void BM_integrate_spatial(benchmark::State &state) {
    const VelocityPath v = swirl(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate_spatial(v));
    }
}
BENCHMARK(BM_integrate_spatial)->Args({64, 8})->Args({128, 8})->Args({128, 32});

void BM_integrate_inverse(benchmark::State &state) {
    const VelocityPath v = swirl(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(integrate_inverse(v));
    }
}
BENCHMARK(BM_integrate_inverse)->Args({64, 8})->Args({128, 8});

void BM_invert(benchmark::State &state) {
    const Deformation phi = integrate_spatial(swirl(static_cast<int>(state.range(0)), 8)).final();
    for (auto _ : state) {
        benchmark::DoNotOptimize(invert(phi));
    }
}
BENCHMARK(BM_invert)->Arg(64)->Arg(128);

void BM_correspond(benchmark::State &state) {
    const DeformationPath phi = integrate_spatial(swirl(64, static_cast<int>(state.range(0))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(correspond_left_right(phi));
    }
}
BENCHMARK(BM_correspond)->Arg(8);

} // namespace
