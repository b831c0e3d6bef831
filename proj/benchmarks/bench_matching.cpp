#include <benchmark/benchmark.h>

#include <cmath>

#include "lddm/matching.hpp"

using namespace lddm;

namespace {

Image blob(const Grid2D &g, double cx, double cy, double s) {
    Image img(g);
    for (int j = 0; j < g.height(); ++j) {
        for (int i = 0; i < g.width(); ++i) {
            img(i, j) = std::exp(-((i - cx) * (i - cx) + (j - cy) * (j - cy)) / (2 * s * s));
        }
    }
    return img;
}

struct Problem {
    Image source, target;
    MatchConfig cfg;
    std::vector<VectorField> momenta;
};

Problem problem(int n) {
    const Grid2D g(n, n);
    Problem p{blob(g, 0.45 * n, 0.5 * n, n / 9.0), blob(g, 0.5 * n, 0.5 * n, n / 9.0), {}, {}};
    p.cfg.kernel = KernelSpec::gaussian(n / 8.0);
    p.cfg.n_timesteps = 8;
    for (int k = 0; k < 8; ++k) {
        VectorField m(g);
        m.set(n / 2, n / 2, {0.1, 0.0});
        p.momenta.push_back(m);
    }
    return p;
}

void BM_objective(benchmark::State &state) {
    const Problem p = problem(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(objective(p.momenta, p.source, p.target, p.cfg));
    }
}
BENCHMARK(BM_objective)->Arg(32)->Arg(64)->Arg(128);

void BM_gradient(benchmark::State &state) {
    const Problem p = problem(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(gradient(p.momenta, p.source, p.target, p.cfg));
    }
}
BENCHMARK(BM_gradient)->Arg(32)->Arg(64)->Arg(128);

void BM_register(benchmark::State &state) {
    Problem p = problem(64);
    p.cfg.max_iters = static_cast<int>(state.range(0));
    p.cfg.sim_weight = 50.0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(register_images(p.source, p.target, p.cfg));
    }
    state.SetLabel("64x64, N=8");
}
BENCHMARK(BM_register)->Arg(20)->Unit(benchmark::kMillisecond);

} // namespace
