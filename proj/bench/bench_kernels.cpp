#include "levyfeller/montecarlo.hpp"
#include "levyfeller/semigroup.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <cmath>
#include <map>
#include <memory>

using namespace lf;

namespace {

std::shared_ptr<const FrozenKernel> rotation_kernel() {
    static const auto k = [] {
        const auto base = std::make_shared<const LevyModel1D>(make_truncated_stable(1.0));
        const auto p =
            std::make_shared<DensityProvider>(std::make_shared<const TruncatedModel1D>(truncate(base, 1.0 / 40.0)));
        return std::make_shared<const FrozenKernel>(make_rotation_field(2, 0.5),
                                                    std::vector<std::shared_ptr<DensityProvider>>{p, p});
    }();
    return k;
}

const LatticeSemigroup& lattice(double spacing) {
    static std::map<double, std::unique_ptr<LatticeSemigroup>> cache;
    auto& slot = cache[spacing];
    if (!slot) {
        SemigroupOptions o;
        o.half_width = 4.0;
        o.spacing = spacing;
        o.step = 1.0 / 64.0;
        slot = std::make_unique<LatticeSemigroup>(rotation_kernel(), o);
    }
    return *slot;
}

LatticeFunction ramp(std::size_t n) {
    LatticeFunction f;
    f.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) f.v[i] = std::sin(0.001 * static_cast<double>(i));
    f.far = 0.0;
    return f;
}

void BM_ApplySerial(benchmark::State& state) {
    const auto& op = lattice(1.0 / static_cast<double>(state.range(0))).frozen_substep();
    const LatticeFunction in = ramp(op.rows());
    LatticeFunction out;
    for (auto _ : state) {
        op.apply_serial(in, out);
        benchmark::DoNotOptimize(out.v.data());
    }
    state.counters["nnz"] = static_cast<double>(op.val.size());
}

void BM_ApplyParallel(benchmark::State& state) {
    const auto& op = lattice(1.0 / static_cast<double>(state.range(0))).frozen_substep();
    const LatticeFunction in = ramp(op.rows());
    LatticeFunction out;
    for (auto _ : state) {
        op.apply(in, out);
        benchmark::DoNotOptimize(out.v.data());
    }
    state.counters["threads"] = omp_get_max_threads();
}

void BM_MonteCarlo(benchmark::State& state) {
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.n_steps = 64;
    const auto base = std::make_shared<const LevyModel1D>(make_truncated_stable(1.0));
    const EulerSimulator sim(make_rotation_field(2, 0.5), {base, base}, cfg, 1.0 / 40.0);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    const Vec x0 = Vec::Zero(2);
    for (auto _ : state) benchmark::DoNotOptimize(sim.endpoints(x0, 0.25));
    omp_set_num_threads(saved);
}

}  // namespace

BENCHMARK(BM_ApplySerial)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ApplyParallel)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
