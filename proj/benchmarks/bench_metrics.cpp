#include <benchmark/benchmark.h>

#include "microtrip/fixture.hpp"
#include "microtrip/metrics.hpp"
#include "microtrip/rng.hpp"

using namespace microtrip;

namespace {

std::vector<double> uniform_sample(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(0.0, 30.0);
    }
    return v;
}

std::vector<MicroTrip> trips(std::size_t n, std::uint64_t seed) {
    FixtureConfig fc;
    fc.n_trips = n;
    fc.seed = seed;
    fc.max_duration = 900;
    return generate_fixture(fc).trips;
}

void BM_Wasserstein1d(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = uniform_sample(n, 1);
    const auto b = uniform_sample(n, 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(wasserstein_1d(a, b));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Wasserstein1d)->Arg(10000)->Arg(100000);

void BM_SlicedSafd(benchmark::State& state) {
    const SafdGrid grid;
    const auto a = safd_histogram(trips(100, 3), grid);
    const auto b = safd_histogram(trips(100, 4), grid);
    for (auto _ : state) {
        benchmark::DoNotOptimize(wasserstein_2d_safd(a, b));
    }
}
BENCHMARK(BM_SlicedSafd)->Unit(benchmark::kMicrosecond);

void BM_MmdRbf(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = summary_matrix(trips(n, 5));
    const auto b = summary_matrix(trips(n, 6));
    for (auto _ : state) {
        benchmark::DoNotOptimize(mmd_rbf(a, b));
    }
}
BENCHMARK(BM_MmdRbf)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

} // namespace
