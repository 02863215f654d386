#include <benchmark/benchmark.h>

#include "microtrip/fixture.hpp"
#include "microtrip/markov.hpp"
#include "microtrip/rng.hpp"

using namespace microtrip;

namespace {

const TransitionModel& fixture_model() {
    static const TransitionModel model = [] {
        FixtureConfig fc;
        fc.n_trips = 200;
        fc.seed = 1;
        fc.max_duration = 900;
        return fit_second_order(generate_fixture(fc).trips);
    }();
    return model;
}

void BM_BackwardMessages(benchmark::State& state) {
    const auto& m = fixture_model();
    const auto horizon = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(backward_messages(m, horizon));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BackwardMessages)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_SampleBridge(benchmark::State& state) {
    const auto& m = fixture_model();
    const auto horizon = static_cast<std::size_t>(state.range(0));
    const auto table = backward_messages(m, horizon);
    Rng rng(2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_bridge_bins(m, table, horizon, rng));
    }
}
BENCHMARK(BM_SampleBridge)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

} // namespace
