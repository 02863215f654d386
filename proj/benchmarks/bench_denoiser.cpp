#include <benchmark/benchmark.h>

#include "microtrip/network.hpp"
#include "microtrip/rng.hpp"

using namespace microtrip;

namespace {

void denoiser_forward(benchmark::State& state, const char* preset) {
    const auto arch = arch_preset(preset);
    const DenoiserNet net(arch, 1);
    Rng rng(2);
    const auto xt = rng.normals(arch.channels() * arch.length);
    const ConditionVector c{std::vector<double>(arch.cond_dim(), 0.5)};
    for (auto _ : state) {
        benchmark::DoNotOptimize(net.predict(xt, 10, &c));
    }
}

void BM_UnetTinyForward(benchmark::State& state) { denoiser_forward(state, "unet-tiny"); }
void BM_CsdiTinyForward(benchmark::State& state) { denoiser_forward(state, "csdi-tiny"); }
BENCHMARK(BM_UnetTinyForward)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CsdiTinyForward)->Unit(benchmark::kMillisecond);

} // namespace
