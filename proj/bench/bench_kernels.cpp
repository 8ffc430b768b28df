// Serial reference vs OpenMP variant for the data-parallel kernels.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ctl/couplings.hpp"
#include "ctl/distribution.hpp"
#include "ctl/kernels.hpp"
#include "ctl/transport.hpp"

namespace {

std::vector<double> random_weights(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

void BM_ConvolveSerial(benchmark::State& st) {
    const auto a = random_weights(st.range(0), 1), b = random_weights(st.range(0), 2);
    for (auto _ : st) benchmark::DoNotOptimize(ctl::kernels::convolve_serial(a, b));
    st.SetComplexityN(st.range(0));
}

void BM_ConvolveParallel(benchmark::State& st) {
    const auto a = random_weights(st.range(0), 1), b = random_weights(st.range(0), 2);
    for (auto _ : st) benchmark::DoNotOptimize(ctl::kernels::convolve_parallel(a, b));
    st.SetComplexityN(st.range(0));
}

void BM_Kappa(benchmark::State& st) {
    const auto S = ctl::convolve_n(*ctl::centered_poisson(1), static_cast<int>(st.range(0)));
    const auto G = ctl::normal(0, static_cast<double>(st.range(0)));
    ctl::TransportOptions opt;
    opt.parallel = st.range(1) != 0;
    const auto c = ctl::CostFunction::entropy();
    for (auto _ : st) benchmark::DoNotOptimize(ctl::kappa(c, *S, *G, opt).value);
}

void BM_DyadicMc(benchmark::State& st) {
    ctl::DyadicMcOptions opt;
    opt.m = 8;
    opt.samples = 20'000;
    opt.seed = 7;
    opt.parallel = st.range(0) != 0;
    for (auto _ : st) benchmark::DoNotOptimize(ctl::dyadic_mc(opt).mean_sq_gap);
}

}  // namespace

BENCHMARK(BM_ConvolveSerial)->RangeMultiplier(4)->Range(256, 16384)->Complexity();
BENCHMARK(BM_ConvolveParallel)->RangeMultiplier(4)->Range(256, 16384)->Complexity();
BENCHMARK(BM_Kappa)->ArgsProduct({{64, 1024}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DyadicMc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
