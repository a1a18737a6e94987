#include <benchmark/benchmark.h>
#include "rch/profile.hpp"
using namespace rch;
static void BM_SolveProfileColdN2(benchmark::State& state) {
    const PeakonState st(0.0, {1.0, 6.0}, {3.0, 2.0});
    for (auto _ : state) benchmark::DoNotOptimize(solve_profile(st, Exponent(2.0)));
}
BENCHMARK(BM_SolveProfileColdN2);
static void BM_SolveProfileWarmN2(benchmark::State& state) {
    const PeakonState st(0.0, {1.0, 6.0}, {3.0, 2.0});
    const Profile warm = solve_profile(st, Exponent(2.0));
    for (auto _ : state) benchmark::DoNotOptimize(solve_profile(st, Exponent(2.0), &warm));
}
BENCHMARK(BM_SolveProfileWarmN2);
