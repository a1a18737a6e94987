#include <benchmark/benchmark.h>
#include "rch/dynamics.hpp"
#include "rch/scenarios.hpp"
using namespace rch;
static void BM_VectorFieldN2(benchmark::State& state) {
    const ScenarioSpec spec = *find_scenario("overtaking-r2");
    const PeakonState st = initial_state(spec);
    const Profile warm = solve_profile(st, Exponent(spec.r));
    for (auto _ : state)
        benchmark::DoNotOptimize(vector_field(st, Exponent(spec.r), &warm));
}
BENCHMARK(BM_VectorFieldN2);
static void BM_ShortIntegration(benchmark::State& state) {
    ScenarioSpec spec = *find_scenario("overtaking-r2");
    spec.t_end = 0.5;
    spec.integrator.t_end = 0.5;
    for (auto _ : state) benchmark::DoNotOptimize(run_scenario(spec));
}
BENCHMARK(BM_ShortIntegration);
