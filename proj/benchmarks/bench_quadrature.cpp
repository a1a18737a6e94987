#include <benchmark/benchmark.h>
#include "rch/quadrature.hpp"
using namespace rch;
static void BM_LengthSinh(benchmark::State& state) {
    const QuadratureSettings qs;
    for (auto _ : state)
        benchmark::DoNotOptimize(length_integral_neg(-1.0, 1.0, -2.5, Exponent(4.0), qs));
}
BENCHMARK(BM_LengthSinh);
static void BM_SolveKCosh(benchmark::State& state) {
    const QuadratureSettings qs;
    for (auto _ : state)
        benchmark::DoNotOptimize(solve_K_cosh(1.5, 1.0, 5.0, Exponent(2.0), qs));
}
BENCHMARK(BM_SolveKCosh);
