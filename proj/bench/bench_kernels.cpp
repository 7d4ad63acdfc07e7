// SPDX-License-Identifier: Apache-2.0
//
// Serial reference versus OpenMP kernels on AN-design and Monte-Carlo sizes.
#include <benchmark/benchmark.h>

#include <vector>

#include "isac/core_math.hpp"
#include "isac/kernels.hpp"

namespace {

using namespace isac;

struct Inputs {
    std::vector<CMatrix> h;
    std::vector<CMatrix> grams;
    CMatrix r;
};

Inputs make_inputs(Index count, Index ne = 2, Index nt = 6)
{
    RngState rng(42);
    Inputs in;
    for (Index j = 0; j < count; ++j) {
        in.h.push_back(standard_complex_gaussian(rng, ne, nt));
        in.grams.push_back(in.h.back().adjoint() * in.h.back());
    }
    const CMatrix g = standard_complex_gaussian(rng, nt, nt);
    in.r = g * g.adjoint();
    return in;
}

void BM_congruence_serial(benchmark::State& st)
{
    const Inputs in = make_inputs(st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(kernels::serial::mean_congruence(in.h, in.r));
}

void BM_congruence_omp(benchmark::State& st)
{
    const Inputs in = make_inputs(st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(kernels::omp::mean_congruence(in.h, in.r));
}

void BM_log1p_serial(benchmark::State& st)
{
    const Inputs in = make_inputs(st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(kernels::serial::mean_log1p_trace(in.grams, in.r, 3.0));
}

void BM_log1p_omp(benchmark::State& st)
{
    const Inputs in = make_inputs(st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(kernels::omp::mean_log1p_trace(in.grams, in.r, 3.0));
}

void BM_covariance_serial(benchmark::State& st)
{
    RngState rng(7);
    const CMatrix y = standard_complex_gaussian(rng, 60, st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(kernels::serial::sample_covariance(y));
}

void BM_covariance_omp(benchmark::State& st)
{
    RngState rng(7);
    const CMatrix y = standard_complex_gaussian(rng, 60, st.range(0));
    for (auto _ : st)
        benchmark::DoNotOptimize(kernels::omp::sample_covariance(y));
}

} // namespace

BENCHMARK(BM_congruence_serial)->Arg(100)->Arg(1000);
BENCHMARK(BM_congruence_omp)->Arg(100)->Arg(1000);
BENCHMARK(BM_log1p_serial)->Arg(100)->Arg(1000);
BENCHMARK(BM_log1p_omp)->Arg(100)->Arg(1000);
BENCHMARK(BM_covariance_serial)->Arg(1000)->Arg(10000);
BENCHMARK(BM_covariance_omp)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
