// SPDX-License-Identifier: Apache-2.0
//
// Data-parallel reductions used by the sampled AN machinery and the
// Monte-Carlo validator. Each kernel has a serial reference (kept for tests
// and benchmarks) and an OpenMP version. Work is cut into a fixed number of
// chunks whose partial sums are combined in order, so results do not depend
// on the thread count.
#pragma once

#include <span>

#include "isac/core_math.hpp"

namespace isac::kernels {

inline constexpr Index kReductionChunks = 16;

namespace serial {

/// (1/J) sum_j H_j R H_j^H.
CMatrix mean_congruence(std::span<const CMatrix> h, const CMatrix& r);

/// (1/J) sum_j log(1 + scale * Re tr(G_j R)).
double mean_log1p_trace(std::span<const CMatrix> grams, const CMatrix& r, double scale);

/// (1/n) sum_i y_i y_i^H over the columns of `samples`.
CMatrix sample_covariance(const CMatrix& samples);

} // namespace serial

namespace omp {

CMatrix mean_congruence(std::span<const CMatrix> h, const CMatrix& r);
double mean_log1p_trace(std::span<const CMatrix> grams, const CMatrix& r, double scale);
CMatrix sample_covariance(const CMatrix& samples);

} // namespace omp

// Library entry points.
using omp::mean_congruence;
using omp::mean_log1p_trace;
using omp::sample_covariance;

} // namespace isac::kernels
