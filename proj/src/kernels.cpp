// SPDX-License-Identifier: Apache-2.0
#include "isac/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "isac/errors.hpp"

namespace isac::kernels {

namespace {

struct Chunk {
    Index begin;
    Index end;
};

Chunk chunk_of(Index total, Index c)
{
    const Index per = (total + kReductionChunks - 1) / kReductionChunks;
    const Index b = std::min(total, c * per);
    return {b, std::min(total, b + per)};
}

void check_nonempty(std::size_t n, const char* what)
{
    if (n == 0)
        throw DimensionError(std::string(what) + ": empty sample set");
}

double trace_product_re(const CMatrix& g, const CMatrix& r)
{
    // Re tr(G R) without forming the product.
    return (g.transpose().cwiseProduct(r)).sum().real();
}

} // namespace

namespace serial {

CMatrix mean_congruence(std::span<const CMatrix> h, const CMatrix& r)
{
    check_nonempty(h.size(), "mean_congruence");
    CMatrix acc = CMatrix::Zero(h[0].rows(), h[0].rows());
    for (const auto& hj : h)
        acc.noalias() += hj * r * hj.adjoint();
    return acc / static_cast<double>(h.size());
}

double mean_log1p_trace(std::span<const CMatrix> grams, const CMatrix& r, double scale)
{
    check_nonempty(grams.size(), "mean_log1p_trace");
    double acc = 0.0;
    for (const auto& g : grams)
        acc += std::log1p(scale * trace_product_re(g, r));
    return acc / static_cast<double>(grams.size());
}

CMatrix sample_covariance(const CMatrix& samples)
{
    if (samples.cols() == 0)
        throw DimensionError("sample_covariance: no samples");
    CMatrix acc = CMatrix::Zero(samples.rows(), samples.rows());
    for (Index i = 0; i < samples.cols(); ++i)
        acc.noalias() += samples.col(i) * samples.col(i).adjoint();
    return acc / static_cast<double>(samples.cols());
}

} // namespace serial

namespace omp {

CMatrix mean_congruence(std::span<const CMatrix> h, const CMatrix& r)
{
    check_nonempty(h.size(), "mean_congruence");
    const Index total = static_cast<Index>(h.size());
    const Index n = h[0].rows();
    std::vector<CMatrix> partial(kReductionChunks, CMatrix::Zero(n, n));
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < kReductionChunks; ++c) {
        const Chunk ch = chunk_of(total, c);
        for (Index j = ch.begin; j < ch.end; ++j)
            partial[c].noalias() += h[j] * r * h[j].adjoint();
    }
    CMatrix acc = CMatrix::Zero(n, n);
    for (const auto& p : partial)
        acc += p;
    return acc / static_cast<double>(total);
}

double mean_log1p_trace(std::span<const CMatrix> grams, const CMatrix& r, double scale)
{
    check_nonempty(grams.size(), "mean_log1p_trace");
    const Index total = static_cast<Index>(grams.size());
    std::vector<double> partial(kReductionChunks, 0.0);
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < kReductionChunks; ++c) {
        const Chunk ch = chunk_of(total, c);
        for (Index j = ch.begin; j < ch.end; ++j)
            partial[c] += std::log1p(scale * trace_product_re(grams[j], r));
    }
    double acc = 0.0;
    for (double p : partial)
        acc += p;
    return acc / static_cast<double>(total);
}

CMatrix sample_covariance(const CMatrix& samples)
{
    if (samples.cols() == 0)
        throw DimensionError("sample_covariance: no samples");
    const Index total = samples.cols();
    const Index n = samples.rows();
    std::vector<CMatrix> partial(kReductionChunks, CMatrix::Zero(n, n));
#pragma omp parallel for schedule(static)
    for (Index c = 0; c < kReductionChunks; ++c) {
        const Chunk ch = chunk_of(total, c);
        if (ch.end > ch.begin) {
            const auto block = samples.middleCols(ch.begin, ch.end - ch.begin);
            partial[c].noalias() = block * block.adjoint();
        }
    }
    CMatrix acc = CMatrix::Zero(n, n);
    for (const auto& p : partial)
        acc += p;
    return acc / static_cast<double>(total);
}

} // namespace omp

} // namespace isac::kernels
