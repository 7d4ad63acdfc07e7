// SPDX-License-Identifier: Apache-2.0
#include "isac/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "isac/errors.hpp"

namespace isac {

CVector vec(const CMatrix& a)
{
    return Eigen::Map<const CVector>(a.data(), a.size());
}

CMatrix unvec(const CVector& v, Index rows, Index cols)
{
    if (rows * cols != v.size())
        throw DimensionError("unvec: size mismatch");
    return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

RMatrix commutation_matrix(Index m, Index n)
{
    if (m < 1 || n < 1)
        throw DimensionError("commutation_matrix: dimensions must be positive");
    if (m * n > kMaxCommutationDim)
        throw DimensionError("commutation_matrix: m*n exceeds kMaxCommutationDim");
    RMatrix k = RMatrix::Zero(m * n, m * n);
    // vec(A)[i + j*m] = A(i,j) lands at vec(A^T)[j + i*n].
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j)
            k(j + i * n, i + j * m) = 1.0;
    return k;
}

bool is_hermitian(const CMatrix& a, double rel_tol)
{
    if (a.rows() != a.cols())
        return false;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

void require_hermitian(const CMatrix& a, const char* what, double rel_tol)
{
    if (a.rows() != a.cols())
        throw DimensionError(std::string(what) + ": matrix is not square");
    if (!is_hermitian(a, rel_tol))
        throw DomainError(std::string(what) + ": matrix is not Hermitian");
}

CMatrix hermitian_part(const CMatrix& a)
{
    return 0.5 * (a + a.adjoint());
}

HermitianEig hermitian_eig(const CMatrix& a)
{
    require_hermitian(a, "hermitian_eig", 1e-10);
    const Index n = a.rows();
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a));
    if (solver.info() != Eigen::Success)
        throw NumericalError("hermitian_eig: eigensolver failed");

    CMatrix vecs = solver.eigenvectors();
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (std::abs(vecs(i, j)) > 1e-8) {
                vecs.col(j) *= std::conj(vecs(i, j)) / std::abs(vecs(i, j));
                break;
            }
        }
    }

    const RVector& vals = solver.eigenvalues();
    const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
    auto rounded = [&](Index col) {
        std::vector<double> key;
        key.reserve(2 * n);
        for (Index i = 0; i < n; ++i) {
            key.push_back(std::round(vecs(i, col).real() * 1e9) / 1e9);
            key.push_back(std::round(vecs(i, col).imag() * 1e9) / 1e9);
        }
        return key;
    };
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index l, Index r) {
        if (std::abs(vals(l) - vals(r)) > 1e-12 * scale)
            return vals(l) > vals(r);
        return rounded(l) > rounded(r);
    });

    HermitianEig out{RVector(n), CMatrix(n, n)};
    for (Index j = 0; j < n; ++j) {
        out.values(j) = vals(order[j]);
        out.vectors.col(j) = vecs.col(order[j]);
    }
    return out;
}

double logdet_psd(const CMatrix& a)
{
    if (a.rows() != a.cols())
        throw DimensionError("logdet_psd: matrix is not square");
    Eigen::LLT<CMatrix> llt(hermitian_part(a));
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("logdet_psd: matrix is not positive definite");
    double acc = 0.0;
    const CMatrix& l = llt.matrixLLT();
    for (Index i = 0; i < a.rows(); ++i) {
        const double pivot = l(i, i).real();
        if (!(pivot > 0.0))
            throw NotPositiveDefinite("logdet_psd: non-positive pivot");
        acc += 2.0 * std::log(pivot);
    }
    return acc;
}

double min_eigenvalue(const CMatrix& a)
{
    if (a.size() == 0)
        return 0.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a), Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(0);
}

CMatrix psd_sqrt(const CMatrix& a)
{
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a));
    RVector root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().adjoint();
}

std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngState::RngState(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed)) {}

RngState RngState::split(std::uint64_t index) const
{
    return RngState(mix_seed(seed_ ^ mix_seed(index + 0x5851f42d4c957f2dULL)));
}

double RngState::normal() { return normal_(engine_); }
double RngState::uniform() { return uniform_(engine_); }

cd RngState::complex_normal(double variance)
{
    const double s = std::sqrt(0.5 * variance);
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
}

CMatrix standard_complex_gaussian(RngState& rng, Index rows, Index cols)
{
    CMatrix out(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i)
            out(i, j) = rng.complex_normal();
    return out;
}

CMatrix sample_complex_gaussian(RngState& rng, const CMatrix& mean, const CMatrix& covariance)
{
    const Index n = mean.size();
    if (covariance.rows() != n || covariance.cols() != n)
        throw DimensionError("sample_complex_gaussian: covariance does not match mean size");
    require_hermitian(covariance, "sample_complex_gaussian", 1e-10);
    if (covariance.isZero(0.0))
        return mean;

    const double scale = std::max(1e-300, covariance.diagonal().real().cwiseAbs().maxCoeff());
    if (min_eigenvalue(covariance) < -1e-10 * scale)
        throw DomainError("sample_complex_gaussian: covariance is not PSD");

    const CMatrix herm = hermitian_part(covariance);
    Eigen::LLT<CMatrix> llt(herm);
    if (llt.info() != Eigen::Success) {
        // Rank-deficient covariances: load the diagonal once.
        llt.compute(herm + 1e-12 * scale * CMatrix::Identity(n, n));
        if (llt.info() != Eigen::Success)
            throw NumericalError("sample_complex_gaussian: Cholesky failed after loading");
    }
    CVector z(n);
    for (Index i = 0; i < n; ++i)
        z(i) = rng.complex_normal();
    CVector draw = vec(mean) + llt.matrixL() * z;
    return unvec(draw, mean.rows(), mean.cols());
}

} // namespace isac
