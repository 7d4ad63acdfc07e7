// SPDX-License-Identifier: Apache-2.0
//
// Complex linear-algebra helpers shared by every module: vectorization,
// Kronecker products, commutation matrices, Hermitian eigendecomposition,
// log-determinants and seeded circular Gaussian sampling.
#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace isac {

using cd = std::complex<double>;
using Index = Eigen::Index;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Largest m*n accepted by commutation_matrix.
inline constexpr Index kMaxCommutationDim = 4096;

/// Column-stacking vectorization.
CVector vec(const CMatrix& a);
CMatrix unvec(const CVector& v, Index rows, Index cols);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Real permutation K with K * vec(A) = vec(A^T) for every m x n matrix A.
RMatrix commutation_matrix(Index m, Index n);

bool is_hermitian(const CMatrix& a, double rel_tol = 1e-12);

/// Throws DomainError unless `a` is square and Hermitian to `rel_tol`.
void require_hermitian(const CMatrix& a, const char* what, double rel_tol = 1e-12);

/// Returns (A + A^H) / 2.
CMatrix hermitian_part(const CMatrix& a);

struct HermitianEig {
    RVector values;   // descending
    CMatrix vectors;  // unitary, column i pairs with values(i)
};

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Eigenvector phases are normalized so the first
/// significant component is real and positive; equal eigenvalues are
/// ordered lexicographically on the rounded eigenvector components.
HermitianEig hermitian_eig(const CMatrix& a);

/// log det(A) for Hermitian positive definite A via Cholesky.
/// Throws NotPositiveDefinite when a pivot is not strictly positive.
double logdet_psd(const CMatrix& a);

/// Smallest eigenvalue of a Hermitian matrix.
double min_eigenvalue(const CMatrix& a);

/// Principal square root of a Hermitian PSD matrix (negative round-off
/// eigenvalues are clamped to zero).
CMatrix psd_sqrt(const CMatrix& a);

/// Seeded random stream. One owner per stream; parallel work derives
/// independent streams through split().
class RngState {
public:
    static constexpr const char* kAlgorithm = "mt19937_64";

    explicit RngState(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }
    std::string algorithm() const { return kAlgorithm; }

    /// Independent child stream; identical (seed, index) gives identical streams.
    RngState split(std::uint64_t index) const;

    double normal();
    double uniform();
    /// CN(0, variance) scalar.
    cd complex_normal(double variance = 1.0);

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// splitmix64 finalizer used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x);

/// Draws one circularly-symmetric complex Gaussian sample with the given
/// mean and covariance of vec(mean). The result has the shape of `mean`.
CMatrix sample_complex_gaussian(RngState& rng, const CMatrix& mean, const CMatrix& covariance);

/// Convenience: CN(0, I) matrix of the given shape.
CMatrix standard_complex_gaussian(RngState& rng, Index rows, Index cols);

} // namespace isac
