// SPDX-License-Identifier: Apache-2.0
//
// Small dense max-det solver.
//
//   maximize    sum_l w_l log det(G_l(x)) + c^T x
//   subject to  F_i(x) >= 0           (Hermitian LMIs)
//               a_j^T x + b_j >= 0
//               a_k^T x + b_k + sum_m v_m log(alpha_m^T x + beta_m) >= 0
//
// Variables are complex Hermitian matrices, complex vectors and real
// scalars, packed into one real parameter vector x. Every Hermitian map is
// realified ([[Re, -Im], [Im, Re]]) before the barrier iterations; the
// factor two this puts on log-determinants is removed again on report.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isac/core_math.hpp"

namespace isac::conic {

enum class BlockKind { hermitian, complex_vector, scalar };

struct VariableBlock {
    std::string name;
    BlockKind kind = BlockKind::scalar;
    Index dim = 1;
    Index offset = 0;

    Index num_params() const;
};

/// Images of the real parameters of one block under a linear map into
/// Hermitian d x d matrices.
struct LinearOperator {
    std::vector<CMatrix> images;
};

struct LmiTerm {
    Index block = 0;
    Index op = 0;
    double scale = 1.0;
};

/// constant + sum_terms scale * op(block value).
struct HermitianMap {
    std::string name;
    CMatrix constant;
    std::vector<LinearOperator> ops;
    std::vector<LmiTerm> terms;

    Index dim() const { return constant.rows(); }
    Index add_operator(LinearOperator op);
    void add_term(Index block, Index op, double scale = 1.0);
};

struct AffineInequality {
    std::string name;
    RVector coeffs;
    double constant = 0.0;
};

struct LogTerm {
    double weight = 1.0;
    RVector coeffs;
    double constant = 0.0;
};

/// coeffs^T x + constant + sum weight * log(...) >= 0, weights >= 0.
struct ConcaveInequality {
    std::string name;
    RVector coeffs;
    double constant = 0.0;
    std::vector<LogTerm> logs;
};

struct LogdetTerm {
    double weight = 1.0;
    HermitianMap map;
};

class ConicSubproblem {
public:
    Index add_hermitian(std::string name, Index n);
    Index add_vector(std::string name, Index n);
    Index add_scalar(std::string name);

    const VariableBlock& block(Index b) const { return blocks_.at(b); }
    const std::vector<VariableBlock>& blocks() const { return blocks_; }
    Index num_params() const { return num_params_; }

    /// Value of parameter p of block b acting alone (Hermitian basis matrix,
    /// basis vector as an n x 1 matrix, or [1]).
    CMatrix basis(Index b, Index p) const;

    CMatrix hermitian_value(const RVector& x, Index b) const;
    CVector vector_value(const RVector& x, Index b) const;
    double scalar_value(const RVector& x, Index b) const;
    void set_hermitian(RVector& x, Index b, const CMatrix& v) const;
    void set_vector(RVector& x, Index b, const CVector& v) const;
    void set_scalar(RVector& x, Index b, double v) const;

    /// Tabulates a linear map on the parameters of block b.
    LinearOperator make_operator(Index b, const std::function<CMatrix(const CMatrix&)>& fn) const;
    /// Full-length coefficient vector of a real linear functional of block b.
    RVector linear_functional(Index b, const std::function<double(const CMatrix&)>& fn) const;
    RVector zeros() const { return RVector::Zero(num_params_); }

    std::vector<LogdetTerm> logdet_objective;
    RVector linear_objective;
    double objective_constant = 0.0;
    std::vector<HermitianMap> lmis;
    std::vector<AffineInequality> affine;
    std::vector<ConcaveInequality> concave;

    /// Dimension and Hermitian-ness checks; throws DimensionError/DomainError.
    void validate() const;

    double objective(const RVector& x) const;
    /// Largest violation over all constraints (0 for interior points).
    double feasibility_residual(const RVector& x) const;
    CMatrix evaluate(const HermitianMap& m, const RVector& x) const;

    /// Human-readable dump for debugging.
    std::string dump() const;

private:
    Index add_block(std::string name, BlockKind kind, Index dim);

    std::vector<VariableBlock> blocks_;
    Index num_params_ = 0;
};

RMatrix realify(const CMatrix& h);
/// Inverse of realify for matrices in its range.
CMatrix derealify(const RMatrix& s);

struct RealMap {
    std::string name;
    RMatrix constant;
    std::vector<std::vector<RMatrix>> ops;
    std::vector<LmiTerm> terms;
};

/// Real symmetric form of a subproblem: each Hermitian map of dimension d
/// becomes a symmetric map of dimension 2d.
struct RealConicProblem {
    std::vector<VariableBlock> blocks;
    Index num_params = 0;
    std::vector<std::pair<double, RealMap>> logdet_objective; // weights already halved
    RVector linear_objective;
    double objective_constant = 0.0;
    std::vector<RealMap> lmis;
    std::vector<AffineInequality> affine;
    std::vector<ConcaveInequality> concave;
    Index barrier_degree = 0;
};

RealConicProblem realify(const ConicSubproblem& problem);

enum class SolverStatus { optimal, max_iter, infeasible_detected };
std::string to_string(SolverStatus s);

struct SolverOptions {
    double feas_tol = 1e-7;
    double obj_tol = 1e-7;
    int max_newton = 500;
    double t0 = 1.0;
    double mu = 10.0;
    double newton_tol = 1e-9;
};

struct SolverResult {
    RVector x;
    double objective = 0.0;
    double feasibility_residual = 0.0;
    int iterations = 0;        // Newton steps, phase I included
    int outer_iterations = 0;
    SolverStatus status = SolverStatus::max_iter;
    std::vector<double> outer_objectives; // objective after each centering
};

struct Phase1Result {
    bool feasible = false;
    RVector x;
    double slack = 0.0; // optimal (or early-exit) phase-I slack; < 0 means strictly feasible
    int iterations = 0;
};

Phase1Result phase1_feasible_point(const ConicSubproblem& problem, const SolverOptions& opts = {},
                                   const RVector* start = nullptr);

SolverResult solve(const ConicSubproblem& problem, const SolverOptions& opts = {}, const RVector* start = nullptr);

/// True when x lies strictly inside every constraint and objective domain.
bool strictly_feasible(const ConicSubproblem& problem, const RVector& x, double margin = 0.0);

} // namespace isac::conic
