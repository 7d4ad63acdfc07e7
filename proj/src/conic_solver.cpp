// SPDX-License-Identifier: Apache-2.0
#include "isac/conic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "isac/errors.hpp"

namespace isac::conic {

Index VariableBlock::num_params() const
{
    switch (kind) {
    case BlockKind::hermitian:
        return dim * dim;
    case BlockKind::complex_vector:
        return 2 * dim;
    case BlockKind::scalar:
        return 1;
    }
    return 0;
}

Index HermitianMap::add_operator(LinearOperator op)
{
    ops.push_back(std::move(op));
    return static_cast<Index>(ops.size()) - 1;
}

void HermitianMap::add_term(Index block, Index op, double scale)
{
    terms.push_back({block, op, scale});
}

// ---------------------------------------------------------------------------
// Variable layout

namespace {

/// Off-diagonal pair q of an n x n Hermitian block, q enumerated column by
/// column over the strict upper triangle.
std::pair<Index, Index> hermitian_pair(Index q)
{
    Index b = 1;
    while (q >= b) {
        q -= b;
        ++b;
    }
    return {q, b};
}

} // namespace

Index ConicSubproblem::add_block(std::string name, BlockKind kind, Index dim)
{
    if (dim < 1)
        throw DimensionError("ConicSubproblem: block dimension must be >= 1");
    VariableBlock blk{std::move(name), kind, dim, num_params_};
    num_params_ += blk.num_params();
    blocks_.push_back(std::move(blk));
    if (linear_objective.size() != num_params_)
        linear_objective.conservativeResizeLike(RVector::Zero(num_params_));
    return static_cast<Index>(blocks_.size()) - 1;
}

Index ConicSubproblem::add_hermitian(std::string name, Index n) { return add_block(std::move(name), BlockKind::hermitian, n); }
Index ConicSubproblem::add_vector(std::string name, Index n) { return add_block(std::move(name), BlockKind::complex_vector, n); }
Index ConicSubproblem::add_scalar(std::string name) { return add_block(std::move(name), BlockKind::scalar, 1); }

CMatrix ConicSubproblem::basis(Index b, Index p) const
{
    const VariableBlock& blk = block(b);
    if (p < 0 || p >= blk.num_params())
        throw DimensionError("ConicSubproblem::basis: parameter out of range");
    switch (blk.kind) {
    case BlockKind::hermitian: {
        const Index n = blk.dim;
        CMatrix e = CMatrix::Zero(n, n);
        if (p < n) {
            e(p, p) = 1.0;
        } else {
            const auto [r, c] = hermitian_pair((p - n) / 2);
            if ((p - n) % 2 == 0) {
                e(r, c) = 1.0;
                e(c, r) = 1.0;
            } else {
                e(r, c) = cd(0.0, 1.0);
                e(c, r) = cd(0.0, -1.0);
            }
        }
        return e;
    }
    case BlockKind::complex_vector: {
        CMatrix e = CMatrix::Zero(blk.dim, 1);
        e(p / 2, 0) = (p % 2 == 0) ? cd(1.0, 0.0) : cd(0.0, 1.0);
        return e;
    }
    case BlockKind::scalar:
        return CMatrix::Constant(1, 1, 1.0);
    }
    return {};
}

CMatrix ConicSubproblem::hermitian_value(const RVector& x, Index b) const
{
    const VariableBlock& blk = block(b);
    if (blk.kind != BlockKind::hermitian)
        throw DimensionError("hermitian_value: block is not Hermitian");
    const Index n = blk.dim;
    CMatrix v(n, n);
    for (Index i = 0; i < n; ++i)
        v(i, i) = x(blk.offset + i);
    Index p = n;
    for (Index c = 1; c < n; ++c) {
        for (Index r = 0; r < c; ++r) {
            const cd z(x(blk.offset + p), x(blk.offset + p + 1));
            v(r, c) = z;
            v(c, r) = std::conj(z);
            p += 2;
        }
    }
    return v;
}

CVector ConicSubproblem::vector_value(const RVector& x, Index b) const
{
    const VariableBlock& blk = block(b);
    if (blk.kind != BlockKind::complex_vector)
        throw DimensionError("vector_value: block is not a vector");
    CVector v(blk.dim);
    for (Index i = 0; i < blk.dim; ++i)
        v(i) = cd(x(blk.offset + 2 * i), x(blk.offset + 2 * i + 1));
    return v;
}

double ConicSubproblem::scalar_value(const RVector& x, Index b) const
{
    const VariableBlock& blk = block(b);
    if (blk.kind != BlockKind::scalar)
        throw DimensionError("scalar_value: block is not a scalar");
    return x(blk.offset);
}

void ConicSubproblem::set_hermitian(RVector& x, Index b, const CMatrix& v) const
{
    const VariableBlock& blk = block(b);
    if (blk.kind != BlockKind::hermitian || v.rows() != blk.dim || v.cols() != blk.dim)
        throw DimensionError("set_hermitian: shape mismatch");
    const Index n = blk.dim;
    for (Index i = 0; i < n; ++i)
        x(blk.offset + i) = v(i, i).real();
    Index p = n;
    for (Index c = 1; c < n; ++c) {
        for (Index r = 0; r < c; ++r) {
            const cd z = 0.5 * (v(r, c) + std::conj(v(c, r)));
            x(blk.offset + p) = z.real();
            x(blk.offset + p + 1) = z.imag();
            p += 2;
        }
    }
}

void ConicSubproblem::set_vector(RVector& x, Index b, const CVector& v) const
{
    const VariableBlock& blk = block(b);
    if (blk.kind != BlockKind::complex_vector || v.size() != blk.dim)
        throw DimensionError("set_vector: shape mismatch");
    for (Index i = 0; i < blk.dim; ++i) {
        x(blk.offset + 2 * i) = v(i).real();
        x(blk.offset + 2 * i + 1) = v(i).imag();
    }
}

void ConicSubproblem::set_scalar(RVector& x, Index b, double v) const
{
    const VariableBlock& blk = block(b);
    if (blk.kind != BlockKind::scalar)
        throw DimensionError("set_scalar: block is not a scalar");
    x(blk.offset) = v;
}

LinearOperator ConicSubproblem::make_operator(Index b, const std::function<CMatrix(const CMatrix&)>& fn) const
{
    LinearOperator op;
    const Index np = block(b).num_params();
    op.images.reserve(np);
    for (Index p = 0; p < np; ++p) {
        CMatrix img = fn(basis(b, p));
        if (img.rows() != img.cols())
            throw DimensionError("make_operator: image is not square");
        if (!is_hermitian(img, 1e-9))
            throw DomainError("make_operator: image is not Hermitian");
        op.images.push_back(0.5 * (img + img.adjoint()));
    }
    return op;
}

RVector ConicSubproblem::linear_functional(Index b, const std::function<double(const CMatrix&)>& fn) const
{
    RVector out = zeros();
    const VariableBlock& blk = block(b);
    for (Index p = 0; p < blk.num_params(); ++p)
        out(blk.offset + p) = fn(basis(b, p));
    return out;
}

void ConicSubproblem::validate() const
{
    auto check_vec = [&](const RVector& v, const std::string& what) {
        if (v.size() != num_params_)
            throw DimensionError("ConicSubproblem: " + what + " has wrong length");
    };
    auto check_map = [&](const HermitianMap& m) {
        if (m.constant.rows() != m.constant.cols() || m.constant.rows() == 0)
            throw DimensionError("ConicSubproblem: map '" + m.name + "' has a bad constant");
        if (!is_hermitian(m.constant, 1e-9))
            throw DomainError("ConicSubproblem: map '" + m.name + "' constant is not Hermitian");
        for (const auto& t : m.terms) {
            if (t.block < 0 || t.block >= static_cast<Index>(blocks_.size()))
                throw DimensionError("ConicSubproblem: map '" + m.name + "' references a missing block");
            if (t.op < 0 || t.op >= static_cast<Index>(m.ops.size()))
                throw DimensionError("ConicSubproblem: map '" + m.name + "' references a missing operator");
            const auto& op = m.ops[t.op];
            if (static_cast<Index>(op.images.size()) != blocks_[t.block].num_params())
                throw DimensionError("ConicSubproblem: map '" + m.name + "' operator does not match block '" +
                                     blocks_[t.block].name + "'");
            for (const auto& img : op.images)
                if (img.rows() != m.dim() || img.cols() != m.dim())
                    throw DimensionError("ConicSubproblem: map '" + m.name + "' image dimension mismatch");
        }
    };
    check_vec(linear_objective, "linear objective");
    for (const auto& t : logdet_objective) {
        if (t.weight < 0.0)
            throw DomainError("ConicSubproblem: logdet objective weights must be >= 0");
        check_map(t.map);
    }
    for (const auto& m : lmis)
        check_map(m);
    for (const auto& a : affine)
        check_vec(a.coeffs, "affine constraint '" + a.name + "'");
    for (const auto& c : concave) {
        check_vec(c.coeffs, "concave constraint '" + c.name + "'");
        for (const auto& l : c.logs) {
            check_vec(l.coeffs, "log term of '" + c.name + "'");
            if (l.weight < 0.0)
                throw DomainError("ConicSubproblem: log weights must be >= 0");
        }
    }
}

CMatrix ConicSubproblem::evaluate(const HermitianMap& m, const RVector& x) const
{
    CMatrix f = m.constant;
    for (const auto& t : m.terms) {
        const VariableBlock& blk = blocks_[t.block];
        const auto& imgs = m.ops[t.op].images;
        for (Index p = 0; p < blk.num_params(); ++p) {
            const double v = x(blk.offset + p);
            if (v != 0.0)
                f += (t.scale * v) * imgs[p];
        }
    }
    return f;
}

double ConicSubproblem::objective(const RVector& x) const
{
    double obj = objective_constant + linear_objective.dot(x);
    for (const auto& t : logdet_objective)
        obj += t.weight * logdet_psd(evaluate(t.map, x));
    return obj;
}

double ConicSubproblem::feasibility_residual(const RVector& x) const
{
    double worst = 0.0;
    for (const auto& a : affine)
        worst = std::max(worst, -(a.coeffs.dot(x) + a.constant));
    for (const auto& c : concave) {
        double g = c.coeffs.dot(x) + c.constant;
        for (const auto& l : c.logs) {
            const double u = l.coeffs.dot(x) + l.constant;
            g = u > 0.0 ? g + l.weight * std::log(u) : -std::numeric_limits<double>::infinity();
        }
        worst = std::max(worst, -g);
    }
    for (const auto& m : lmis)
        worst = std::max(worst, -min_eigenvalue(evaluate(m, x)));
    return worst;
}

std::string ConicSubproblem::dump() const
{
    std::ostringstream os;
    os << "variables (" << num_params_ << " real parameters)\n";
    for (const auto& b : blocks_) {
        const char* kind = b.kind == BlockKind::hermitian ? "hermitian" : b.kind == BlockKind::complex_vector ? "vector" : "scalar";
        os << "  " << b.name << ": " << kind << " dim " << b.dim << " offset " << b.offset << '\n';
    }
    auto map_line = [&](const HermitianMap& m) {
        os << m.name << " dim " << m.dim() << " terms:";
        for (const auto& t : m.terms)
            os << ' ' << blocks_[t.block].name << "*" << t.scale;
        os << '\n';
    };
    os << "objective: " << logdet_objective.size() << " logdet term(s), linear norm " << linear_objective.norm()
       << ", constant " << objective_constant << '\n';
    for (const auto& t : logdet_objective) {
        os << "  logdet weight " << t.weight << " ";
        map_line(t.map);
    }
    os << "lmis: " << lmis.size() << '\n';
    for (const auto& m : lmis) {
        os << "  ";
        map_line(m);
    }
    os << "affine: " << affine.size() << '\n';
    for (const auto& a : affine)
        os << "  " << a.name << " nnz " << (a.coeffs.array() != 0.0).count() << " constant " << a.constant << '\n';
    os << "concave: " << concave.size() << '\n';
    for (const auto& c : concave)
        os << "  " << c.name << " log terms " << c.logs.size() << " constant " << c.constant << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Realification

RMatrix realify(const CMatrix& h)
{
    const Index n = h.rows();
    const Index m = h.cols();
    RMatrix s(2 * n, 2 * m);
    s.topLeftCorner(n, m) = h.real();
    s.topRightCorner(n, m) = -h.imag();
    s.bottomLeftCorner(n, m) = h.imag();
    s.bottomRightCorner(n, m) = h.real();
    return s;
}

CMatrix derealify(const RMatrix& s)
{
    if (s.rows() % 2 != 0 || s.cols() % 2 != 0)
        throw DimensionError("derealify: dimensions must be even");
    const Index n = s.rows() / 2;
    const Index m = s.cols() / 2;
    CMatrix h(n, m);
    h.real() = s.topLeftCorner(n, m);
    h.imag() = s.bottomLeftCorner(n, m);
    return h;
}

namespace {

RealMap realify_map(const HermitianMap& m)
{
    RealMap r;
    r.name = m.name;
    r.constant = realify(m.constant);
    r.terms = m.terms;
    for (const auto& op : m.ops) {
        std::vector<RMatrix> imgs;
        imgs.reserve(op.images.size());
        for (const auto& img : op.images)
            imgs.push_back(realify(img));
        r.ops.push_back(std::move(imgs));
    }
    return r;
}

} // namespace

RealConicProblem realify(const ConicSubproblem& problem)
{
    problem.validate();
    RealConicProblem r;
    r.blocks = problem.blocks();
    r.num_params = problem.num_params();
    for (const auto& t : problem.logdet_objective)
        r.logdet_objective.emplace_back(0.5 * t.weight, realify_map(t.map));
    r.linear_objective = problem.linear_objective;
    r.objective_constant = problem.objective_constant;
    for (const auto& m : problem.lmis) {
        r.lmis.push_back(realify_map(m));
        r.barrier_degree += m.dim();
    }
    r.affine = problem.affine;
    r.concave = problem.concave;
    r.barrier_degree += static_cast<Index>(problem.affine.size() + problem.concave.size());
    return r;
}

std::string to_string(SolverStatus s)
{
    switch (s) {
    case SolverStatus::optimal:
        return "optimal";
    case SolverStatus::max_iter:
        return "max-iter";
    case SolverStatus::infeasible_detected:
        return "infeasible-detected";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Barrier model

namespace {

std::vector<Index> support_of(const RVector& v)
{
    std::vector<Index> s;
    for (Index i = 0; i < v.size(); ++i)
        if (v(i) != 0.0)
            s.push_back(i);
    return s;
}

struct SparseRow {
    std::vector<Index> idx;
    std::vector<double> val;
    double constant = 0.0;

    SparseRow() = default;
    SparseRow(const RVector& v, double c) : constant(c)
    {
        idx = support_of(v);
        for (Index i : idx)
            val.push_back(v(i));
    }
    double eval(const RVector& x) const
    {
        double s = constant;
        for (std::size_t k = 0; k < idx.size(); ++k)
            s += val[k] * x(idx[k]);
        return s;
    }
    void axpy(double a, RVector& g) const
    {
        for (std::size_t k = 0; k < idx.size(); ++k)
            g(idx[k]) += a * val[k];
    }
    void rank_one(double a, RMatrix& h) const
    {
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < idx.size(); ++c)
                h(idx[r], idx[c]) += a * val[r] * val[c];
    }
};

struct ConcaveRow {
    SparseRow linear;
    std::vector<double> weights;
    std::vector<SparseRow> logs;
};

/// -coef * log det(F(x)) terms and friends, minimised by Newton's method.
class BarrierModel {
public:
    BarrierModel(const RealConicProblem& p) : p_(p)
    {
        for (const auto& a : p.affine)
            affine_.emplace_back(a.coeffs, a.constant);
        for (const auto& c : p.concave) {
            ConcaveRow row;
            row.linear = SparseRow(c.coeffs, c.constant);
            for (const auto& l : c.logs) {
                row.weights.push_back(l.weight);
                row.logs.emplace_back(l.coeffs, l.constant);
            }
            concave_.push_back(std::move(row));
        }
    }

    Index n() const { return p_.num_params; }

    /// Objective to maximise at x (in reporting units).
    double objective(const RVector& x) const
    {
        double obj = p_.objective_constant + p_.linear_objective.dot(x);
        for (const auto& [w, m] : p_.logdet_objective) {
            Eigen::LLT<RMatrix> llt(assemble(m, x));
            obj += w * logdet_from(llt);
        }
        return obj;
    }

    /// phi_t(x) = -t * objective - sum log barriers; nullopt outside the domain.
    std::optional<double> value(const RVector& x, double t) const
    {
        double v = -t * (p_.objective_constant + p_.linear_objective.dot(x));
        for (const auto& [w, m] : p_.logdet_objective) {
            Eigen::LLT<RMatrix> llt(assemble(m, x));
            if (!pd(llt))
                return std::nullopt;
            v -= t * w * logdet_from(llt);
        }
        for (const auto& m : p_.lmis) {
            Eigen::LLT<RMatrix> llt(assemble(m, x));
            if (!pd(llt))
                return std::nullopt;
            v -= 0.5 * logdet_from(llt);
        }
        for (const auto& a : affine_) {
            const double s = a.eval(x);
            if (!(s > 0.0))
                return std::nullopt;
            v -= std::log(s);
        }
        for (const auto& c : concave_) {
            double g = c.linear.eval(x);
            for (std::size_t k = 0; k < c.logs.size(); ++k) {
                const double u = c.logs[k].eval(x);
                if (!(u > 0.0))
                    return std::nullopt;
                g += c.weights[k] * std::log(u);
            }
            if (!(g > 0.0))
                return std::nullopt;
            v -= std::log(g);
        }
        return v;
    }

    /// Gradient and Hessian of phi_t; x must be in the domain.
    void derivatives(const RVector& x, double t, RVector& grad, RMatrix& hess) const
    {
        grad = -t * p_.linear_objective;
        hess = RMatrix::Zero(n(), n());
        for (const auto& [w, m] : p_.logdet_objective)
            add_logdet(m, x, t * w, grad, hess);
        for (const auto& m : p_.lmis)
            add_logdet(m, x, 0.5, grad, hess);
        for (const auto& a : affine_) {
            const double s = a.eval(x);
            a.axpy(-1.0 / s, grad);
            a.rank_one(1.0 / (s * s), hess);
        }
        for (const auto& c : concave_) {
            RVector dg = RVector::Zero(n());
            double g = c.linear.eval(x);
            c.linear.axpy(1.0, dg);
            std::vector<double> u(c.logs.size());
            for (std::size_t k = 0; k < c.logs.size(); ++k) {
                u[k] = c.logs[k].eval(x);
                g += c.weights[k] * std::log(u[k]);
                c.logs[k].axpy(c.weights[k] / u[k], dg);
            }
            grad -= dg / g;
            const auto sup = support_of(dg);
            for (Index r : sup)
                for (Index cc : sup)
                    hess(r, cc) += dg(r) * dg(cc) / (g * g);
            for (std::size_t k = 0; k < c.logs.size(); ++k)
                c.logs[k].rank_one(c.weights[k] / (u[k] * u[k] * g), hess);
        }
    }

    RMatrix assemble(const RealMap& m, const RVector& x) const
    {
        RMatrix f = m.constant;
        for (const auto& t : m.terms) {
            const VariableBlock& blk = p_.blocks[t.block];
            const auto& imgs = m.ops[t.op];
            for (Index q = 0; q < blk.num_params(); ++q) {
                const double v = x(blk.offset + q);
                if (v != 0.0)
                    f.noalias() += (t.scale * v) * imgs[q];
            }
        }
        return f;
    }

    bool in_domain(const RVector& x, double margin) const
    {
        auto ok_map = [&](const RealMap& m) {
            RMatrix f = assemble(m, x);
            f.diagonal().array() -= margin;
            Eigen::LLT<RMatrix> llt(f);
            return pd(llt);
        };
        for (const auto& [w, m] : p_.logdet_objective)
            if (!ok_map(m))
                return false;
        for (const auto& m : p_.lmis)
            if (!ok_map(m))
                return false;
        for (const auto& a : affine_)
            if (!(a.eval(x) > margin))
                return false;
        for (const auto& c : concave_) {
            double g = c.linear.eval(x);
            for (std::size_t k = 0; k < c.logs.size(); ++k) {
                const double u = c.logs[k].eval(x);
                if (!(u > 0.0))
                    return false;
                g += c.weights[k] * std::log(u);
            }
            if (!(g > margin))
                return false;
        }
        return true;
    }

private:
    static bool pd(const Eigen::LLT<RMatrix>& llt)
    {
        if (llt.info() != Eigen::Success)
            return false;
        const auto& l = llt.matrixLLT();
        for (Index i = 0; i < l.rows(); ++i)
            if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i)))
                return false;
        return true;
    }

    static double logdet_from(const Eigen::LLT<RMatrix>& llt)
    {
        const auto& l = llt.matrixLLT();
        double s = 0.0;
        for (Index i = 0; i < l.rows(); ++i)
            s += 2.0 * std::log(l(i, i));
        return s;
    }

    /// Adds the derivatives of -coef * log det(F(x)).
    void add_logdet(const RealMap& m, const RVector& x, double coef, RVector& grad, RMatrix& hess) const
    {
        if (m.terms.empty())
            return;
        const RMatrix f = assemble(m, x);
        Eigen::LLT<RMatrix> llt(f);
        const Index d = f.rows();
        const auto lower = llt.matrixL();

        // For every operator used: rows vec(L^-1 A_q L^-T).
        std::map<Index, RMatrix> rows;
        std::map<Index, RVector> traces;
        for (const auto& t : m.terms) {
            if (rows.count(t.op))
                continue;
            const auto& imgs = m.ops[t.op];
            RMatrix v(static_cast<Index>(imgs.size()), d * d);
            RVector tr(static_cast<Index>(imgs.size()));
            for (std::size_t q = 0; q < imgs.size(); ++q) {
                const RMatrix half = lower.solve(imgs[q]);
                const RMatrix s = lower.solve(RMatrix(half.transpose()));
                tr(static_cast<Index>(q)) = s.trace();
                v.row(static_cast<Index>(q)) = Eigen::Map<const RVector>(s.data(), d * d).transpose();
            }
            rows.emplace(t.op, std::move(v));
            traces.emplace(t.op, std::move(tr));
        }

        std::map<std::pair<Index, Index>, RMatrix> gram;
        for (const auto& ti : m.terms) {
            const VariableBlock& bi = p_.blocks[ti.block];
            grad.segment(bi.offset, bi.num_params()) -= coef * ti.scale * traces.at(ti.op);
            for (const auto& tj : m.terms) {
                const VariableBlock& bj = p_.blocks[tj.block];
                auto key = std::make_pair(ti.op, tj.op);
                auto it = gram.find(key);
                if (it == gram.end())
                    it = gram.emplace(key, rows.at(ti.op) * rows.at(tj.op).transpose()).first;
                hess.block(bi.offset, bj.offset, bi.num_params(), bj.num_params()) +=
                    (coef * ti.scale * tj.scale) * it->second;
            }
        }
    }

    const RealConicProblem& p_;
    std::vector<SparseRow> affine_;
    std::vector<ConcaveRow> concave_;
};

struct CenterOutcome {
    int steps = 0;
    bool stalled = false;
};

/// Damped Newton centering of phi_t. `stop` lets phase I exit early.
CenterOutcome center(const BarrierModel& model, RVector& x, double t, const SolverOptions& opts, int budget,
                     const std::function<bool(const RVector&)>& stop = {})
{
    CenterOutcome out;
    RVector grad;
    RMatrix hess;
    constexpr double kArmijo = 0.01;
    constexpr double kShrink = 0.5;
    constexpr double kRoundoff = 1e-13;
    std::optional<double> fx = model.value(x, t);
    if (!fx)
        throw NumericalError("conic solver: iterate left the domain");
    while (out.steps < budget) {
        model.derivatives(x, t, grad, hess);
        const double scale = std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
        Eigen::LDLT<RMatrix> ldlt(hess);
        RVector dx = ldlt.solve(-grad);
        if (ldlt.info() != Eigen::Success || !dx.allFinite()) {
            RMatrix reg = hess;
            reg.diagonal().array() += 1e-12 * scale;
            dx = reg.ldlt().solve(-grad);
        }
        const double decrement = -grad.dot(dx);
        ++out.steps;
        if (!(decrement >= 0.0)) {
            // Indefinite numerics: fall back to steepest descent.
            dx = -grad / scale;
        } else if (0.5 * decrement <= std::max(opts.newton_tol, kRoundoff * std::abs(*fx))) {
            // The second bound stops at the resolution of phi itself.
            break;
        }
        const double slope = grad.dot(dx);
        double step = 1.0;
        bool accepted = false;
        while (step > 1e-16) {
            RVector trial = x + step * dx;
            auto ft = model.value(trial, t);
            if (ft && *ft <= *fx + kArmijo * step * slope) {
                x = std::move(trial);
                fx = ft;
                accepted = true;
                break;
            }
            step *= kShrink;
        }
        if (!accepted) {
            out.stalled = true;
            break;
        }
        if (stop && stop(x))
            break;
    }
    return out;
}

RealConicProblem phase1_problem(const RealConicProblem& base)
{
    RealConicProblem p;
    p.blocks = base.blocks;
    const Index n0 = base.num_params;
    VariableBlock slack{"phase1_slack", BlockKind::scalar, 1, n0};
    p.blocks.push_back(slack);
    const Index sb = static_cast<Index>(p.blocks.size()) - 1;
    p.num_params = n0 + 1;
    p.linear_objective = RVector::Zero(n0 + 1);
    p.linear_objective(n0) = -1.0;

    auto relax_map = [&](RealMap m) {
        m.ops.push_back({RMatrix::Identity(m.constant.rows(), m.constant.rows())});
        m.terms.push_back({sb, static_cast<Index>(m.ops.size()) - 1, 1.0});
        return m;
    };
    for (const auto& [w, m] : base.logdet_objective)
        p.lmis.push_back(relax_map(m));
    for (const auto& m : base.lmis)
        p.lmis.push_back(relax_map(m));
    auto extend = [&](const RVector& v, double last) {
        RVector e(n0 + 1);
        e.head(n0) = v;
        e(n0) = last;
        return e;
    };
    for (const auto& a : base.affine)
        p.affine.push_back({a.name, extend(a.coeffs, 1.0), a.constant});
    for (const auto& c : base.concave) {
        ConcaveInequality e{c.name, extend(c.coeffs, 1.0), c.constant, {}};
        for (const auto& l : c.logs)
            e.logs.push_back({l.weight, extend(l.coeffs, 0.0), l.constant});
        p.concave.push_back(std::move(e));
    }
    p.affine.push_back({"phase1_floor", extend(RVector::Zero(n0), 1.0), 1.0});
    for (const auto& m : p.lmis)
        p.barrier_degree += m.constant.rows() / 2;
    p.barrier_degree += static_cast<Index>(p.affine.size() + p.concave.size());
    return p;
}

/// Worst violation of the relaxed constraints at x (objective domains included).
double max_violation(const RealConicProblem& p, const BarrierModel& model, const RVector& x)
{
    double worst = 0.0;
    auto map_violation = [&](const RealMap& m) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(model.assemble(m, x), Eigen::EigenvaluesOnly);
        return -es.eigenvalues()(0);
    };
    for (const auto& [w, m] : p.logdet_objective)
        worst = std::max(worst, map_violation(m));
    for (const auto& m : p.lmis)
        worst = std::max(worst, map_violation(m));
    for (const auto& a : p.affine)
        worst = std::max(worst, -(a.coeffs.dot(x) + a.constant));
    for (const auto& c : p.concave) {
        double g = c.coeffs.dot(x) + c.constant;
        for (const auto& l : c.logs) {
            const double u = l.coeffs.dot(x) + l.constant;
            if (!(u > 0.0))
                throw DomainError("phase I: start point outside the domain of constraint '" + c.name + "'");
            g += l.weight * std::log(u);
        }
        worst = std::max(worst, -g);
    }
    return worst;
}

/// Midpoint of the ray x = tau * d (identity Hermitian blocks, unit scalars)
/// inside the affine constraints, if strictly feasible overall.
std::optional<RVector> ray_guess(const RealConicProblem& p, const BarrierModel& model)
{
    RVector d = RVector::Zero(p.num_params);
    for (const auto& b : p.blocks) {
        if (b.kind == BlockKind::hermitian)
            d.segment(b.offset, b.dim).setOnes();
        else if (b.kind == BlockKind::scalar)
            d(b.offset) = 1.0;
    }
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    for (const auto& a : p.affine) {
        const double slope = a.coeffs.dot(d);
        if (slope > 0.0)
            lo = std::max(lo, -a.constant / slope);
        else if (slope < 0.0)
            hi = std::min(hi, -a.constant / slope);
        else if (!(a.constant > 0.0))
            return std::nullopt;
    }
    if (!(hi > lo))
        return std::nullopt;
    const double tau = std::isfinite(hi) ? 0.5 * (lo + hi) : std::max(1.0, 2.0 * lo);
    RVector x = tau * d;
    if (model.in_domain(x, 0.0))
        return x;
    return std::nullopt;
}

} // namespace

bool strictly_feasible(const ConicSubproblem& problem, const RVector& x, double margin)
{
    const RealConicProblem rp = realify(problem);
    BarrierModel model(rp);
    return model.in_domain(x, margin);
}

namespace {

Phase1Result run_phase1(const RealConicProblem& rp, const SolverOptions& opts, const RVector* start)
{
    Phase1Result out;
    BarrierModel base(rp);
    if (start && start->size() == rp.num_params && base.in_domain(*start, 0.0)) {
        out.feasible = true;
        out.x = *start;
        out.slack = -std::numeric_limits<double>::infinity();
        return out;
    }
    if (auto guess = ray_guess(rp, base)) {
        out.feasible = true;
        out.x = *guess;
        out.slack = -std::numeric_limits<double>::infinity();
        return out;
    }

    const RealConicProblem p1 = phase1_problem(rp);
    BarrierModel model(p1);
    const Index n0 = rp.num_params;
    RVector x = RVector::Zero(n0 + 1);
    if (start && start->size() == n0)
        x.head(n0) = *start;
    x(n0) = 1.0 + max_violation(rp, base, x.head(n0));

    constexpr double kEarlyExit = -0.1;
    auto stop = [&](const RVector& z) { return z(n0) < kEarlyExit; };
    double t = opts.t0;
    int budget = opts.max_newton;
    while (budget > 0) {
        CenterOutcome c = center(model, x, t, opts, budget, stop);
        budget -= c.steps;
        out.iterations += c.steps;
        if (x(n0) < 0.0)
            break;
        if (static_cast<double>(p1.barrier_degree) / t < 1e-10 || c.stalled)
            break;
        if (static_cast<double>(p1.barrier_degree) / t < 1e-3 * std::max(opts.feas_tol, 1e-12) && x(n0) > 0.0)
            break;
        t *= opts.mu;
    }
    out.slack = x(n0);
    out.x = x.head(n0);
    out.feasible = out.slack < 0.0 && base.in_domain(out.x, 0.0);
    return out;
}

} // namespace

Phase1Result phase1_feasible_point(const ConicSubproblem& problem, const SolverOptions& opts, const RVector* start)
{
    const RealConicProblem rp = realify(problem);
    return run_phase1(rp, opts, start);
}

SolverResult solve(const ConicSubproblem& problem, const SolverOptions& opts, const RVector* start)
{
    const RealConicProblem rp = realify(problem);
    SolverResult res;
    Phase1Result p1 = run_phase1(rp, opts, start);
    res.iterations = p1.iterations;
    if (!p1.feasible) {
        res.x = p1.x;
        res.status = SolverStatus::infeasible_detected;
        res.feasibility_residual = std::max(0.0, p1.slack);
        return res;
    }

    BarrierModel model(rp);
    RVector x = p1.x;
    const double degree = static_cast<double>(std::max<Index>(rp.barrier_degree, 1));
    double t = opts.t0;
    res.status = SolverStatus::max_iter;
    while (res.iterations < opts.max_newton) {
        CenterOutcome c = center(model, x, t, opts, opts.max_newton - res.iterations);
        res.iterations += c.steps;
        ++res.outer_iterations;
        const double obj = model.objective(x);
        res.outer_objectives.push_back(obj);
        if (degree / t <= opts.obj_tol * std::max(1.0, std::abs(obj))) {
            res.status = SolverStatus::optimal;
            break;
        }
        if (c.stalled && degree / t <= 1e-3 * std::max(1.0, std::abs(obj))) {
            // Line search cannot make progress at this precision; the
            // iterate is as central as floating point allows.
            res.status = SolverStatus::optimal;
            break;
        }
        t *= opts.mu;
    }
    res.x = x;
    res.objective = model.objective(x);
    res.feasibility_residual = problem.feasibility_residual(x);
    if (res.status == SolverStatus::optimal && res.feasibility_residual > opts.feas_tol)
        res.status = SolverStatus::max_iter;
    return res;
}

} // namespace isac::conic
