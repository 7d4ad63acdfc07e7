// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "isac/conic_solver.hpp"
#include "isac/errors.hpp"
#include "maxdet_oracle.hpp"
#include "test_helpers.hpp"

using namespace isac;
using namespace isac::conic;
using testutil::max_abs;
using namespace testutil;

namespace {

CMatrix scalar_image(double v) { return CMatrix::Constant(1, 1, cd(v)); }

} // namespace

TEST_CASE("realification")
{
    CMatrix one = scalar_image(2.5);
    const RMatrix e = realify(one);
    CHECK(e.isApprox(2.5 * RMatrix::Identity(2, 2)));
    CHECK(std::log(e.determinant()) == doctest::Approx(2.0 * std::log(2.5)));

    RngState rng(1);
    const CMatrix a = testutil::random_psd(rng, 4);
    const RMatrix s = realify(a);
    CHECK(Eigen::SelfAdjointEigenSolver<RMatrix>(s).eigenvalues().minCoeff() > 0.0);
    CHECK(s.determinant() == doctest::Approx(std::norm(a.determinant())).epsilon(1e-10));
    CHECK(max_abs(derealify(s) - a) == 0.0);
}

TEST_CASE("Hermitian parameter packing round trips")
{
    ConicSubproblem p;
    const Index h = p.add_hermitian("H", 3);
    const Index v = p.add_vector("v", 2);
    const Index s = p.add_scalar("s");
    CHECK(p.num_params() == 9 + 4 + 1);
    RngState rng(2);
    const CMatrix hv = testutil::random_hermitian(rng, 3);
    const CVector vv = standard_complex_gaussian(rng, 2, 1);
    RVector x = p.zeros();
    p.set_hermitian(x, h, hv);
    p.set_vector(x, v, vv);
    p.set_scalar(x, s, -0.5);
    CHECK(max_abs(p.hermitian_value(x, h) - hv) < 1e-15);
    CHECK(max_abs(p.vector_value(x, v) - vv) < 1e-15);
    CHECK(p.scalar_value(x, s) == -0.5);
    for (Index i = 0; i < p.block(h).num_params(); ++i)
        CHECK(testutil::max_abs(p.basis(h, i) - p.basis(h, i).adjoint()) == 0.0);
}

TEST_CASE("monotone logdet objective hits the upper bound")
{
    ConicSubproblem p;
    const Index x = p.add_scalar("x");
    add_bounds(p, x, 0.0, 1.0);
    LogdetTerm t;
    t.map.constant = CMatrix::Identity(2, 2);
    t.map.add_term(x, t.map.add_operator(p.make_operator(x, [](const CMatrix& v) {
        return (v(0, 0) * CMatrix::Identity(2, 2)).eval();
    })));
    p.logdet_objective.push_back(t);
    const SolverResult r = solve(p);
    REQUIRE(r.status == SolverStatus::optimal);
    CHECK(p.scalar_value(r.x, x) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.objective == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-7));
}

TEST_CASE("log(1 + x) minus a linear penalty")
{
    for (double pen : {2.0, 0.25}) {
        ConicSubproblem p;
        const Index x = p.add_scalar("x");
        p.affine.push_back({"x>=0", p.linear_functional(x, [](const CMatrix& v) { return v(0, 0).real(); }), 0.0});
        LogdetTerm t;
        t.map.constant = CMatrix::Identity(1, 1);
        t.map.add_term(x, t.map.add_operator(p.make_operator(x, [](const CMatrix& v) { return v; })));
        p.logdet_objective.push_back(t);
        p.linear_objective = p.zeros();
        p.linear_objective(p.block(x).offset) = -pen;
        const SolverResult r = solve(p);
        REQUIRE(r.status == SolverStatus::optimal);
        const double expect_x = pen >= 1.0 ? 0.0 : 1.0 / pen - 1.0;
        CHECK(std::abs(p.scalar_value(r.x, x) - expect_x) < 1e-5);
        CHECK(r.objective == doctest::Approx(std::log1p(expect_x) - pen * expect_x).epsilon(1e-7));
    }
}

TEST_CASE("phase I")
{
    SUBCASE("trace budget only: scaled identity at half the budget")
    {
        ConicSubproblem p;
        const Index r = p.add_hermitian("R", 3);
        HermitianMap psd;
        psd.constant = CMatrix::Zero(3, 3);
        psd.add_term(r, psd.add_operator(p.make_operator(r, [](const CMatrix& v) { return v; })));
        p.lmis.push_back(psd);
        p.affine.push_back({"budget", -p.linear_functional(r, [](const CMatrix& v) { return v.trace().real(); }), 2.0});
        const Phase1Result f = phase1_feasible_point(p);
        REQUIRE(f.feasible);
        CHECK(max_abs(p.hermitian_value(f.x, r) - (2.0 / 6.0) * CMatrix::Identity(3, 3)) < 1e-12);
    }
    SUBCASE("contradictory bounds")
    {
        ConicSubproblem p;
        const Index x = p.add_scalar("x");
        add_bounds(p, x, 0.0, -1.0);
        CHECK_FALSE(phase1_feasible_point(p).feasible);
        CHECK(solve(p).status == SolverStatus::infeasible_detected);
    }
    SUBCASE("LMI forces the slack problem")
    {
        // [[x, 1], [1, y]] >= 0 with x + y <= 3, x, y >= 0.
        ConicSubproblem p;
        const Index x = p.add_scalar("x");
        const Index y = p.add_scalar("y");
        HermitianMap m;
        m.constant = CMatrix::Zero(2, 2);
        m.constant(0, 1) = m.constant(1, 0) = 1.0;
        m.add_term(x, m.add_operator(p.make_operator(x, [](const CMatrix& v) {
            CMatrix o = CMatrix::Zero(2, 2);
            o(0, 0) = v(0, 0);
            return o;
        })));
        m.add_term(y, m.add_operator(p.make_operator(y, [](const CMatrix& v) {
            CMatrix o = CMatrix::Zero(2, 2);
            o(1, 1) = v(0, 0);
            return o;
        })));
        p.lmis.push_back(m);
        RVector sum = p.zeros();
        sum(p.block(x).offset) = sum(p.block(y).offset) = -1.0;
        p.affine.push_back({"sum", sum, 3.0});
        const Phase1Result f = phase1_feasible_point(p);
        REQUIRE(f.feasible);
        CHECK(strictly_feasible(p, f.x, 1e-9));
    }
}

TEST_CASE("line-search grid oracle agrees with the exhaustive grid")
{
    RngState rng(30);
    for (int t = 0; t < 9; ++t) {
        const Instance in = random_instance(rng, 1 + t % 3);
        CHECK(grid_max(in, 1e-2) == grid_max_brute(in, 1e-2));
    }
}

TEST_CASE("solver matches grid search on small max-det instances")
{
    RngState rng(31);
    for (int t = 0; t < 6; ++t) {
        const int n = 1 + t % 2;
        const Instance in = random_instance(rng, n);
        std::vector<Index> vars;
        const ConicSubproblem p = to_problem(in, vars);
        const SolverResult r = solve(p);
        REQUIRE(r.status == SolverStatus::optimal);
        CHECK(r.feasibility_residual <= 1e-7);
        const double grid = grid_max(in, n == 1 ? 1e-5 : 1e-3);
        // The grid only under-estimates the optimum.
        CHECK(std::abs(r.objective - grid) < 5e-3);
        CHECK(r.objective >= grid - 1e-6);
        for (std::size_t k = 1; k < r.outer_objectives.size(); ++k)
            CHECK(r.outer_objectives[k] >= r.outer_objectives[k - 1] - 1e-9);
    }
}

TEST_CASE("solver is deterministic")
{
    RngState rng(32);
    const Instance in = random_instance(rng, 3);
    std::vector<Index> vars;
    const ConicSubproblem p = to_problem(in, vars);
    const SolverResult a = solve(p);
    const SolverResult b = solve(p);
    CHECK(a.iterations == b.iterations);
    CHECK(a.objective == b.objective);
    CHECK(a.x == b.x);
}

TEST_CASE("malformed problems are rejected")
{
    ConicSubproblem p;
    const Index x = p.add_scalar("x");
    p.affine.push_back({"bad", RVector::Ones(3), 0.0});
    CHECK_THROWS_AS(p.validate(), DimensionError);
    ConicSubproblem q;
    const Index y = q.add_scalar("y");
    HermitianMap m;
    m.constant = CMatrix::Zero(2, 2);
    m.constant(0, 1) = 1.0; // not Hermitian
    q.lmis.push_back(m);
    CHECK_THROWS(q.validate());
    (void)x;
    (void)y;
}
