// SPDX-License-Identifier: Apache-2.0
//
// Small random max-det instances over scalar variables and an exhaustive
// grid-search oracle for them.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "isac/conic_solver.hpp"
#include "test_helpers.hpp"

namespace testutil {

using isac::conic::ConicSubproblem;
using isac::conic::HermitianMap;
using isac::conic::LogdetTerm;

// x >= lo and x <= hi on a scalar block.
inline void add_bounds(ConicSubproblem& p, Index b, double lo, double hi)
{
    RVector c = p.linear_functional(b, [](const CMatrix& v) { return v(0, 0).real(); });
    p.affine.push_back({"lo", c, -lo});
    p.affine.push_back({"hi", -c, hi});
}

// Random max-det instance over n scalar variables in the unit box:
//   maximize sum_l logdet(I + sum_i x_i A_li) + c^T x
//   s.t.     I - sum_i x_i G_i >= 0.
struct Instance {
    int n = 0;
    double box = 1.0;
    std::vector<std::vector<CMatrix>> a; // [l][i]
    std::vector<CMatrix> g;
    std::vector<double> c;

    double objective(const std::vector<double>& x, bool& feasible) const
    {
        CMatrix f = CMatrix::Identity(2, 2);
        for (int i = 0; i < n; ++i)
            f -= x[i] * g[i];
        const double det = (f(0, 0) * f(1, 1) - f(0, 1) * f(1, 0)).real();
        feasible = f(0, 0).real() >= 0.0 && f(1, 1).real() >= 0.0 && det >= 0.0;
        double v = 0.0;
        for (const auto& al : a) {
            CMatrix m = CMatrix::Identity(2, 2);
            for (int i = 0; i < n; ++i)
                m += x[i] * al[i];
            v += std::log((m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real());
        }
        for (int i = 0; i < n; ++i)
            v += c[i] * x[i];
        return v;
    }
};

inline Instance random_instance(RngState& rng, int n)
{
    Instance in;
    in.n = n;
    for (int l = 0; l < 2; ++l) {
        std::vector<CMatrix> al;
        for (int i = 0; i < n; ++i)
            al.push_back(random_psd(rng, 2, 1));
        in.a.push_back(al);
    }
    for (int i = 0; i < n; ++i) {
        in.g.push_back(random_psd(rng, 2, 1) * 0.8);
        in.c.push_back(2.0 * rng.uniform() - 1.0);
    }
    return in;
}

inline ConicSubproblem to_problem(const Instance& in, std::vector<Index>& vars)
{
    ConicSubproblem p;
    vars.clear();
    for (int i = 0; i < in.n; ++i)
        vars.push_back(p.add_scalar("x" + std::to_string(i)));
    p.linear_objective = p.zeros();
    for (int i = 0; i < in.n; ++i) {
        add_bounds(p, vars[i], 0.0, in.box);
        p.linear_objective(p.block(vars[i]).offset) = in.c[i];
    }
    for (const auto& al : in.a) {
        LogdetTerm t;
        t.map.constant = CMatrix::Identity(2, 2);
        for (int i = 0; i < in.n; ++i) {
            const CMatrix img = al[i];
            const Index op = t.map.add_operator(p.make_operator(vars[i], [img](const CMatrix& v) { return (v(0, 0) * img).eval(); }));
            t.map.add_term(vars[i], op);
        }
        p.logdet_objective.push_back(t);
    }
    HermitianMap lmi;
    lmi.name = "cut";
    lmi.constant = CMatrix::Identity(2, 2);
    for (int i = 0; i < in.n; ++i) {
        const CMatrix img = in.g[i];
        const Index op = lmi.add_operator(p.make_operator(vars[i], [img](const CMatrix& v) { return (v(0, 0) * img).eval(); }));
        lmi.add_term(vars[i], op, -1.0);
    }
    p.lmis.push_back(lmi);
    return p;
}

// Exhaustive search over every grid point.
inline double grid_max_brute(const Instance& in, double step)
{
    const int m = static_cast<int>(std::lround(in.box / step));
    double best = -1e300;
    std::vector<double> x(in.n, 0.0);
    std::vector<int> idx(in.n, 0);
    while (true) {
        for (int i = 0; i < in.n; ++i)
            x[i] = idx[i] * step;
        bool feasible = false;
        const double v = in.objective(x, feasible);
        if (feasible)
            best = std::max(best, v);
        int k = 0;
        while (k < in.n && ++idx[k] > m)
            idx[k++] = 0;
        if (k == in.n)
            break;
    }
    return best;
}

// Same grid maximum, searched faster. Feasibility is monotone in each
// coordinate (x >= 0, G_i PSD), and the objective is concave along the last
// coordinate, so each line of the grid needs a bisection and a ternary search.
inline double grid_max(const Instance& in, double step)
{
    const int m = static_cast<int>(std::lround(in.box / step));
    const int last = in.n - 1;
    double best = -1e300;
    std::vector<double> x(in.n, 0.0);
    std::vector<int> idx(in.n, 0);
    bool feasible = false;
    auto at = [&](int i) {
        x[last] = i * step;
        return in.objective(x, feasible);
    };
    while (true) {
        for (int i = 0; i < last; ++i)
            x[i] = idx[i] * step;
        at(0);
        if (feasible) {
            int lo = 0, hi = m; // last feasible index
            at(m);
            if (!feasible) {
                while (hi - lo > 1) {
                    const int mid = (lo + hi) / 2;
                    at(mid);
                    (feasible ? lo : hi) = mid;
                }
                hi = lo;
            }
            int a = 0, b = hi;
            while (b - a > 3) {
                const int m1 = a + (b - a) / 3;
                const int m2 = b - (b - a) / 3;
                if (at(m1) < at(m2))
                    a = m1 + 1;
                else
                    b = m2;
            }
            for (int i = a; i <= b; ++i)
                best = std::max(best, at(i));
        }
        int k = 0;
        while (k < last && ++idx[k] > m)
            idx[k++] = 0;
        if (k == last)
            break;
    }
    return best;
}

} // namespace testutil
