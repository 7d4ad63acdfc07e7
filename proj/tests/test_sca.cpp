// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "isac/channel_model.hpp"
#include "isac/errors.hpp"
#include "isac/metrics.hpp"
#include "isac/sca_driver.hpp"
#include "test_helpers.hpp"

using namespace isac;

namespace {

struct Scene {
    ScenarioConfig cfg;
    CommChannel ch;
    SensingStats radar;
    SensingStats eve;
};

Scene make_scene(std::uint64_t seed, ScenarioConfig cfg = {})
{
    cfg.seed = seed;
    RngState rng = RngState(seed).split(0);
    Scene s{cfg, sample_comm_channels(cfg, rng), legitimate_stats(cfg), eve_stats(cfg)};
    return s;
}

const conic::AffineInequality& row(const conic::ConicSubproblem& p, const std::string& name)
{
    for (const auto& a : p.affine)
        if (a.name == name)
            return a;
    FAIL("missing row " << name);
    return p.affine.front();
}

// Random point with every block filled in.
RVector random_point(const conic::ConicSubproblem& p, RngState& rng)
{
    RVector x = p.zeros();
    for (Index i = 0; i < x.size(); ++i)
        x(i) = 2.0 * rng.uniform() - 1.0;
    return x;
}

} // namespace

TEST_CASE("no-AN subproblem layout")
{
    const Scene s = make_scene(3);
    RngState rng(4);
    SCAState st;
    st.penalty_weight = s.cfg.penalty_init;
    st.set_expansion(random_beamformers(s.cfg, rng));
    SubproblemLayout lay;
    const conic::ConicSubproblem p = build_subproblem_no_an(st, s.ch, s.radar, s.eve, s.cfg, &lay);
    CHECK(lay.W.size() == 3);
    CHECK(lay.w.size() == 3);
    CHECK(lay.rho.size() == 3);
    CHECK(lay.kappa.has_value());
    CHECK_FALSE(lay.r_n.has_value());
    CHECK(p.lmis.size() == 3);
    for (const auto& m : p.lmis)
        CHECK(m.dim() == s.cfg.n_tx + 1);
    CHECK(p.logdet_objective.size() == 1);

    SubproblemLayout lay2;
    const conic::ConicSubproblem q =
        build_subproblem_no_an(st, s.ch, s.radar, s.eve, s.cfg, &lay2, NoAnOptions{false});
    CHECK_FALSE(lay2.kappa.has_value());
    for (const auto& a : q.affine)
        CHECK(a.name != "eve_mi");
}

TEST_CASE("random beamformers stay in the power ball")
{
    ScenarioConfig cfg;
    RngState rng(8);
    for (int t = 0; t < 50; ++t) {
        const auto w = random_beamformers(cfg, rng);
        REQUIRE(w.size() == 3);
        double p = 0.0;
        for (const auto& v : w) {
            CHECK(v.size() == cfg.n_tx);
            p += v.squaredNorm();
        }
        CHECK(p <= cfg.power_budget_w * (1.0 + 1e-12));
    }
}

TEST_CASE("rank tie at a zero expansion point is rho >= tr W")
{
    const Scene s = make_scene(5);
    SCAState st;
    st.penalty_weight = 1.0;
    st.set_expansion(std::vector<CVector>(3, CVector::Zero(s.cfg.n_tx)));
    SubproblemLayout lay;
    const conic::ConicSubproblem p = build_subproblem_no_an(st, s.ch, s.radar, s.eve, s.cfg, &lay);
    RngState rng(6);
    for (Index k = 0; k < 3; ++k) {
        const auto& r = row(p, "rank_tie" + std::to_string(k));
        CHECK(std::abs(r.constant) < 1e-15);
        for (int t = 0; t < 5; ++t) {
            const RVector x = random_point(p, rng);
            const double expect = p.scalar_value(x, lay.rho[k]) - p.hermitian_value(x, lay.W[k]).trace().real();
            CHECK(r.coeffs.dot(x) + r.constant == doctest::Approx(expect).epsilon(1e-12));
            // The beamformer vector drops out entirely.
            RVector y = x;
            p.set_vector(y, lay.w[k], CVector::Zero(s.cfg.n_tx));
            CHECK(r.coeffs.dot(y) == doctest::Approx(r.coeffs.dot(x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("rank tie matches its definition at a random expansion point")
{
    const Scene s = make_scene(7);
    RngState rng(9);
    SCAState st;
    st.penalty_weight = 1.0;
    st.set_expansion(random_beamformers(s.cfg, rng));
    SubproblemLayout lay;
    const conic::ConicSubproblem p = build_subproblem_no_an(st, s.ch, s.radar, s.eve, s.cfg, &lay);
    const double p0 = s.cfg.power_budget_w;
    for (Index k = 0; k < 3; ++k) {
        const auto& r = row(p, "rank_tie" + std::to_string(k));
        const CVector wt = st.w_tilde[k] / std::sqrt(p0);
        for (int t = 0; t < 5; ++t) {
            const RVector x = random_point(p, rng);
            const CVector w = p.vector_value(x, lay.w[k]);
            const double expect = p.scalar_value(x, lay.rho[k]) - p.hermitian_value(x, lay.W[k]).trace().real() +
                                  2.0 * wt.dot(w).real() - wt.squaredNorm();
            CHECK(r.coeffs.dot(x) + r.constant == doctest::Approx(expect).epsilon(1e-10));
        }
    }
}

TEST_CASE("single user without the Eve constraint spends the whole budget")
{
    ScenarioConfig cfg;
    cfg.num_users = 1;
    const Scene s = make_scene(11, cfg);
    RngState rng(12);
    SCAState st;
    st.penalty_weight = cfg.penalty_init;
    st.set_expansion(random_beamformers(s.cfg, rng));
    SubproblemLayout lay;
    const conic::ConicSubproblem p =
        build_subproblem_no_an(st, s.ch, s.radar, s.eve, s.cfg, &lay, NoAnOptions{false});
    const conic::SolverResult r = conic::solve(p, solver_options(s.cfg));
    REQUIRE(r.status == conic::SolverStatus::optimal);
    CHECK(p.hermitian_value(r.x, lay.W[0]).trace().real() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("phase I on a later subproblem gives a strictly feasible point")
{
    const Scene s = make_scene(13);
    RngState rng(14);
    for (int t = 0; t < 3; ++t) {
        SCAState st;
        st.iteration = 1;
        st.penalty_weight = s.cfg.penalty_init * s.cfg.penalty_growth;
        st.set_expansion(random_beamformers(s.cfg, rng));
        const conic::ConicSubproblem p = build_subproblem_no_an(st, s.ch, s.radar, s.eve, s.cfg);
        const conic::Phase1Result f = conic::phase1_feasible_point(p, solver_options(s.cfg));
        REQUIRE(f.feasible);
        CHECK(conic::strictly_feasible(p, f.x, 1e-9));
    }
}

TEST_CASE("power repair")
{
    const Scene s = make_scene(15);
    SUBCASE("zero-forcing directions at low power are lifted to the SINR targets")
    {
        CMatrix h(3, s.cfg.n_tx);
        for (Index k = 0; k < 3; ++k)
            h.row(k) = s.ch.h(k).adjoint();
        const CMatrix zf = h.adjoint() * (h * h.adjoint()).inverse();
        std::vector<CVector> w;
        for (Index k = 0; k < 3; ++k)
            w.push_back(zf.col(k).normalized() * 1e-6);
        REQUIRE(repair_powers(s.ch, w, s.cfg));
        const auto g = sinr(s.ch, std::span<const CVector>(w), s.cfg.noise_comm);
        double p = 0.0;
        for (Index k = 0; k < 3; ++k) {
            CHECK(g[k] >= s.cfg.sinr_for(k));
            p += w[k].squaredNorm();
        }
        CHECK(p <= s.cfg.power_budget_w + 1e-7);
    }
    SUBCASE("unreachable targets are reported")
    {
        ScenarioConfig cfg = s.cfg;
        cfg.sinr_threshold = {1e12};
        std::vector<CVector> w;
        for (Index k = 0; k < 3; ++k)
            w.push_back(s.ch.h(k).normalized());
        CHECK_FALSE(repair_powers(s.ch, w, cfg));
    }
}

TEST_CASE("penalty SCA without AN")
{
    const Scene s = make_scene(21);
    RngState rng = RngState(21).split(1);
    const SCAResult r = run_sca_no_an(s.ch, s.radar, s.eve, s.cfg, rng);
    REQUIRE(r.trace.rows.size() >= 2);
    CHECK(r.trace.converged);
    CHECK(r.feasible);
    CHECK(r.violations.empty());
    const auto& rows = r.trace.rows;
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(rows[i].radar_mi >= rows[i - 1].radar_mi - 1e-6);
    for (const auto& row : rows) {
        CHECK(row.eve_mi <= row.eve_surrogate + 1e-9);
        CHECK(row.power <= s.cfg.power_budget_w * (1.0 + 1e-6));
    }
    CHECK(rows.back().max_penalty <= s.cfg.tol_pen);

    const BeamformerSolution& sol = r.solution;
    CHECK(sol.eve_mi <= s.cfg.eve_mi_cap + 1e-3);
    for (Index k = 0; k < 3; ++k) {
        CHECK(sol.sinr[k] >= s.cfg.sinr_for(k) * (1.0 - 1e-6));
        CHECK(sol.rank_one_certificate[k] >= 0.999);
        const CMatrix& W = sol.W[k];
        const CVector wk = W.trace().real() > 0.0 ? CVector(hermitian_eig(W).vectors.col(0)) : CVector(W.col(0));
        const CMatrix rank1 = W.trace().real() * wk * wk.adjoint();
        CHECK((W - rank1).norm() / W.trace().real() <= 1e-3);
    }

    SUBCASE("deterministic")
    {
        RngState again = RngState(21).split(1);
        const SCAResult b = run_sca_no_an(s.ch, s.radar, s.eve, s.cfg, again);
        REQUIRE(b.trace.rows.size() == rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            CHECK(b.trace.rows[i].radar_mi == rows[i].radar_mi);
        CHECK(b.solution.radar_mi == sol.radar_mi);
    }
    SUBCASE("more power does not hurt")
    {
        ScenarioConfig cfg = s.cfg;
        cfg.power_budget_w *= 2.0;
        RngState again = RngState(21).split(1);
        const SCAResult b = run_sca_no_an(s.ch, s.radar, s.eve, cfg, again);
        CHECK(b.solution.radar_mi >= sol.radar_mi - 1e-6);
    }
}

TEST_CASE("unreachable SINR targets raise InfeasibleError")
{
    ScenarioConfig cfg;
    cfg.sinr_threshold = {1e12};
    const Scene s = make_scene(23, cfg);
    RngState rng(24);
    CHECK_THROWS_AS(run_sca_no_an(s.ch, s.radar, s.eve, s.cfg, rng), InfeasibleError);
}
