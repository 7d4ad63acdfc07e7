// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "isac/an_extension.hpp"
#include "isac/channel_model.hpp"
#include "isac/errors.hpp"
#include "isac/metrics.hpp"
#include "test_helpers.hpp"

using namespace isac;
using testutil::max_abs;
using testutil::random_psd;

namespace {

struct Scene {
    ScenarioConfig cfg;
    CommChannel ch;
    SensingStats radar;
    SensingStats eve;
    ANSampleSet samples;
};

Scene make_scene(std::uint64_t seed, ScenarioConfig cfg = {})
{
    cfg.seed = seed;
    cfg.an_samples = 20;
    RngState root(seed);
    RngState ch_rng = root.split(0);
    RngState s_rng = root.split(3);
    const SensingStats eve = eve_stats(cfg);
    return Scene{cfg, sample_comm_channels(cfg, ch_rng), legitimate_stats(cfg), eve,
                 sample_an_channels(eve, cfg.an_samples, s_rng)};
}

const conic::ConcaveInequality& eve_row(const conic::ConicSubproblem& p)
{
    for (const auto& c : p.concave)
        if (c.name == "eve_an")
            return c;
    FAIL("no eve_an row");
    return p.concave.front();
}

} // namespace

TEST_CASE("AN sample set")
{
    const Scene s = make_scene(2);
    CHECK(s.samples.size() == 20);
    for (Index j = 0; j < s.samples.size(); ++j) {
        CHECK(s.samples.channels[j].rows() == s.cfg.n_eve);
        CHECK(s.samples.channels[j].cols() == s.cfg.n_tx);
        CHECK(max_abs(s.samples.grams[j] - s.samples.channels[j].adjoint() * s.samples.channels[j]) < 1e-14);
    }
    CHECK_THROWS_AS(ANSampleSet::from_channels({}), DimensionError);
    CHECK_THROWS_AS(ANSampleSet::from_channels({CMatrix::Zero(2, 6), CMatrix::Zero(2, 5)}), DimensionError);
    RngState rng(1);
    CHECK_THROWS_AS(sample_an_channels(s.eve, 0, rng), DomainError);
}

TEST_CASE("linearised log-det dominates")
{
    RngState rng(3);
    for (int t = 0; t < 100; ++t) {
        const Index n = 1 + t % 4;
        const CMatrix qt = CMatrix::Identity(n, n) + random_psd(rng, n);
        const CMatrix q = CMatrix::Identity(n, n) + random_psd(rng, n);
        const double lin = logdet_psd(qt) + (qt.inverse() * (q - qt)).trace().real();
        CHECK(lin >= logdet_psd(q) - 1e-10);
    }
}

TEST_CASE("AN expansion point")
{
    const Scene s = make_scene(4);
    SCAState st;
    RngState rng(5);
    st.set_expansion(random_beamformers(s.cfg, rng));
    const Index ne = s.cfg.n_eve;

    SUBCASE("defaults to the identity without AN")
    {
        CHECK(max_abs(an_expansion_point(st, s.eve, s.samples, s.cfg, true) - CMatrix::Identity(ne, ne)) == 0.0);
        const CMatrix full = an_expansion_point(st, s.eve, s.samples, s.cfg, false);
        CHECK(full.rows() == ne * s.cfg.an_frame_len);
    }
    SUBCASE("follows R~_N")
    {
        st.r_n_tilde = random_psd(rng, s.cfg.n_tx) * 1e-3;
        const CMatrix q = an_expansion_point(st, s.eve, s.samples, s.cfg, true);
        const CMatrix expect = CMatrix::Identity(ne, ne) +
                               eve_an_covariance_block(s.samples.channels, *st.r_n_tilde) / s.eve.noise_power;
        CHECK(max_abs(q - expect) < 1e-14);
    }
    SUBCASE("non-PD Q~ is reset")
    {
        st.q_tilde = -CMatrix::Identity(ne, ne);
        const CMatrix q = an_expansion_point(st, s.eve, s.samples, s.cfg, true);
        CHECK(max_abs(q - (1.0 + 1e-9) * CMatrix::Identity(ne, ne)) < 1e-15);
        st.q_tilde = CMatrix::Identity(ne + 1, ne + 1);
        CHECK_THROWS_AS(an_expansion_point(st, s.eve, s.samples, s.cfg, true), DimensionError);
    }
}

TEST_CASE("AN subproblem layout")
{
    const Scene s = make_scene(6);
    SCAState st;
    RngState rng(7);
    st.penalty_weight = 1.0;
    st.set_expansion(random_beamformers(s.cfg, rng));
    st.r_n_tilde = CMatrix::Zero(s.cfg.n_tx, s.cfg.n_tx);

    for (const bool collapse : {true, false}) {
        SubproblemLayout lay;
        const conic::ConicSubproblem p =
            build_subproblem_an(st, s.ch, s.radar, s.eve, s.samples, s.cfg, &lay, AnOptions{true, collapse});
        REQUIRE(lay.q.has_value());
        REQUIRE(lay.r_n.has_value());
        CHECK_FALSE(lay.kappa.has_value());
        const Index want = collapse ? s.cfg.n_eve : s.cfg.n_eve * s.cfg.an_frame_len;
        CHECK(p.block(*lay.q).dim == want);
        bool found = false;
        for (const auto& m : p.lmis)
            if (m.name == "aux_q") {
                found = true;
                CHECK(m.dim() == want);
            }
        CHECK(found);
        CHECK(eve_row(p).logs.size() == static_cast<std::size_t>(s.samples.size()));

        // Whatever the rest of the start looks like, Q sits strictly inside aux_q.
        const auto start = warm_start_an(p, lay, st, s.eve, s.samples, s.cfg);
        if (start)
            for (const auto& m : p.lmis)
                if (m.name == "aux_q")
                    CHECK(min_eigenvalue(p.evaluate(m, *start)) > 0.0);
    }
}

TEST_CASE("zero Eve channel leaves R_N out of the Eve constraint")
{
    ScenarioConfig cfg;
    const Scene s = make_scene(8, cfg);
    const ANSampleSet zero = ANSampleSet::from_channels({CMatrix::Zero(cfg.n_eve, cfg.n_tx)});
    SCAState st;
    RngState rng(9);
    st.penalty_weight = 1.0;
    st.set_expansion(random_beamformers(cfg, rng));
    SubproblemLayout lay;
    const conic::ConicSubproblem p = build_subproblem_an(st, s.ch, s.radar, s.eve, zero, s.cfg, &lay);
    const auto& c = eve_row(p);
    REQUIRE(c.logs.size() == 1);
    CHECK(c.logs[0].coeffs.cwiseAbs().maxCoeff() == 0.0);
    const auto& rb = p.block(*lay.r_n);
    CHECK(c.coeffs.segment(rb.offset, rb.num_params()).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& m : p.lmis) {
        if (m.name != "aux_q")
            continue;
        RngState r2(10);
        RVector x = p.zeros();
        p.set_hermitian(x, *lay.r_n, random_psd(r2, cfg.n_tx));
        CHECK(max_abs(p.evaluate(m, x) + CMatrix::Identity(m.dim(), m.dim())) < 1e-14);
    }
}

TEST_CASE("AN design without R_N reduces to the design without the Eve constraint")
{
    ScenarioConfig cfg;
    cfg.frame_len = cfg.an_frame_len;
    const Scene s = make_scene(12, cfg);
    RngState rng(13);
    for (int t = 0; t < 2; ++t) {
        SCAState st;
        st.penalty_weight = cfg.penalty_init;
        st.set_expansion(random_beamformers(cfg, rng));
        const conic::ConicSubproblem a =
            build_subproblem_an(st, s.ch, s.radar, s.eve, s.samples, s.cfg, nullptr, AnOptions{false, true});
        const conic::ConicSubproblem b =
            build_subproblem_no_an(st, s.ch, s.radar, s.eve, s.cfg, nullptr, NoAnOptions{false});
        const conic::SolverResult ra = conic::solve(a, solver_options(s.cfg));
        const conic::SolverResult rb = conic::solve(b, solver_options(s.cfg));
        REQUIRE(ra.status == conic::SolverStatus::optimal);
        REQUIRE(rb.status == conic::SolverStatus::optimal);
        CHECK(ra.objective == doctest::Approx(rb.objective).epsilon(1e-5));
    }
}

TEST_CASE("AN design end to end")
{
    ScenarioConfig cfg;
    cfg.power_budget_w = 10.0;
    cfg.sinr_threshold = {db_to_linear(28.0)};
    const Scene s = make_scene(14, cfg);
    RngState rng = RngState(14).split(1);
    const SCAResult r = run_sca_an(s.ch, s.radar, s.eve, s.samples, s.cfg, rng);
    CHECK(r.feasible);
    REQUIRE(r.solution.an_covariance.has_value());
    const CMatrix& rn = *r.solution.an_covariance;
    CHECK(min_eigenvalue(rn) >= -1e-9 * std::max(1.0, rn.trace().real()));
    const CMatrix rx = transmit_covariance(std::span<const CVector>(r.solution.w));
    CHECK(rx.trace().real() + rn.trace().real() <= cfg.power_budget_w + 1e-6);
    CHECK(r.solution.power == doctest::Approx(rx.trace().real() + rn.trace().real()).epsilon(1e-12));
    const auto g = sinr(s.ch, std::span<const CVector>(r.solution.w), cfg.noise_comm, &rn);
    for (Index k = 0; k < cfg.num_users; ++k)
        CHECK(g[k] >= cfg.sinr_for(k) * (1.0 - 1e-6));
    REQUIRE(r.solution.eve_mi_bound.has_value());
    CHECK(*r.solution.eve_mi_bound <= cfg.eve_mi_cap + 1e-3);
    CHECK(*r.solution.eve_mi_bound ==
          doctest::Approx(eve_mi_an_upper_bound(s.eve, rn, cfg.an_frame_len, s.samples.channels)).epsilon(1e-12));
    for (const auto& row : r.trace.rows)
        CHECK(row.power <= cfg.power_budget_w * (1.0 + 1e-6));
}

TEST_CASE("a loose Eve cap leaves no power for AN")
{
    ScenarioConfig cfg;
    cfg.eve_mi_cap = 1e6;
    for (std::uint64_t seed : {31u, 32u}) {
        const Scene s = make_scene(seed, cfg);
        RngState rng = RngState(seed).split(1);
        const SCAResult r = run_sca_an(s.ch, s.radar, s.eve, s.samples, s.cfg, rng);
        REQUIRE(r.solution.an_covariance.has_value());
        CHECK(r.solution.an_covariance->trace().real() <= 1e-3 * cfg.power_budget_w);
    }
}
