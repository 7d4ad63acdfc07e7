// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <vector>

#include "isac/baseline.hpp"
#include "isac/channel_model.hpp"
#include "isac/errors.hpp"
#include "isac/metrics.hpp"
#include "test_helpers.hpp"

using namespace isac;

namespace {

CommChannel channels_from(std::vector<CVector> hs)
{
    CommChannel ch;
    for (auto& h : hs) {
        UserChannel u;
        u.h = std::move(h);
        u.h_los = u.h;
        ch.users.push_back(std::move(u));
    }
    return ch;
}

// The solver enforces the targets with a 1e-5 relative back-off.
constexpr double kBackoff = 1.0 + 1e-5;

} // namespace

TEST_CASE("single user: matched filter at the minimum power")
{
    ScenarioConfig cfg;
    cfg.num_users = 1;
    RngState rng(1);
    const CommChannel ch = sample_comm_channels(cfg, rng);
    const std::vector<CMatrix> W = min_power_covariances(ch, cfg);
    REQUIRE(W.size() == 1);
    const CVector& h = ch.h(0);
    const double want = cfg.sinr_for(0) * cfg.noise_comm / h.squaredNorm() * kBackoff;
    CHECK(W[0].trace().real() == doctest::Approx(want).epsilon(1e-5));
    CHECK(rank_one_certificate(W[0]) >= 0.999);
    const CVector u = h.normalized();
    CHECK(std::abs(u.dot(W[0] * u)) == doctest::Approx(W[0].trace().real()).epsilon(1e-4));
}

TEST_CASE("orthogonal users do not interfere")
{
    ScenarioConfig cfg;
    cfg.num_users = 2;
    CVector h1 = CVector::Zero(cfg.n_tx);
    CVector h2 = CVector::Zero(cfg.n_tx);
    h1(0) = cd(0.3, 0.4);
    h2(3) = cd(0.0, 2.0);
    const CommChannel ch = channels_from({h1, h2});
    const std::vector<CMatrix> W = min_power_covariances(ch, cfg);
    const double g = cfg.sinr_for(0) * cfg.noise_comm * kBackoff;
    CHECK(W[0].trace().real() == doctest::Approx(g / 0.25).epsilon(1e-5));
    CHECK(W[1].trace().real() == doctest::Approx(g / 4.0).epsilon(1e-5));
}

TEST_CASE("baseline design")
{
    ScenarioConfig cfg;
    cfg.power_budget_w = 10.0;
    cfg.sinr_threshold = {db_to_linear(28.0)};
    RngState root(3);
    RngState ch_rng = root.split(0);
    const CommChannel ch = sample_comm_channels(cfg, ch_rng);
    const SensingStats radar = legitimate_stats(cfg);
    const SensingStats eve = eve_stats(cfg);
    RngState rng = root.split(2);
    const BaselineSolution b = solve_baseline(ch, radar, eve, cfg, rng);

    CHECK(b.min_power <= cfg.power_budget_w);
    CHECK(b.used_power == doctest::Approx(cfg.power_budget_w).epsilon(1e-12));
    REQUIRE(b.sinr.size() == 3);
    for (Index k = 0; k < 3; ++k) {
        CHECK(b.sinr_unscaled[k] >= cfg.sinr_for(k) * (1.0 - 1e-6));
        // Common scaling raises signal and interference together, noise stays.
        CHECK(b.sinr[k] >= b.sinr_unscaled[k] * (1.0 - 1e-12));
    }
    const auto check = sinr(ch, std::span<const CVector>(b.w), cfg.noise_comm);
    for (Index k = 0; k < 3; ++k)
        CHECK(check[k] == doctest::Approx(b.sinr[k]).epsilon(1e-12));
    CHECK(b.solution.radar_mi == doctest::Approx(sensing_mi(radar, transmit_covariance(std::span<const CVector>(b.w)),
                                                            cfg.frame_len))
                                     .epsilon(1e-12));
}

TEST_CASE("unreachable targets")
{
    ScenarioConfig cfg;
    cfg.sinr_threshold = {1e12};
    RngState rng(4);
    const CommChannel ch = sample_comm_channels(cfg, rng);
    CHECK_THROWS_AS(min_power_covariances(ch, cfg), InfeasibleError);

    ScenarioConfig two;
    two.num_users = 2;
    CHECK_THROWS_AS(min_power_covariances(ch, two), DimensionError);
}
