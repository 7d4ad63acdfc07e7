// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "isac/channel_model.hpp"
#include "isac/errors.hpp"
#include "test_helpers.hpp"

using namespace isac;
using testutil::max_abs;

TEST_CASE("steering vector")
{
    const CVector a = steering_vector(kPi / 2, 4);
    CHECK(max_abs(a - CVector::Ones(4)) < 1e-15);
    const CVector b = steering_vector(0.0, 2);
    CHECK(std::abs(b(0) - cd(1)) < 1e-15);
    CHECK(std::abs(b(1) - cd(-1)) < 1e-15);
    CHECK_THROWS_AS(steering_vector(4.0, 3), DomainError);
}

TEST_CASE("Rician channels")
{
    ScenarioConfig cfg;
    SUBCASE("LoS-only limit equals the steering vector")
    {
        cfg.rician_factor = {kRicianLosOnly};
        RngState rng(1);
        const UserChannel u = sample_rician_channel(cfg, 0, rng);
        CHECK(max_abs(u.h - steering_vector(cfg.user_aoa_rad[0], cfg.n_tx)) < 1e-15);
    }
    SUBCASE("Rayleigh (K = 0) has zero mean")
    {
        cfg.rician_factor = {0.0};
        RngState rng(2);
        CVector mean = CVector::Zero(cfg.n_tx);
        const int n = 10000;
        for (int i = 0; i < n; ++i)
            mean += sample_rician_channel(cfg, 0, rng).h;
        mean /= n;
        CHECK(mean.cwiseAbs().maxCoeff() < 0.05);
    }
    SUBCASE("K = 1 keeps E|h|^2 = N_t")
    {
        cfg.rician_factor = {1.0};
        RngState rng(3);
        double acc = 0.0;
        const int n = 10000;
        for (int i = 0; i < n; ++i)
            acc += sample_rician_channel(cfg, 1, rng).h.squaredNorm();
        CHECK(acc / n == doctest::Approx(6.0).epsilon(0.05));
    }
    SUBCASE("draws are seeded and per-user streams are sequential")
    {
        RngState a(5), b(5);
        const CommChannel x = sample_comm_channels(cfg, a);
        const CommChannel y = sample_comm_channels(cfg, b);
        REQUIRE(x.num_users() == 3);
        for (Index k = 0; k < 3; ++k)
            CHECK(x.h(k) == y.h(k));
        ScenarioConfig four = cfg;
        four.num_users = 4;
        RngState c(5);
        const CommChannel z = sample_comm_channels(four, c);
        CHECK(z.h(2) == x.h(2));
    }
}

TEST_CASE("sensing statistics")
{
    SUBCASE("one unit target without loading is rank one")
    {
        const SensingStats s = build_sensing_stats({{0.7, 1.0}}, 2, 4, 0.0, 1.0, Receiver::legitimate);
        CHECK(s.eigenvalues(0) == doctest::Approx(8.0));
        CHECK(s.eigenvalues.tail(7).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("no targets with unit loading is the identity")
    {
        const SensingStats s = build_sensing_stats({}, 2, 3, 1.0, 1.0, Receiver::eve);
        CHECK(max_abs(s.covariance - CMatrix::Identity(6, 6)) < 1e-15);
    }
    SUBCASE("two distinct targets give rank two")
    {
        const SensingStats s =
            build_sensing_stats({{0.5, 1.0}, {2.0, 0.7}}, 2, 6, 0.0, 1.0, Receiver::legitimate);
        int rank = 0;
        for (Index i = 0; i < s.eigenvalues.size(); ++i)
            if (s.eigenvalues(i) > 1e-9 * s.eigenvalues(0))
                ++rank;
        CHECK(rank == 2);
    }
    SUBCASE("invalid inputs")
    {
        CHECK_THROWS_AS(build_sensing_stats({}, 2, 3, 0.0, 1.0, Receiver::eve), DomainError);
        CHECK_THROWS_AS(build_sensing_stats({{0.5, 1.0}}, 2, 3, 0.0, 0.0, Receiver::eve), DomainError);
        CHECK_THROWS_AS(build_sensing_stats({{0.5, 1.0}}, 0, 3, 0.0, 1.0, Receiver::eve), DimensionError);
    }
}

TEST_CASE("blockwise reshaping equals the Kronecker form")
{
    RngState rng(9);
    for (Index nr : {1, 2, 3}) {
        const SensingStats s =
            build_sensing_stats({{0.4, 1.0}, {1.9, 0.8}}, nr, 5, 1e-3, 1.0, Receiver::legitimate);
        const CMatrix r = testutil::random_psd(rng, 5);
        // U^H K (I kron R^*) K^T U, assembled explicitly: K = K_(n_tx, n_rx).
        const CMatrix k = commutation_matrix(5, nr).cast<cd>();
        const CMatrix naive = s.eigenvectors.adjoint() * k *
                              kron(CMatrix::Identity(nr, nr), r.conjugate()) * k.transpose() * s.eigenvectors;
        const CMatrix fast = s.reshape_sum(r);
        CHECK(max_abs(fast - naive) < 1e-9 * max_abs(naive));
        // Same quantity through R^* kron I_nrx directly.
        const CMatrix direct = s.eigenvectors.adjoint() * kron(r.conjugate(), CMatrix::Identity(nr, nr)) *
                               s.eigenvectors;
        CHECK(max_abs(fast - direct) < 1e-9 * max_abs(naive));
    }
}

TEST_CASE("legitimate and Eve stats differ only by label and noise for equal inputs")
{
    ScenarioConfig cfg;
    cfg.eve_targets = cfg.radar_targets;
    cfg.n_eve = cfg.n_rx;
    cfg.noise_eve = 3.0;
    const SensingStats a = legitimate_stats(cfg);
    const SensingStats b = eve_stats(cfg);
    CHECK(a.covariance == b.covariance);
    CHECK(a.eigenvalues == b.eigenvalues);
    CHECK(a.receiver != b.receiver);
    CHECK(b.noise_power == 3.0);
}
