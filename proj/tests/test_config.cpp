// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "isac/config.hpp"
#include "isac/errors.hpp"

using namespace isac;

TEST_CASE("unit conversions")
{
    CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0));
    CHECK(dbm_to_watts(40.0) == doctest::Approx(10.0));
    CHECK(dbm_to_watts(-30.0) == doctest::Approx(1e-6));
    CHECK(watts_to_dbm(dbm_to_watts(17.5)) == doctest::Approx(17.5));
    CHECK(db_to_linear(20.0) == doctest::Approx(100.0));
    CHECK(linear_to_db(db_to_linear(28.0)) == doctest::Approx(28.0));
    CHECK(deg_to_rad(180.0) == doctest::Approx(3.14159265358979));
}

TEST_CASE("defaults are valid and match the desk configuration")
{
    const ScenarioConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.n_tx == 6);
    CHECK(cfg.num_users == 3);
    CHECK(cfg.n_rx == 2);
    CHECK(cfg.frame_len == 30);
    CHECK(cfg.power_budget_w == doctest::Approx(1.0));
    CHECK(cfg.eve_mi_cap == doctest::Approx(5.0));
    CHECK(cfg.penalty_init == doctest::Approx(1e-3));
    CHECK(cfg.sinr_for(2) == doctest::Approx(100.0));
}

TEST_CASE("key-value parsing")
{
    KeyValueFile kv = KeyValueFile::parse("# comment\npower_dbm = 40\nsinr_db = 20, 22, 24  # per user\n"
                                          "an_collapse_lmi = false\n");
    const ScenarioConfig cfg = apply_scenario_keys(kv);
    CHECK(cfg.power_budget_w == doctest::Approx(10.0));
    CHECK(cfg.sinr_for(1) == doctest::Approx(db_to_linear(22.0)));
    CHECK_FALSE(cfg.an_collapse_lmi);
    CHECK(kv.unused_keys().empty());
}

TEST_CASE("unknown keys are reported")
{
    KeyValueFile kv = KeyValueFile::parse("power_dbm = 30\nbogus = 1\n");
    (void)apply_scenario_keys(kv);
    const auto unused = kv.unused_keys();
    REQUIRE(unused.size() == 1);
    CHECK(unused[0] == "bogus");
}

TEST_CASE("malformed input is rejected")
{
    CHECK_THROWS_AS(KeyValueFile::parse("no equals sign\n"), ConfigError);
    KeyValueFile kv = KeyValueFile::parse("num_users = three\n");
    CHECK_THROWS_AS(apply_scenario_keys(kv), ConfigError);
    CHECK_THROWS_AS(KeyValueFile::load("/nonexistent/dir/x.cfg"), ConfigError);
}

TEST_CASE("validation catches non-physical values")
{
    ScenarioConfig cfg;
    cfg.power_budget_w = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ScenarioConfig{};
    cfg.sinr_threshold = {1.0, 2.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ScenarioConfig{};
    cfg.penalty_growth = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = ScenarioConfig{};
    cfg.num_users = 5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError); // only four user angles by default
}

TEST_CASE("hash tracks every field")
{
    ScenarioConfig a, b;
    CHECK(a.hash() == b.hash());
    CHECK(a.canonical_string() == b.canonical_string());
    b.seed = 2;
    CHECK(a.hash() != b.hash());
    b = a;
    b.loading_rel = 2e-3;
    CHECK(a.hash() != b.hash());
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
}
