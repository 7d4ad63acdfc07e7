// SPDX-License-Identifier: Apache-2.0
//
// Scenario configuration and the flat key-value file format used to load it.
//
// File format: one `key = value` per line, `#` starts a comment, lists are
// comma separated. Powers are given in dBm and SINR thresholds in dB; both
// are converted to watts / linear ratios once, at load time.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "isac/core_math.hpp"

namespace isac {

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);
double db_to_linear(double db);
double linear_to_db(double ratio);
double deg_to_rad(double deg);

struct PointTarget {
    double angle_rad = 0.0;
    double gain = 1.0;
};

struct ScenarioConfig {
    Index n_tx = 6;
    Index n_rx = 2;
    Index n_eve = 2;
    Index num_users = 3;
    Index frame_len = 30;

    double power_budget_w = 1.0;                 // 30 dBm
    std::vector<double> sinr_threshold{100.0};   // linear; one entry applies to every user
    double eve_mi_cap = 5.0;                     // nats

    double noise_comm = 1e-6;   // watts (-30 dBm)
    double noise_radar = 1.0;
    double noise_eve = 1.0;

    std::vector<double> rician_factor{2.0};
    std::vector<double> user_aoa_rad;
    std::vector<PointTarget> radar_targets;
    std::vector<PointTarget> eve_targets;
    double loading_rel = 1e-3;    // diagonal loading relative to trace(R_h)/dim

    // Penalty successive convex approximation.
    double penalty_init = 1e-3;
    double penalty_growth = 3.0;
    int max_outer_iters = 30;
    double tol_obj = 1e-3;   // nats
    double tol_pen = 1e-6;
    double rho_cap = 1e3;    // box on the rank-tie slacks (units of P0)
    double kappa_cap = 1e4;  // box on the Eve-MI slack (nats)
    int randomization_candidates = 100;

    // Artificial-noise design.
    int an_samples = 100;
    Index an_frame_len = 8;
    bool an_collapse_lmi = true;

    // Inner conic solver.
    double solver_feas_tol = 1e-7;
    double solver_obj_tol = 1e-9;
    int solver_max_newton = 800;

    std::uint64_t seed = 1;

    ScenarioConfig();

    /// Throws ConfigError on inconsistent or non-physical values.
    void validate() const;

    double sinr_for(Index user) const;
    double rician_for(Index user) const;

    /// Stable textual form of every field (used for hashing and replay).
    std::string canonical_string() const;
    std::uint64_t hash() const;
};

/// Parsed `key = value` file. Keys are consumed as they are read so that
/// unknown keys can be reported.
class KeyValueFile {
public:
    static KeyValueFile parse(const std::string& text);
    static KeyValueFile load(const std::string& path);

    bool has(const std::string& key) const;
    std::optional<std::string> raw(const std::string& key);
    std::optional<double> number(const std::string& key);
    std::optional<std::int64_t> integer(const std::string& key);
    std::optional<bool> boolean(const std::string& key);
    std::optional<std::vector<double>> numbers(const std::string& key);

    void set(const std::string& key, const std::string& value);
    std::vector<std::string> unused_keys() const;

private:
    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
};

/// Applies every recognised scenario key from `kv` on top of `base`.
ScenarioConfig apply_scenario_keys(KeyValueFile& kv, ScenarioConfig base = {});

/// Documented key list (for --help and README).
const std::vector<std::pair<std::string, std::string>>& scenario_key_docs();

std::uint64_t fnv1a64(const std::string& text);

} // namespace isac
