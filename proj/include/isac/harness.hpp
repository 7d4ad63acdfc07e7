// SPDX-License-Identifier: Apache-2.0
//
// Experiment runner: convergence traces, MI versus power budget, AN versus
// no-AN, and Monte-Carlo validation of the closed-form MI. Every run is
// seeded independently, so results do not depend on the worker count.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isac/config.hpp"
#include "isac/sca_driver.hpp"

namespace isac {

enum class ExperimentKind { convergence, power_sweep, an_compare, mc_validate };
std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& name);

struct ConvergenceCase {
    double power_dbm = 30.0;
    Index num_users = 3;
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::convergence;
    ScenarioConfig scenario;
    std::vector<ConvergenceCase> cases;       // convergence
    std::vector<double> power_grid_dbm;       // power sweep
    double an_power_dbm = 40.0;               // an-compare
    std::vector<std::uint64_t> seeds;
    bool sweep_with_an = true;                // power sweep: also run the AN design
    int mc_trials = 10000;                    // mc-validate
    int mc_solutions = 5;
    std::string out_dir = "out";
    int jobs = 1;

    void validate() const;
};

/// Defaults for an experiment kind, then overrides from `kv` (experiment
/// keys and scenario keys). Unknown keys raise ConfigError.
ExperimentSpec make_experiment_spec(ExperimentKind kind, KeyValueFile* kv = nullptr,
                                    std::optional<std::uint64_t> seed = std::nullopt);

const std::vector<std::pair<std::string, std::string>>& experiment_key_docs();

struct RunRecord {
    std::string experiment;
    std::string method;
    std::uint64_t seed = 0;
    double power_dbm = 0.0;
    Index num_users = 0;
    std::uint64_t config_hash = 0;
    std::string config_snapshot;
    std::vector<SCATraceRow> rows;
    bool has_solution = false;
    BeamformerSolution solution;
    bool converged = false;
    bool feasible = false;
    double max_penalty = 0.0;
    std::vector<std::string> violations;
    std::string error;
    double duration_s = 0.0;
    // Monte-Carlo validation only.
    double mc_estimate = 0.0;
    double mc_std_error = 0.0;
    double closed_form = 0.0;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    ExperimentSpec spec;
    std::vector<RunRecord> records;
    std::vector<CheckResult> checks;

    bool all_passed() const;
};

ExperimentReport run_convergence(const ExperimentSpec& spec);
ExperimentReport run_power_sweep(const ExperimentSpec& spec);
ExperimentReport run_an_compare(const ExperimentSpec& spec);
ExperimentReport run_mc_validate(const ExperimentSpec& spec);
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Gaussian MI estimate log det(C) - p log sigma^2 from the sample covariance
/// of `n` zero-mean complex observations, with the Wishart bias removed.
struct MIEstimate {
    double value = 0.0;
    double std_error = 0.0;
};
MIEstimate gaussian_mi_estimate(const CMatrix& sample_cov, Index n, double noise_power);

/// Monte-Carlo estimate of I(Y; H | X) for Y = H X + Z with vec(H) ~ CN(0, r_h),
/// H being n_rx x rows(X), and white noise of the given power. Explicit AN is
/// passed as part of X.
MIEstimate monte_carlo_sensing_mi(const CMatrix& r_h, Index n_rx, double noise_power, const CMatrix& x,
                                  int trials, RngState& rng);

/// CSV body with the documented header; deterministic for fixed inputs.
std::string render_csv(const std::vector<ExperimentReport>& reports);
std::string render_json(const std::vector<ExperimentReport>& reports);

/// Writes results.csv, summary.json and gnuplot .dat files to `out_dir`.
/// Rejects an empty report set; I/O errors carry the path.
void emit_report(const std::vector<ExperimentReport>& reports, const std::string& out_dir);

inline constexpr const char* kCsvHeader =
    "experiment,method,seed,P0_dBm,iteration,I_r_nats,I_e_nats,gap_nats,max_penalty,feasible,config_hash";

} // namespace isac
