// SPDX-License-Identifier: Apache-2.0
//
// Penalty successive convex approximation for the secure-sensing design
// without artificial noise, plus the pieces shared with the AN design:
// beamformer variable blocks, the rank-one tie, rank-one extraction and
// per-user power repair.
//
// Internally the subproblems are posed in normalised units (covariances
// divided by P0, Eve MI in nats) so the barrier method sees O(1) numbers.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isac/channel_model.hpp"
#include "isac/config.hpp"
#include "isac/conic_solver.hpp"
#include "isac/metrics.hpp"

namespace isac {

struct SCATraceRow {
    int iteration = 0;
    double radar_mi = 0.0;      // I_r of the relaxed iterate
    double eve_mi = 0.0;        // true I_e (no-AN formula at R_X)
    double eve_surrogate = 0.0; // Taylor bound (no AN) or I_e bar (AN)
    double max_penalty = 0.0;   // max(rho_k, kappa), rho in units of P0
    double penalty_weight = 0.0;
    double power = 0.0;         // watts
    int newton_steps = 0;
    std::string solver_status;
};

struct SCATrace {
    std::vector<SCATraceRow> rows;
    bool converged = false;
    std::string termination;
};

struct SCAState {
    int iteration = 0;
    std::vector<CVector> w_tilde; // watts^(1/2)
    std::vector<CMatrix> W_tilde; // watts
    CMatrix r_x_tilde;
    std::optional<CMatrix> r_n_tilde;
    std::optional<CMatrix> q_tilde; // AN auxiliary expansion point, units of sigma_e^2
    double penalty_weight = 0.0;
    std::vector<double> rho;
    double kappa = 0.0;
    double radar_mi = 0.0;
    SCATrace trace;

    /// Sets w~ and W~ = w~ w~^H (and R~_X).
    void set_expansion(std::vector<CVector> w);
};

/// Random start: w_k ~ CN(0, P0/(K N_t) I), scaled back into the power ball.
std::vector<CVector> random_beamformers(const ScenarioConfig& cfg, RngState& rng);

struct SCAResult {
    BeamformerSolution solution;
    SCATrace trace;
    bool feasible = false;           // re-verified with the metrics module
    std::vector<std::string> violations;
};

/// Variable positions of one penalty-SCA subproblem.
struct SubproblemLayout {
    std::vector<Index> W;
    std::vector<Index> w;
    std::vector<Index> rho;
    std::optional<Index> kappa;
    std::optional<Index> r_n;
    std::optional<Index> q;
};

struct NoAnOptions {
    bool eve_constraint = true; // false drops the Eve MI constraint and kappa
};

/// Declares W_k, w_k, rho_k (and R_N when `with_an`). Every variable block
/// must exist before constraints are added.
SubproblemLayout declare_beamformer_blocks(conic::ConicSubproblem& p, const ScenarioConfig& cfg, bool with_an);

/// Schur LMIs, linearised rank ties, SINR and power constraints, and the
/// radar MI objective on R_X (+ R_N when the layout has it). Shared by both
/// designs.
void add_beamformer_core(conic::ConicSubproblem& p, const SubproblemLayout& lay, const SCAState& state,
                         const CommChannel& ch, const SensingStats& radar, const ScenarioConfig& cfg,
                         Index frame_len);

conic::ConicSubproblem build_subproblem_no_an(const SCAState& state, const CommChannel& ch, const SensingStats& radar,
                                              const SensingStats& eve, const ScenarioConfig& cfg,
                                              SubproblemLayout* layout = nullptr, NoAnOptions opts = {});

/// Feasible start for a subproblem from the previous solution (penalty slacks
/// raised above their constraint values); nullopt when none is known.
std::optional<RVector> warm_start(const conic::ConicSubproblem& p, const SubproblemLayout& layout,
                                  const SCAState& state, const ScenarioConfig& cfg);

conic::SolverOptions solver_options(const ScenarioConfig& cfg);

/// Per-user power repair: raises powers along fixed unit directions until
/// every SINR meets its threshold (monotone fixed point). Returns false if
/// the budget would be exceeded or the iteration diverges.
bool repair_powers(const CommChannel& ch, std::vector<CVector>& w, const ScenarioConfig& cfg,
                   const CMatrix* an_covariance = nullptr);

/// Rank-one extraction of the solver covariances (principal eigenvector when
/// the certificate is at least 0.999, Gaussian randomisation otherwise),
/// followed by the power repair. `eve_ok` screens randomisation candidates.
std::vector<CVector> extract_beamformers(const std::vector<CMatrix>& W, const CommChannel& ch,
                                         const SensingStats& radar, const ScenarioConfig& cfg, Index frame_len,
                                         const CMatrix* an_covariance,
                                         const std::function<bool(const CMatrix&)>& eve_ok, RngState& rng);

/// Recomputes every metric of a solution from its beamformers.
BeamformerSolution evaluate_solution(std::vector<CVector> w, std::vector<CMatrix> W, std::optional<CMatrix> r_n,
                                     const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                                     const ScenarioConfig& cfg, Index frame_len);

/// Feasibility checks shared by the drivers and the harness (power, SINR,
/// rank-one certificate; the Eve cap is checked by the caller).
std::vector<std::string> check_common_feasibility(const BeamformerSolution& s, const ScenarioConfig& cfg);

SCAResult run_sca_no_an(const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                        const ScenarioConfig& cfg, RngState& rng);

} // namespace isac
