// SPDX-License-Identifier: Apache-2.0
//
// Reference multi-user broadcast beamformer: SINR-constrained transmit power
// minimisation by semidefinite relaxation, rank-one extraction, then a common
// scaling up to the full power budget. It ignores sensing entirely.
#pragma once

#include "isac/channel_model.hpp"
#include "isac/config.hpp"
#include "isac/metrics.hpp"

namespace isac {

struct BaselineSolution {
    std::vector<CVector> w;        // after full-power scaling
    double min_power = 0.0;        // watts, relaxed optimum
    double used_power = 0.0;       // watts, after scaling
    std::vector<double> sinr;      // after scaling
    std::vector<double> sinr_unscaled;
    BeamformerSolution solution;   // metrics at the scaled beamformers
};

/// Solves the relaxation and returns the minimum-power covariances (watts).
std::vector<CMatrix> min_power_covariances(const CommChannel& ch, const ScenarioConfig& cfg);

BaselineSolution solve_baseline(const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                                const ScenarioConfig& cfg, RngState& rng);

} // namespace isac
