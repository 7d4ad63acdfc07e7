// SPDX-License-Identifier: Apache-2.0
//
// Artificial-noise aided design: joint beamformers and AN covariance R_N
// maximising the AN-aware radar MI under a sampled Gaussian bound on the Eve
// MI, convexified with an auxiliary matrix Q >= sigma_e^2 I + R_HN(R_N).
#pragma once

#include <vector>

#include "isac/sca_driver.hpp"

namespace isac {

/// Fixed Eve channel samples H_{e,j} (n_eve x n_tx), shared by all SCA
/// iterations of one run.
struct ANSampleSet {
    std::vector<CMatrix> channels;
    std::vector<CMatrix> grams; // H_j^H H_j
    std::uint64_t seed = 0;

    Index size() const { return static_cast<Index>(channels.size()); }

    static ANSampleSet from_channels(std::vector<CMatrix> channels, std::uint64_t seed = 0);
};

/// Draws J samples of vec(H_e) ~ CN(0, R_he).
ANSampleSet sample_an_channels(const SensingStats& eve, int count, RngState& rng);

struct AnOptions {
    bool with_r_n = true;   // false builds the same problem without the R_N block
    bool collapse_lmi = true;
};

/// AN expansion point Q~ = I + R_HN-block(R~_N) / sigma_e^2 (normalised);
/// falls back to that value plus 1e-9 I when a supplied Q~ is not PD.
CMatrix an_expansion_point(const SCAState& state, const SensingStats& eve, const ANSampleSet& samples,
                           const ScenarioConfig& cfg, bool collapse_lmi);

conic::ConicSubproblem build_subproblem_an(const SCAState& state, const CommChannel& ch, const SensingStats& radar,
                                           const SensingStats& eve, const ANSampleSet& samples,
                                           const ScenarioConfig& cfg, SubproblemLayout* layout = nullptr,
                                           AnOptions opts = {});

/// Feasible start for build_subproblem_an (extends warm_start with Q).
std::optional<RVector> warm_start_an(const conic::ConicSubproblem& p, const SubproblemLayout& lay,
                                     const SCAState& state, const SensingStats& eve, const ANSampleSet& samples,
                                     const ScenarioConfig& cfg);

SCAResult run_sca_an(const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                     const ANSampleSet& samples, const ScenarioConfig& cfg, RngState& rng);

} // namespace isac
