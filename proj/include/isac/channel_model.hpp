// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "isac/config.hpp"
#include "isac/core_math.hpp"

namespace isac {

/// Half-wavelength ULA response: entry m is exp(-j*pi*m*cos(theta)).
CVector steering_vector(double theta, Index n);

/// Rician factors at or above this value are treated as pure line of sight.
inline constexpr double kRicianLosOnly = 1e12;

struct UserChannel {
    CVector h;
    CVector h_los;
    double rician_factor = 0.0;
    double aoa = 0.0;
};

/// The K downlink channels of one slow-fading block.
struct CommChannel {
    std::vector<UserChannel> users;

    Index num_users() const { return static_cast<Index>(users.size()); }
    const CVector& h(Index k) const { return users.at(k).h; }
};

UserChannel sample_rician_channel(const ScenarioConfig& cfg, Index user, RngState& rng);
CommChannel sample_comm_channels(const ScenarioConfig& cfg, RngState& rng);

enum class Receiver { legitimate, eve };
std::string to_string(Receiver r);

/// Second-order statistics of a sensing receiver's target response
/// h = vec(H), H being n_rx x n_tx.
struct SensingStats {
    Receiver receiver = Receiver::legitimate;
    Index n_rx = 0;
    Index n_tx = 0;
    double noise_power = 1.0;
    CMatrix covariance;          // R_h, (n_rx*n_tx) square
    RVector eigenvalues;         // descending, clamped at zero
    CMatrix eigenvectors;        // U
    std::vector<CMatrix> blocks; // column blocks of U^H K, each (n_rx*n_tx) x n_tx

    Index dim() const { return n_rx * n_tx; }

    /// sum_i B_i R^* B_i^H.
    CMatrix reshape_sum(const CMatrix& r) const;
};

SensingStats build_sensing_stats(const std::vector<PointTarget>& targets, Index n_rx, Index n_tx,
                                 double loading, double noise_power, Receiver receiver);

/// Absolute loading for the configured relative loading of a target set.
double absolute_loading(const std::vector<PointTarget>& targets, Index n_rx, Index n_tx, double loading_rel);

SensingStats legitimate_stats(const ScenarioConfig& cfg);
SensingStats eve_stats(const ScenarioConfig& cfg);

} // namespace isac
