// SPDX-License-Identifier: Apache-2.0
#include "isac/channel_model.hpp"

#include <cmath>

#include "isac/errors.hpp"

namespace isac {

CVector steering_vector(double theta, Index n)
{
    if (!(theta >= -1e-12 && theta <= kPi + 1e-12))
        throw DomainError("steering_vector: angle outside [0, pi]");
    if (n < 1)
        throw DimensionError("steering_vector: n must be >= 1");
    CVector a(n);
    const double c = std::cos(theta);
    for (Index m = 0; m < n; ++m)
        a(m) = std::polar(1.0, -kPi * static_cast<double>(m) * c);
    return a;
}

UserChannel sample_rician_channel(const ScenarioConfig& cfg, Index user, RngState& rng)
{
    UserChannel ch;
    ch.rician_factor = cfg.rician_for(user);
    ch.aoa = cfg.user_aoa_rad.at(user);
    ch.h_los = steering_vector(ch.aoa, cfg.n_tx);
    CVector nlos(cfg.n_tx);
    for (Index i = 0; i < cfg.n_tx; ++i)
        nlos(i) = rng.complex_normal();
    const double kf = ch.rician_factor;
    if (kf >= kRicianLosOnly) {
        ch.h = ch.h_los;
    } else {
        ch.h = std::sqrt(kf / (kf + 1.0)) * ch.h_los + std::sqrt(1.0 / (kf + 1.0)) * nlos;
    }
    return ch;
}

CommChannel sample_comm_channels(const ScenarioConfig& cfg, RngState& rng)
{
    CommChannel out;
    for (Index k = 0; k < cfg.num_users; ++k)
        out.users.push_back(sample_rician_channel(cfg, k, rng));
    return out;
}

std::string to_string(Receiver r)
{
    return r == Receiver::legitimate ? "legitimate" : "eve";
}

CMatrix SensingStats::reshape_sum(const CMatrix& r) const
{
    if (r.rows() != n_tx || r.cols() != n_tx)
        throw DimensionError("reshape_sum: covariance must be n_tx x n_tx");
    const CMatrix rc = r.conjugate();
    CMatrix acc = CMatrix::Zero(dim(), dim());
    for (const auto& b : blocks)
        acc.noalias() += b * rc * b.adjoint();
    return acc;
}

namespace {

CMatrix point_target_covariance(const std::vector<PointTarget>& targets, Index n_rx, Index n_tx)
{
    const Index d = n_rx * n_tx;
    CMatrix r = CMatrix::Zero(d, d);
    for (const auto& t : targets) {
        const CVector a_rx = steering_vector(t.angle_rad, n_rx);
        const CVector a_tx = steering_vector(t.angle_rad, n_tx);
        const CVector v = vec(a_rx * a_tx.transpose());
        r.noalias() += t.gain * t.gain * v * v.adjoint();
    }
    return r;
}

} // namespace

double absolute_loading(const std::vector<PointTarget>& targets, Index n_rx, Index n_tx, double loading_rel)
{
    const Index d = n_rx * n_tx;
    double tr = 0.0;
    for (const auto& t : targets)
        tr += t.gain * t.gain * static_cast<double>(d);
    return loading_rel * tr / static_cast<double>(d);
}

SensingStats build_sensing_stats(const std::vector<PointTarget>& targets, Index n_rx, Index n_tx,
                                 double loading, double noise_power, Receiver receiver)
{
    if (n_rx < 1 || n_tx < 1)
        throw DimensionError("build_sensing_stats: antenna counts must be >= 1");
    if (loading < 0.0)
        throw DomainError("build_sensing_stats: loading must be >= 0");
    if (targets.empty() && loading == 0.0)
        throw DomainError("build_sensing_stats: need a target or positive loading");
    if (!(noise_power > 0.0))
        throw DomainError("build_sensing_stats: noise power must be positive");

    SensingStats s;
    s.receiver = receiver;
    s.n_rx = n_rx;
    s.n_tx = n_tx;
    s.noise_power = noise_power;
    const Index d = n_rx * n_tx;
    s.covariance = point_target_covariance(targets, n_rx, n_tx) + loading * CMatrix::Identity(d, d);

    HermitianEig eig = hermitian_eig(s.covariance);
    s.eigenvalues = eig.values.cwiseMax(0.0);
    s.eigenvectors = std::move(eig.vectors);

    // (R^* kron I_nrx) = K (I_nrx kron R^*) K^T with K = K_(n_tx, n_rx).
    const RMatrix k = commutation_matrix(n_tx, n_rx);
    const CMatrix p = s.eigenvectors.adjoint() * k.cast<cd>();
    for (Index i = 0; i < n_rx; ++i)
        s.blocks.push_back(p.middleCols(i * n_tx, n_tx));
    return s;
}

SensingStats legitimate_stats(const ScenarioConfig& cfg)
{
    const double delta = absolute_loading(cfg.radar_targets, cfg.n_rx, cfg.n_tx, cfg.loading_rel);
    return build_sensing_stats(cfg.radar_targets, cfg.n_rx, cfg.n_tx, delta, cfg.noise_radar, Receiver::legitimate);
}

SensingStats eve_stats(const ScenarioConfig& cfg)
{
    const double delta = absolute_loading(cfg.eve_targets, cfg.n_eve, cfg.n_tx, cfg.loading_rel);
    return build_sensing_stats(cfg.eve_targets, cfg.n_eve, cfg.n_tx, delta, cfg.noise_eve, Receiver::eve);
}

} // namespace isac
