// SPDX-License-Identifier: Apache-2.0
#include "isac/metrics.hpp"

#include <cmath>

#include "isac/errors.hpp"
#include "isac/kernels.hpp"

namespace isac {

namespace {

double psd_scale(const CMatrix& r)
{
    return std::max(1e-300, r.cwiseAbs().maxCoeff());
}

void check_stats_dims(const SensingStats& stats, const CMatrix& r, const char* what)
{
    if (r.rows() != stats.n_tx || r.cols() != stats.n_tx)
        throw DimensionError(std::string(what) + ": covariance must be n_tx x n_tx");
}

/// Hermitian N = I + c D S D with D = Lambda^(1/2); det(N) = det(I + c Lambda S).
CMatrix normalized_mi_matrix(const SensingStats& stats, const CMatrix& r, Index frame_len)
{
    const double c = static_cast<double>(frame_len) / stats.noise_power;
    const RVector d = stats.eigenvalues.cwiseSqrt();
    CMatrix s = stats.reshape_sum(r);
    CMatrix n = c * (d.asDiagonal() * s * d.asDiagonal());
    n.diagonal().array() += 1.0;
    return hermitian_part(n);
}

} // namespace

void require_psd(const CMatrix& r, const char* what, double rel_tol)
{
    require_hermitian(r, what, 1e-9);
    if (r.size() == 0 || r.isZero(0.0))
        return;
    if (min_eigenvalue(r) < -rel_tol * psd_scale(r))
        throw DomainError(std::string(what) + ": matrix is not PSD");
}

CMatrix transmit_covariance(std::span<const CMatrix> W)
{
    if (W.empty())
        throw DimensionError("transmit_covariance: no beamformers");
    CMatrix r = CMatrix::Zero(W[0].rows(), W[0].cols());
    for (const auto& wk : W) {
        if (wk.rows() != r.rows() || wk.cols() != r.cols())
            throw DimensionError("transmit_covariance: beamformer dimension mismatch");
        r += wk;
    }
    return r;
}

CMatrix transmit_covariance(std::span<const CVector> w)
{
    if (w.empty())
        throw DimensionError("transmit_covariance: no beamformers");
    CMatrix r = CMatrix::Zero(w[0].size(), w[0].size());
    for (const auto& wk : w) {
        if (wk.size() != r.rows())
            throw DimensionError("transmit_covariance: beamformer dimension mismatch");
        r.noalias() += wk * wk.adjoint();
    }
    return r;
}

std::vector<double> sinr(const CommChannel& ch, std::span<const CMatrix> W, double noise,
                         const CMatrix* an_covariance)
{
    const Index k_users = ch.num_users();
    if (static_cast<Index>(W.size()) != k_users)
        throw DimensionError("sinr: need one beamformer per user");
    std::vector<double> out(k_users);
    for (Index k = 0; k < k_users; ++k) {
        const CVector& h = ch.h(k);
        double interference = noise;
        for (Index j = 0; j < k_users; ++j)
            if (j != k)
                interference += (h.adjoint() * W[j] * h).value().real();
        if (an_covariance)
            interference += (h.adjoint() * (*an_covariance) * h).value().real();
        out[k] = (h.adjoint() * W[k] * h).value().real() / interference;
    }
    return out;
}

std::vector<double> sinr(const CommChannel& ch, std::span<const CVector> w, double noise,
                         const CMatrix* an_covariance)
{
    std::vector<CMatrix> W;
    W.reserve(w.size());
    for (const auto& wk : w)
        W.push_back(wk * wk.adjoint());
    return sinr(ch, std::span<const CMatrix>(W), noise, an_covariance);
}

double sensing_mi(const SensingStats& stats, const CMatrix& r_x, Index frame_len)
{
    check_stats_dims(stats, r_x, "sensing_mi");
    require_psd(r_x, "sensing_mi");
    return logdet_psd(normalized_mi_matrix(stats, r_x, frame_len));
}

double sensing_mi_from_waveform(const SensingStats& stats, const CMatrix& x)
{
    if (x.rows() != stats.n_tx)
        throw DimensionError("sensing_mi_from_waveform: waveform must have n_tx rows");
    const CMatrix gram = x.conjugate() * x.transpose();
    const CMatrix a = kron(gram, CMatrix::Identity(stats.n_rx, stats.n_rx));
    // det(I + s R_h A) = det(I + s A^(1/2) R_h A^(1/2)); A is PSD.
    const CMatrix root = psd_sqrt(a);
    CMatrix m = root * stats.covariance * root / stats.noise_power;
    m.diagonal().array() += 1.0;
    return logdet_psd(hermitian_part(m));
}

CMatrix eve_mi_gradient(const SensingStats& stats, const CMatrix& r_x, Index frame_len)
{
    check_stats_dims(stats, r_x, "eve_mi_gradient");
    const double c = static_cast<double>(frame_len) / stats.noise_power;
    const CMatrix n = normalized_mi_matrix(stats, r_x, frame_len);
    Eigen::LLT<CMatrix> llt(n);
    if (llt.info() != Eigen::Success)
        throw NumericalError("eve_mi_gradient: MI matrix is singular");
    // M^-1 Lambda = D N^-1 D, Hermitian.
    const RVector d = stats.eigenvalues.cwiseSqrt();
    const CMatrix inner = d.asDiagonal() * llt.solve(CMatrix(d.asDiagonal())) ;
    CMatrix g = CMatrix::Zero(stats.n_tx, stats.n_tx);
    for (const auto& b : stats.blocks)
        g.noalias() += b.adjoint() * inner * b;
    return hermitian_part(c * g.conjugate());
}

double eve_mi_taylor_bound(const SensingStats& stats, const CMatrix& r_x, const CMatrix& expansion,
                           Index frame_len)
{
    check_stats_dims(stats, r_x, "eve_mi_taylor_bound");
    require_psd(r_x, "eve_mi_taylor_bound");
    const double f0 = sensing_mi(stats, expansion, frame_len);
    const CMatrix g = eve_mi_gradient(stats, expansion, frame_len);
    return f0 + (g * (r_x - expansion)).trace().real();
}

double sensing_mi_with_an(const SensingStats& stats, const CMatrix& r_x, const CMatrix& r_n, Index frame_len)
{
    check_stats_dims(stats, r_n, "sensing_mi_with_an");
    require_psd(r_n, "sensing_mi_with_an");
    require_psd(r_x, "sensing_mi_with_an");
    return logdet_psd(normalized_mi_matrix(stats, r_x + r_n, frame_len));
}

namespace {

void check_channels(const SensingStats& eve, std::span<const CMatrix> channels, const CMatrix& r_n)
{
    if (channels.empty())
        throw DimensionError("Eve AN terms: need at least one channel sample");
    if (r_n.rows() != eve.n_tx || r_n.cols() != eve.n_tx)
        throw DimensionError("Eve AN terms: R_N must be n_tx x n_tx");
    for (const auto& h : channels)
        if (h.rows() != eve.n_rx || h.cols() != eve.n_tx)
            throw DimensionError("Eve AN terms: channel samples must be n_eve x n_tx");
}

} // namespace

double eve_conditional_entropy_samples(const SensingStats& eve, const CMatrix& r_n, Index frame_len,
                                       std::span<const CMatrix> channels)
{
    check_channels(eve, channels, r_n);
    require_psd(r_n, "eve_conditional_entropy_samples");
    // det(sigma^2 I + L (R_N^* kron I) h h^H) via the rank-1 determinant lemma;
    // h^H (R_N^* kron I) h = tr(H^H H R_N). The noise part is counted over the
    // n_eve * L observations so the 2*pi*e constants cancel against the
    // marginal entropy term.
    std::vector<CMatrix> grams;
    grams.reserve(channels.size());
    for (const auto& h : channels)
        grams.push_back(h.adjoint() * h);
    const double l = static_cast<double>(frame_len);
    const double scale = l / eve.noise_power;
    const double noise_part = static_cast<double>(eve.n_rx) * l * std::log(2.0 * kPi * std::exp(1.0) * eve.noise_power);
    return noise_part + kernels::mean_log1p_trace(grams, r_n, scale);
}

CMatrix eve_an_covariance_block(std::span<const CMatrix> channels, const CMatrix& r_n)
{
    if (channels.empty())
        throw DimensionError("eve_an_covariance: need at least one channel sample");
    for (const auto& h : channels)
        if (h.cols() != r_n.rows() || h.rows() != channels[0].rows())
            throw DimensionError("eve_an_covariance: channel/R_N dimension mismatch");
    return hermitian_part(kernels::mean_congruence(channels, r_n));
}

CMatrix eve_an_covariance(std::span<const CMatrix> channels, const CMatrix& r_n, Index frame_len)
{
    if (frame_len < 1)
        throw DimensionError("eve_an_covariance: frame length must be >= 1");
    return kron(CMatrix::Identity(frame_len, frame_len), eve_an_covariance_block(channels, r_n));
}

double eve_mi_an_upper_bound(const SensingStats& eve, const CMatrix& r_n, Index frame_len,
                             std::span<const CMatrix> channels)
{
    check_channels(eve, channels, r_n);
    require_psd(r_n, "eve_mi_an_upper_bound");
    const double l = static_cast<double>(frame_len);
    // Both entropies share the noise-only term; dropping it before the
    // subtraction keeps the bound exactly zero at R_N = 0.
    CMatrix q = eve_an_covariance_block(channels, r_n) / eve.noise_power;
    q.diagonal().array() += 1.0;
    std::vector<CMatrix> grams;
    grams.reserve(channels.size());
    for (const auto& h : channels)
        grams.push_back(h.adjoint() * h);
    return l * logdet_psd(q) - kernels::mean_log1p_trace(grams, r_n, l / eve.noise_power);
}

double rank_one_certificate(const CMatrix& w)
{
    const double tr = w.trace().real();
    if (tr <= 0.0)
        return 1.0;
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(w), Eigen::EigenvaluesOnly);
    return solver.eigenvalues()(w.rows() - 1) / tr;
}

} // namespace isac
