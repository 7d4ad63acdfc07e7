// SPDX-License-Identifier: Apache-2.0
//
// Closed-form performance expressions: SINR, sensing mutual information of
// the legitimate receiver and the Eve (with and without artificial noise),
// the gradient of the Eve MI and its affine upper bound.
//
// All MI values are in nats. Covariances are in watts.
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "isac/channel_model.hpp"
#include "isac/core_math.hpp"

namespace isac {

struct BeamformerSolution {
    std::vector<CVector> w;             // per-user beamformers, length n_tx
    std::vector<CMatrix> W;             // per-user covariances (solver output)
    std::optional<CMatrix> an_covariance;
    double radar_mi = 0.0;              // I_r
    double eve_mi = 0.0;                // true I_e (no-AN formula at R_X)
    std::optional<double> eve_mi_bound; // AN surrogate I_e bar
    std::vector<double> sinr;           // linear
    double power = 0.0;                 // watts
    std::vector<double> rank_one_certificate;

    Index num_users() const { return static_cast<Index>(w.size()); }
    /// I_r minus the Eve figure used for the design (bound when AN is active).
    double gap() const { return radar_mi - eve_mi_bound.value_or(eve_mi); }
};

struct MIReport {
    double radar_mi = 0.0;
    double eve_mi = 0.0;
    double eve_taylor_bound = 0.0;
    std::optional<double> eve_an_bound;
    double gap() const { return radar_mi - eve_an_bound.value_or(eve_mi); }
};

CMatrix transmit_covariance(std::span<const CMatrix> W);
CMatrix transmit_covariance(std::span<const CVector> w);

/// Per-user SINR; the optional AN covariance leaks h_k^H R_N h_k into every
/// user's interference.
std::vector<double> sinr(const CommChannel& ch, std::span<const CMatrix> W, double noise,
                         const CMatrix* an_covariance = nullptr);
std::vector<double> sinr(const CommChannel& ch, std::span<const CVector> w, double noise,
                         const CMatrix* an_covariance = nullptr);

/// log det(I + sigma^-2 L Lambda sum_i B_i R_X^* B_i^H).
double sensing_mi(const SensingStats& stats, const CMatrix& r_x, Index frame_len);

/// Unreduced form log det(I + sigma^-2 R_h ((X^* X^T) kron I)), used as an
/// independent route in tests and by the Monte-Carlo validator.
double sensing_mi_from_waveform(const SensingStats& stats, const CMatrix& x);

/// Gradient G of f(R) = sensing_mi(stats, R, L) such that the directional
/// derivative along a Hermitian D is tr(G D). G is Hermitian.
CMatrix eve_mi_gradient(const SensingStats& stats, const CMatrix& r_x, Index frame_len);

/// Affine upper bound f(R~) + tr(G(R~) (R - R~)) of the concave Eve MI.
double eve_mi_taylor_bound(const SensingStats& stats, const CMatrix& r_x, const CMatrix& expansion,
                           Index frame_len);

double sensing_mi_with_an(const SensingStats& stats, const CMatrix& r_x, const CMatrix& r_n, Index frame_len);

/// Sampled conditional entropy h(Y_e | H_e, X) in nats. `channels` holds the
/// Eve channel samples H_{e,j} (n_eve x n_tx).
double eve_conditional_entropy_samples(const SensingStats& eve, const CMatrix& r_n, Index frame_len,
                                       std::span<const CMatrix> channels);

/// (1/J) sum_j H_j R_N H_j^H, the block repeated along the diagonal of R_HN.
CMatrix eve_an_covariance_block(std::span<const CMatrix> channels, const CMatrix& r_n);

/// R_HN = I_L kron block, dimension n_eve * L.
CMatrix eve_an_covariance(std::span<const CMatrix> channels, const CMatrix& r_n, Index frame_len);

/// Gaussian marginal-entropy bound minus the sampled conditional entropy.
double eve_mi_an_upper_bound(const SensingStats& eve, const CMatrix& r_n, Index frame_len,
                             std::span<const CMatrix> channels);

/// lambda_max(W) / trace(W); 1 for the zero matrix.
double rank_one_certificate(const CMatrix& w);

/// Throws DomainError unless `r` is Hermitian PSD (relative tolerance).
void require_psd(const CMatrix& r, const char* what, double rel_tol = 1e-9);

} // namespace isac
