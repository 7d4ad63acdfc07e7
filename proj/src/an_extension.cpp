// SPDX-License-Identifier: Apache-2.0
#include "isac/an_extension.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "isac/errors.hpp"
#include "isac/kernels.hpp"

namespace isac {

namespace {

constexpr double kEveSlack = 1e-3;

CMatrix kron_identity(Index l, const CMatrix& b)
{
    return kron(CMatrix::Identity(l, l), b);
}

} // namespace

ANSampleSet ANSampleSet::from_channels(std::vector<CMatrix> channels, std::uint64_t seed)
{
    if (channels.empty())
        throw DimensionError("ANSampleSet: need at least one sample");
    ANSampleSet s;
    s.seed = seed;
    for (const auto& h : channels) {
        if (h.rows() != channels[0].rows() || h.cols() != channels[0].cols())
            throw DimensionError("ANSampleSet: samples must share one shape");
        s.grams.push_back(h.adjoint() * h);
    }
    s.channels = std::move(channels);
    return s;
}

ANSampleSet sample_an_channels(const SensingStats& eve, int count, RngState& rng)
{
    if (count < 1)
        throw DomainError("sample_an_channels: need at least one sample");
    const CMatrix zero = CMatrix::Zero(eve.dim(), 1);
    std::vector<CMatrix> hs;
    hs.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        const CMatrix v = sample_complex_gaussian(rng, zero, eve.covariance);
        hs.push_back(unvec(v.col(0), eve.n_rx, eve.n_tx));
    }
    return ANSampleSet::from_channels(std::move(hs), rng.seed());
}

CMatrix an_expansion_point(const SCAState& state, const SensingStats& eve, const ANSampleSet& samples,
                           const ScenarioConfig& cfg, bool collapse_lmi)
{
    const Index ne = eve.n_rx;
    const Index dim = collapse_lmi ? ne : ne * cfg.an_frame_len;
    auto from_r_n = [&]() {
        CMatrix block = CMatrix::Identity(ne, ne);
        if (state.r_n_tilde)
            block += eve_an_covariance_block(samples.channels, *state.r_n_tilde) / eve.noise_power;
        return collapse_lmi ? block : kron_identity(cfg.an_frame_len, block);
    };
    if (!state.q_tilde)
        return from_r_n();
    const CMatrix& q = *state.q_tilde;
    if (q.rows() != dim || q.cols() != dim)
        throw DimensionError("AN subproblem: Q~ has the wrong dimension");
    Eigen::LLT<CMatrix> llt(hermitian_part(q));
    if (llt.info() == Eigen::Success && min_eigenvalue(q) > 0.0)
        return hermitian_part(q);
    CMatrix reset = from_r_n();
    reset.diagonal().array() += 1e-9;
    return reset;
}

conic::ConicSubproblem build_subproblem_an(const SCAState& state, const CommChannel& ch, const SensingStats& radar,
                                           const SensingStats& eve, const ANSampleSet& samples,
                                           const ScenarioConfig& cfg, SubproblemLayout* layout, AnOptions opts)
{
    cfg.validate();
    if (samples.size() < 1)
        throw DimensionError("AN subproblem: empty sample set");
    if (samples.channels[0].rows() != eve.n_rx || samples.channels[0].cols() != cfg.n_tx)
        throw DimensionError("AN subproblem: Eve samples must be n_eve x n_tx");

    const Index ne = eve.n_rx;
    const Index l = cfg.an_frame_len;
    const double p0 = cfg.power_budget_w;
    const double s2 = eve.noise_power;

    conic::ConicSubproblem p;
    SubproblemLayout lay = declare_beamformer_blocks(p, cfg, opts.with_r_n);
    const Index qdim = opts.collapse_lmi ? ne : ne * l;
    lay.q = p.add_hermitian("Q", qdim);
    add_beamformer_core(p, lay, state, ch, radar, cfg, l);

    // Q >= I + (P0 / sigma_e^2) R_HN(R'_N), in units of sigma_e^2.
    conic::HermitianMap aux;
    aux.name = "aux_q";
    aux.constant = -CMatrix::Identity(qdim, qdim);
    aux.add_term(*lay.q, aux.add_operator(p.make_operator(*lay.q, [](const CMatrix& v) { return v; })));
    if (lay.r_n) {
        aux.add_term(*lay.r_n, aux.add_operator(p.make_operator(*lay.r_n, [&](const CMatrix& v) {
            const CMatrix block = kernels::mean_congruence(samples.channels, v) * (p0 / s2);
            return opts.collapse_lmi ? block : kron_identity(l, block);
        })), -1.0);
    }
    p.lmis.push_back(std::move(aux));

    // Linearised marginal term minus the sampled conditional term <= eps.
    const CMatrix qt = an_expansion_point(state, eve, samples, cfg, opts.collapse_lmi);
    const CMatrix qt_inv = qt.inverse();
    const double mult = opts.collapse_lmi ? static_cast<double>(l) : 1.0;
    conic::ConcaveInequality eve_c;
    eve_c.name = "eve_an";
    eve_c.coeffs = -mult * p.linear_functional(*lay.q, [&](const CMatrix& v) { return (qt_inv * v).trace().real(); });
    eve_c.constant = cfg.eve_mi_cap - mult * (logdet_psd(qt) - static_cast<double>(qdim));
    if (lay.r_n) {
        const double scale = static_cast<double>(l) * p0 / s2;
        const double weight = 1.0 / static_cast<double>(samples.size());
        for (const auto& g : samples.grams) {
            conic::LogTerm t;
            t.weight = weight;
            t.coeffs = p.linear_functional(*lay.r_n, [&](const CMatrix& v) { return scale * (g * v).trace().real(); });
            t.constant = 1.0;
            eve_c.logs.push_back(std::move(t));
        }
    }
    p.concave.push_back(std::move(eve_c));

    p.validate();
    if (layout)
        *layout = lay;
    return p;
}

std::optional<RVector> warm_start_an(const conic::ConicSubproblem& p, const SubproblemLayout& lay,
                                     const SCAState& state, const SensingStats& eve, const ANSampleSet& samples,
                                     const ScenarioConfig& cfg)
{
    std::optional<RVector> x = warm_start(p, lay, state, cfg);
    if (!x || !lay.q)
        return x;
    const Index ne = eve.n_rx;
    const bool collapse = p.block(*lay.q).dim == ne;
    CMatrix block = CMatrix::Identity(ne, ne);
    if (lay.r_n) {
        const CMatrix rn = p.hermitian_value(*x, *lay.r_n) * cfg.power_budget_w;
        block += eve_an_covariance_block(samples.channels, rn) / eve.noise_power;
    }
    block.diagonal().array() += 1e-4;
    p.set_hermitian(*x, *lay.q, collapse ? block : kron_identity(cfg.an_frame_len, block));
    return x;
}

SCAResult run_sca_an(const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                     const ANSampleSet& samples, const ScenarioConfig& cfg, RngState& rng)
{
    cfg.validate();
    const double p0 = cfg.power_budget_w;
    const Index L = cfg.an_frame_len;
    const conic::SolverOptions sopts = solver_options(cfg);
    AnOptions aopts;
    aopts.collapse_lmi = cfg.an_collapse_lmi;

    SCAState state;
    state.penalty_weight = cfg.penalty_init;
    state.set_expansion(random_beamformers(cfg, rng));
    state.r_n_tilde = CMatrix::Zero(cfg.n_tx, cfg.n_tx);
    bool rerandomised = false;
    std::optional<CMatrix> r_n;

    auto step = [&](SCATraceRow& row) -> bool {
        SubproblemLayout lay;
        const conic::ConicSubproblem p = build_subproblem_an(state, ch, radar, eve, samples, cfg, &lay, aopts);
        const auto start = warm_start_an(p, lay, state, eve, samples, cfg);
        const conic::SolverResult r = conic::solve(p, sopts, start ? &*start : nullptr);
        if (r.status == conic::SolverStatus::infeasible_detected) {
            if (state.iteration == 0 && !rerandomised) {
                rerandomised = true;
                state.set_expansion(random_beamformers(cfg, rng));
                return false;
            }
            std::ostringstream os;
            os << "AN design: subproblem infeasible at outer iteration " << state.iteration << " (phase-I slack "
               << r.feasibility_residual << "); the SINR targets may be unreachable within the power budget";
            throw InfeasibleError(os.str());
        }
        std::vector<CMatrix> W;
        std::vector<CVector> w;
        double max_pen = 0.0;
        for (std::size_t k = 0; k < lay.W.size(); ++k) {
            W.push_back(p0 * p.hermitian_value(r.x, lay.W[k]));
            w.push_back(std::sqrt(p0) * p.vector_value(r.x, lay.w[k]));
            max_pen = std::max(max_pen, p.scalar_value(r.x, lay.rho[k]));
        }
        const CMatrix rn = hermitian_part(p0 * p.hermitian_value(r.x, *lay.r_n));
        const CMatrix rx = transmit_covariance(std::span<const CMatrix>(W));
        row.iteration = state.iteration;
        row.radar_mi = sensing_mi_with_an(radar, rx, rn, L);
        row.eve_mi = sensing_mi(eve, rx, L);
        row.eve_surrogate = eve_mi_an_upper_bound(eve, rn, L, samples.channels);
        row.max_penalty = max_pen;
        row.penalty_weight = state.penalty_weight;
        row.power = rx.trace().real() + rn.trace().real();
        row.newton_steps = r.iterations;
        row.solver_status = conic::to_string(r.status);

        state.w_tilde = std::move(w);
        state.W_tilde = std::move(W);
        state.r_x_tilde = rx;
        state.r_n_tilde = rn;
        state.q_tilde.reset(); // rebuilt from R~_N
        state.rho.clear();
        state.radar_mi = row.radar_mi;
        ++state.iteration;
        state.penalty_weight *= cfg.penalty_growth;
        r_n = rn;
        return true;
    };

    SCAResult res;
    double prev_mi = std::numeric_limits<double>::quiet_NaN();
    while (state.iteration < cfg.max_outer_iters) {
        SCATraceRow row;
        if (!step(row))
            continue;
        res.trace.rows.push_back(row);
        const bool flat = std::isfinite(prev_mi) && std::abs(row.radar_mi - prev_mi) <= cfg.tol_obj;
        prev_mi = row.radar_mi;
        if (flat && row.max_penalty <= cfg.tol_pen) {
            res.trace.converged = true;
            res.trace.termination = "converged";
            break;
        }
    }
    if (!res.trace.converged)
        res.trace.termination = "max-outer-iterations";

    auto finish = [&]() {
        std::vector<CVector> w =
            extract_beamformers(state.W_tilde, ch, radar, cfg, L, &*r_n, {}, rng);
        BeamformerSolution s = evaluate_solution(std::move(w), state.W_tilde, r_n, ch, radar, eve, cfg, L);
        s.eve_mi_bound = eve_mi_an_upper_bound(eve, *r_n, L, samples.channels);
        return s;
    };
    res.solution = finish();
    if (*res.solution.eve_mi_bound > cfg.eve_mi_cap + kEveSlack) {
        SCATraceRow row;
        if (step(row)) {
            res.trace.rows.push_back(row);
            res.solution = finish();
        }
    }

    res.violations = check_common_feasibility(res.solution, cfg);
    if (*res.solution.eve_mi_bound > cfg.eve_mi_cap + kEveSlack) {
        std::ostringstream os;
        os.precision(10);
        os << "Eve MI bound " << *res.solution.eve_mi_bound << " nats above cap " << cfg.eve_mi_cap;
        res.violations.push_back(os.str());
    }
    if (min_eigenvalue(*res.solution.an_covariance) < -1e-9 * std::max(1.0, res.solution.an_covariance->trace().real()))
        res.violations.push_back("AN covariance is not PSD");
    res.feasible = res.violations.empty();
    return res;
}

} // namespace isac
