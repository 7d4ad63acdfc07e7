// SPDX-License-Identifier: Apache-2.0
#include "isac/sca_driver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "isac/errors.hpp"

namespace isac {

namespace {

// Relative back-off on the SINR thresholds inside the subproblems so that the
// rank-one extraction keeps every user above its target.
constexpr double kSinrBackoff = 1e-5;
constexpr double kCertificateThreshold = 0.999;
constexpr double kEveSlack = 1e-3;

CMatrix sqrt_eigen_diag(const SensingStats& s)
{
    RVector d = s.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    return d.cast<cd>().asDiagonal();
}

CMatrix schur_block(const CMatrix& v, bool is_vector, Index n)
{
    CMatrix out = CMatrix::Zero(n + 1, n + 1);
    if (is_vector) {
        out.block(0, n, n, 1) = v;
        out.block(n, 0, 1, n) = v.adjoint();
    } else {
        out.topLeftCorner(n, n) = v;
    }
    return out;
}

double real_trace(const CMatrix& a) { return a.trace().real(); }

} // namespace

void SCAState::set_expansion(std::vector<CVector> w)
{
    w_tilde = std::move(w);
    W_tilde.clear();
    for (const auto& v : w_tilde)
        W_tilde.push_back(v * v.adjoint());
    r_x_tilde = transmit_covariance(std::span<const CMatrix>(W_tilde));
}

std::vector<CVector> random_beamformers(const ScenarioConfig& cfg, RngState& rng)
{
    const double p0 = cfg.power_budget_w;
    const double var = p0 / static_cast<double>(cfg.num_users * cfg.n_tx);
    std::vector<CVector> w(cfg.num_users, CVector(cfg.n_tx));
    double total = 0.0;
    for (auto& v : w) {
        for (Index i = 0; i < v.size(); ++i)
            v(i) = rng.complex_normal(var);
        total += v.squaredNorm();
    }
    if (total > p0) {
        const double s = std::sqrt(p0 / total);
        for (auto& v : w)
            v *= s;
    }
    return w;
}

conic::SolverOptions solver_options(const ScenarioConfig& cfg)
{
    conic::SolverOptions o;
    o.feas_tol = cfg.solver_feas_tol;
    o.obj_tol = cfg.solver_obj_tol;
    o.max_newton = cfg.solver_max_newton;
    return o;
}

SubproblemLayout declare_beamformer_blocks(conic::ConicSubproblem& p, const ScenarioConfig& cfg, bool with_an)
{
    SubproblemLayout lay;
    for (Index k = 0; k < cfg.num_users; ++k) {
        const std::string id = std::to_string(k);
        lay.W.push_back(p.add_hermitian("W" + id, cfg.n_tx));
        lay.w.push_back(p.add_vector("w" + id, cfg.n_tx));
        lay.rho.push_back(p.add_scalar("rho" + id));
    }
    if (with_an)
        lay.r_n = p.add_hermitian("R_N", cfg.n_tx);
    return lay;
}

void add_beamformer_core(conic::ConicSubproblem& p, const SubproblemLayout& lay, const SCAState& state,
                         const CommChannel& ch, const SensingStats& radar, const ScenarioConfig& cfg,
                         Index frame_len)
{
    const Index n = cfg.n_tx;
    const Index users = cfg.num_users;
    const double p0 = cfg.power_budget_w;
    if (ch.num_users() != users)
        throw DimensionError("subproblem: channel count does not match the number of users");
    if (static_cast<Index>(state.w_tilde.size()) != users || static_cast<Index>(state.W_tilde.size()) != users)
        throw DimensionError("subproblem: expansion point has the wrong number of users");
    for (Index k = 0; k < users; ++k) {
        if (state.w_tilde[k].size() != n || state.W_tilde[k].rows() != n || state.W_tilde[k].cols() != n)
            throw DimensionError("subproblem: expansion point dimension mismatch");
    }
    if (radar.n_tx != n)
        throw DimensionError("subproblem: radar statistics do not match n_tx");

    // Radar MI: log det(I + (L/sigma^2) D (sum_i B_i R^* B_i^H) D), R = P0 (sum W'_k + R'_N).
    const CMatrix d = sqrt_eigen_diag(radar);
    const double c = static_cast<double>(frame_len) * p0 / radar.noise_power;
    conic::LogdetTerm obj;
    obj.map.name = "radar_mi";
    obj.map.constant = CMatrix::Identity(radar.dim(), radar.dim());
    const Index op = obj.map.add_operator(
        p.make_operator(lay.W[0], [&](const CMatrix& v) { return CMatrix(c * d * radar.reshape_sum(v) * d); }));
    for (Index k = 0; k < users; ++k)
        obj.map.add_term(lay.W[k], op);
    if (lay.r_n)
        obj.map.add_term(*lay.r_n, op);
    p.logdet_objective.push_back(std::move(obj));

    RVector power = p.zeros();
    for (Index k = 0; k < users; ++k) {
        const std::string id = std::to_string(k);
        const Index wb = lay.W[k];
        const Index vb = lay.w[k];
        const Index rb = lay.rho[k];

        // Schur complement [[W, w], [w^H, 1]] >= 0.
        conic::HermitianMap schur;
        schur.name = "schur" + id;
        schur.constant = CMatrix::Zero(n + 1, n + 1);
        schur.constant(n, n) = 1.0;
        schur.add_term(wb, schur.add_operator(p.make_operator(wb, [&](const CMatrix& v) { return schur_block(v, false, n); })));
        schur.add_term(vb, schur.add_operator(p.make_operator(vb, [&](const CMatrix& v) { return schur_block(v, true, n); })));
        p.lmis.push_back(std::move(schur));

        // Linearised rank tie: tr(W) - 2 Re(w~^H w) + |w~|^2 <= rho.
        const CVector wt = state.w_tilde[k] / std::sqrt(p0);
        RVector tie = -p.linear_functional(wb, real_trace);
        tie += p.linear_functional(vb, [&](const CMatrix& v) { return 2.0 * (wt.adjoint() * v)(0, 0).real(); });
        tie(p.block(rb).offset) = 1.0;
        p.affine.push_back({"rank_tie" + id, tie, -wt.squaredNorm()});

        RVector rho = p.zeros();
        rho(p.block(rb).offset) = 1.0;
        p.affine.push_back({"rho_nonneg" + id, rho, 0.0});
        p.affine.push_back({"rho_cap" + id, -rho, cfg.rho_cap});
        p.linear_objective(p.block(rb).offset) = -state.penalty_weight;

        // SINR: h^H W_k h - g sum_{j != k} h^H W_j h (- g h^H R_N h) >= g sigma^2 / P0.
        const CVector& h = ch.h(k);
        const double g = cfg.sinr_for(k) * (1.0 + kSinrBackoff);
        auto quad = [&](const CMatrix& v) { return (h.adjoint() * v * h)(0, 0).real(); };
        RVector sinr_row = p.zeros();
        for (Index j = 0; j < users; ++j)
            sinr_row += (j == k ? 1.0 : -g) * p.linear_functional(lay.W[j], quad);
        if (lay.r_n)
            sinr_row -= g * p.linear_functional(*lay.r_n, quad);
        p.affine.push_back({"sinr" + id, sinr_row, -g * cfg.noise_comm / p0});

        power -= p.linear_functional(wb, real_trace);
    }
    if (lay.r_n) {
        power -= p.linear_functional(*lay.r_n, real_trace);
        conic::HermitianMap psd;
        psd.name = "R_N_psd";
        psd.constant = CMatrix::Zero(n, n);
        psd.add_term(*lay.r_n, psd.add_operator(p.make_operator(*lay.r_n, [](const CMatrix& v) { return v; })));
        p.lmis.push_back(std::move(psd));
    }
    p.affine.push_back({"power", power, 1.0});
}

conic::ConicSubproblem build_subproblem_no_an(const SCAState& state, const CommChannel& ch, const SensingStats& radar,
                                              const SensingStats& eve, const ScenarioConfig& cfg,
                                              SubproblemLayout* layout, NoAnOptions opts)
{
    cfg.validate();
    if (eve.n_tx != cfg.n_tx)
        throw DimensionError("subproblem: Eve statistics do not match n_tx");
    conic::ConicSubproblem p;
    SubproblemLayout lay = declare_beamformer_blocks(p, cfg, false);
    if (opts.eve_constraint)
        lay.kappa = p.add_scalar("kappa");
    add_beamformer_core(p, lay, state, ch, radar, cfg, cfg.frame_len);

    if (lay.kappa) {
        const double p0 = cfg.power_budget_w;
        const Index kap = p.block(*lay.kappa).offset;
        p.linear_objective(kap) = -state.penalty_weight;

        // Taylor bound f(R~) + tr(G (R - R~)) <= eps + kappa.
        const CMatrix grad = eve_mi_gradient(eve, state.r_x_tilde, cfg.frame_len);
        const double f0 = sensing_mi(eve, state.r_x_tilde, cfg.frame_len);
        const double offset = (grad * state.r_x_tilde).trace().real();
        RVector row = p.zeros();
        for (Index wb : lay.W)
            row -= p.linear_functional(wb, [&](const CMatrix& v) { return p0 * (grad * v).trace().real(); });
        row(kap) = 1.0;
        p.affine.push_back({"eve_mi", row, cfg.eve_mi_cap - f0 + offset});

        RVector k = p.zeros();
        k(kap) = 1.0;
        p.affine.push_back({"kappa_nonneg", k, 0.0});
        p.affine.push_back({"kappa_cap", -k, cfg.kappa_cap});
    }
    p.validate();
    if (layout)
        *layout = lay;
    return p;
}

std::optional<RVector> warm_start(const conic::ConicSubproblem& p, const SubproblemLayout& lay, const SCAState& state,
                                  const ScenarioConfig& cfg)
{
    const double p0 = cfg.power_budget_w;
    const Index n = cfg.n_tx;
    RVector x = p.zeros();
    const double loading = state.iteration == 0 ? 1e-6 : 0.0;
    for (std::size_t k = 0; k < lay.W.size(); ++k) {
        p.set_hermitian(x, lay.W[k], state.W_tilde[k] / p0 + loading * CMatrix::Identity(n, n));
        p.set_vector(x, lay.w[k], state.w_tilde[k] / std::sqrt(p0));
    }
    if (lay.r_n) {
        const CMatrix rn = state.r_n_tilde ? CMatrix(*state.r_n_tilde / p0) : CMatrix::Zero(n, n);
        p.set_hermitian(x, *lay.r_n, rn + (state.r_n_tilde ? loading : 1e-6) * CMatrix::Identity(n, n));
    }
    // Raise the penalty slacks just above the constraints they relax.
    constexpr double kMargin = 1e-3;
    auto lift = [&](const std::string& name, Index block) {
        for (const auto& a : p.affine) {
            if (a.name != name)
                continue;
            const double v = a.coeffs.dot(x) + a.constant;
            const Index off = p.block(block).offset;
            x(off) = std::max(x(off), 0.0) + std::max(0.0, kMargin - v);
        }
    };
    for (std::size_t k = 0; k < lay.rho.size(); ++k) {
        x(p.block(lay.rho[k]).offset) = kMargin;
        lift("rank_tie" + std::to_string(k), lay.rho[k]);
    }
    if (lay.kappa) {
        x(p.block(*lay.kappa).offset) = kMargin;
        lift("eve_mi", *lay.kappa);
    }
    return x;
}

bool repair_powers(const CommChannel& ch, std::vector<CVector>& w, const ScenarioConfig& cfg,
                   const CMatrix* an_covariance)
{
    const Index users = static_cast<Index>(w.size());
    std::vector<CVector> u(users);
    RVector pw(users);
    for (Index k = 0; k < users; ++k) {
        const double nrm = w[k].norm();
        if (!(nrm > 0.0))
            return false;
        u[k] = w[k] / nrm;
        pw(k) = nrm * nrm;
    }
    RMatrix gain(users, users);
    RVector leak = RVector::Zero(users);
    for (Index k = 0; k < users; ++k) {
        for (Index j = 0; j < users; ++j)
            gain(k, j) = std::norm(ch.h(k).dot(u[j]));
        if (an_covariance)
            leak(k) = (ch.h(k).adjoint() * (*an_covariance) * ch.h(k))(0, 0).real();
    }
    constexpr double kMargin = 1e-9;
    for (int iter = 0; iter < 500; ++iter) {
        bool changed = false;
        for (Index k = 0; k < users; ++k) {
            double interf = cfg.noise_comm + leak(k);
            for (Index j = 0; j < users; ++j)
                if (j != k)
                    interf += pw(j) * gain(k, j);
            if (!(gain(k, k) > 0.0))
                return false;
            const double need = cfg.sinr_for(k) * (1.0 + kMargin) * interf / gain(k, k);
            if (need > pw(k)) {
                pw(k) = need;
                changed = true;
            }
        }
        if (!changed)
            break;
        if (!pw.allFinite() || pw.sum() > 10.0 * cfg.power_budget_w)
            return false;
    }
    double total = pw.sum();
    if (an_covariance)
        total += an_covariance->trace().real();
    if (total > cfg.power_budget_w + 1e-7)
        return false;
    for (Index k = 0; k < users; ++k)
        w[k] = std::sqrt(pw(k)) * u[k];
    return true;
}

std::vector<CVector> extract_beamformers(const std::vector<CMatrix>& W, const CommChannel& ch,
                                         const SensingStats& radar, const ScenarioConfig& cfg, Index frame_len,
                                         const CMatrix* an_covariance,
                                         const std::function<bool(const CMatrix&)>& eve_ok, RngState& rng)
{
    std::vector<CVector> principal;
    bool all_rank_one = true;
    for (const auto& wk : W) {
        const HermitianEig e = hermitian_eig(wk);
        const double tr = std::max(0.0, real_trace(wk));
        principal.push_back(std::sqrt(tr) * e.vectors.col(0));
        all_rank_one = all_rank_one && rank_one_certificate(wk) >= kCertificateThreshold;
    }
    if (all_rank_one) {
        std::vector<CVector> w = principal;
        if (repair_powers(ch, w, cfg, an_covariance))
            return w;
    }

    // Gaussian randomisation over the relaxed covariances.
    const CMatrix zero_mean = CMatrix::Zero(cfg.n_tx, 1);
    std::optional<std::vector<CVector>> best;
    double best_mi = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cfg.randomization_candidates; ++c) {
        std::vector<CVector> cand;
        for (const auto& wk : W) {
            CVector xi = sample_complex_gaussian(rng, zero_mean, wk).col(0);
            if (!(xi.norm() > 0.0))
                xi = CVector::Unit(cfg.n_tx, 0);
            cand.push_back(xi.normalized() * std::sqrt(std::max(real_trace(wk), 0.0)));
        }
        if (!repair_powers(ch, cand, cfg, an_covariance))
            continue;
        const CMatrix rx = transmit_covariance(std::span<const CVector>(cand));
        if (eve_ok && !eve_ok(rx))
            continue;
        const double mi = an_covariance ? sensing_mi_with_an(radar, rx, *an_covariance, frame_len)
                                        : sensing_mi(radar, rx, frame_len);
        if (mi > best_mi) {
            best_mi = mi;
            best = std::move(cand);
        }
    }
    if (best)
        return *best;
    std::vector<CVector> w = principal;
    repair_powers(ch, w, cfg, an_covariance);
    return w;
}

BeamformerSolution evaluate_solution(std::vector<CVector> w, std::vector<CMatrix> W, std::optional<CMatrix> r_n,
                                     const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                                     const ScenarioConfig& cfg, Index frame_len)
{
    BeamformerSolution s;
    s.w = std::move(w);
    if (W.empty())
        for (const auto& v : s.w)
            W.push_back(v * v.adjoint());
    s.W = std::move(W);
    s.an_covariance = std::move(r_n);
    const CMatrix rx = transmit_covariance(std::span<const CVector>(s.w));
    const CMatrix* an = s.an_covariance ? &*s.an_covariance : nullptr;
    s.radar_mi = an ? sensing_mi_with_an(radar, rx, *an, frame_len) : sensing_mi(radar, rx, frame_len);
    s.eve_mi = sensing_mi(eve, rx, frame_len);
    s.sinr = sinr(ch, std::span<const CVector>(s.w), cfg.noise_comm, an);
    s.power = real_trace(rx) + (an ? real_trace(*an) : 0.0);
    for (const auto& wk : s.W)
        s.rank_one_certificate.push_back(rank_one_certificate(wk));
    return s;
}

std::vector<std::string> check_common_feasibility(const BeamformerSolution& s, const ScenarioConfig& cfg)
{
    std::vector<std::string> v;
    std::ostringstream os;
    os.precision(10);
    if (s.power > cfg.power_budget_w + 1e-6) {
        os << "power " << s.power << " W exceeds budget " << cfg.power_budget_w << " W";
        v.push_back(os.str());
        os.str("");
    }
    for (std::size_t k = 0; k < s.sinr.size(); ++k) {
        const double g = cfg.sinr_for(static_cast<Index>(k));
        if (!(s.sinr[k] >= g * (1.0 - 1e-6))) {
            os << "user " << k << " SINR " << s.sinr[k] << " below " << g;
            v.push_back(os.str());
            os.str("");
        }
    }
    for (std::size_t k = 0; k < s.rank_one_certificate.size(); ++k) {
        if (!(s.rank_one_certificate[k] >= kCertificateThreshold)) {
            os << "user " << k << " rank-one certificate " << s.rank_one_certificate[k];
            v.push_back(os.str());
            os.str("");
        }
    }
    return v;
}

namespace {

struct IterateValues {
    std::vector<CMatrix> W;
    std::vector<CVector> w;
    std::vector<double> rho;
    double kappa = 0.0;
};

IterateValues read_iterate(const conic::ConicSubproblem& p, const SubproblemLayout& lay, const RVector& x, double p0)
{
    IterateValues v;
    for (std::size_t k = 0; k < lay.W.size(); ++k) {
        v.W.push_back(p0 * p.hermitian_value(x, lay.W[k]));
        v.w.push_back(std::sqrt(p0) * p.vector_value(x, lay.w[k]));
        v.rho.push_back(p.scalar_value(x, lay.rho[k]));
    }
    if (lay.kappa)
        v.kappa = p.scalar_value(x, *lay.kappa);
    return v;
}

std::string infeasible_message(const char* what, int iteration, const conic::SolverResult& r)
{
    std::ostringstream os;
    os << what << ": subproblem infeasible at outer iteration " << iteration << " (phase-I slack "
       << r.feasibility_residual << "); the SINR targets may be unreachable within the power budget";
    return os.str();
}

} // namespace

SCAResult run_sca_no_an(const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                        const ScenarioConfig& cfg, RngState& rng)
{
    cfg.validate();
    const double p0 = cfg.power_budget_w;
    const Index L = cfg.frame_len;
    const conic::SolverOptions sopts = solver_options(cfg);

    SCAState state;
    state.penalty_weight = cfg.penalty_init;
    state.set_expansion(random_beamformers(cfg, rng));
    bool rerandomised = false;

    SCAResult res;
    double prev_mi = std::numeric_limits<double>::quiet_NaN();
    auto step = [&](SCATraceRow& row) -> bool {
        SubproblemLayout lay;
        const conic::ConicSubproblem p = build_subproblem_no_an(state, ch, radar, eve, cfg, &lay);
        const auto start = warm_start(p, lay, state, cfg);
        const conic::SolverResult r = conic::solve(p, sopts, start ? &*start : nullptr);
        if (r.status == conic::SolverStatus::infeasible_detected) {
            if (state.iteration == 0 && !rerandomised) {
                rerandomised = true;
                state.set_expansion(random_beamformers(cfg, rng));
                return false;
            }
            throw InfeasibleError(infeasible_message("no-AN design", state.iteration, r));
        }
        const IterateValues v = read_iterate(p, lay, r.x, p0);
        const CMatrix rx = transmit_covariance(std::span<const CMatrix>(v.W));
        row.iteration = state.iteration;
        row.radar_mi = sensing_mi(radar, rx, L);
        row.eve_mi = sensing_mi(eve, rx, L);
        row.eve_surrogate = eve_mi_taylor_bound(eve, rx, state.r_x_tilde, L);
        row.max_penalty = std::max(v.kappa, *std::max_element(v.rho.begin(), v.rho.end()));
        row.penalty_weight = state.penalty_weight;
        row.power = real_trace(rx);
        row.newton_steps = r.iterations;
        row.solver_status = conic::to_string(r.status);

        state.w_tilde = v.w;
        state.W_tilde = v.W;
        state.r_x_tilde = rx;
        state.rho = v.rho;
        state.kappa = v.kappa;
        state.radar_mi = row.radar_mi;
        ++state.iteration;
        state.penalty_weight *= cfg.penalty_growth;
        return true;
    };

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

    auto eve_ok = [&](const CMatrix& rx) { return sensing_mi(eve, rx, L) <= cfg.eve_mi_cap + kEveSlack; };
    auto finish = [&]() {
        std::vector<CVector> w = extract_beamformers(state.W_tilde, ch, radar, cfg, L, nullptr, eve_ok, rng);
        return evaluate_solution(std::move(w), state.W_tilde, std::nullopt, ch, radar, eve, cfg, L);
    };
    res.solution = finish();
    if (res.solution.eve_mi > cfg.eve_mi_cap + kEveSlack) {
        SCATraceRow row;
        if (step(row)) {
            res.trace.rows.push_back(row);
            res.solution = finish();
        }
    }
    state.trace = res.trace;

    res.violations = check_common_feasibility(res.solution, cfg);
    if (res.solution.eve_mi > cfg.eve_mi_cap + kEveSlack) {
        std::ostringstream os;
        os.precision(10);
        os << "Eve MI " << res.solution.eve_mi << " nats above cap " << cfg.eve_mi_cap;
        res.violations.push_back(os.str());
    }
    res.feasible = res.violations.empty();
    return res;
}

} // namespace isac
