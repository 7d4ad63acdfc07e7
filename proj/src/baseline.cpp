// SPDX-License-Identifier: Apache-2.0
#include "isac/baseline.hpp"

#include <cmath>
#include <sstream>

#include "isac/conic_solver.hpp"
#include "isac/errors.hpp"
#include "isac/sca_driver.hpp"

namespace isac {

std::vector<CMatrix> min_power_covariances(const CommChannel& ch, const ScenarioConfig& cfg)
{
    cfg.validate();
    const Index n = cfg.n_tx;
    const Index users = cfg.num_users;
    const double p0 = cfg.power_budget_w;
    if (ch.num_users() != users)
        throw DimensionError("baseline: channel count does not match the number of users");

    conic::ConicSubproblem p;
    std::vector<Index> blocks;
    for (Index k = 0; k < users; ++k)
        blocks.push_back(p.add_hermitian("W" + std::to_string(k), n));

    RVector power = p.zeros();
    for (Index k = 0; k < users; ++k) {
        conic::HermitianMap psd;
        psd.name = "psd" + std::to_string(k);
        psd.constant = CMatrix::Zero(n, n);
        psd.add_term(blocks[k], psd.add_operator(p.make_operator(blocks[k], [](const CMatrix& v) { return v; })));
        p.lmis.push_back(std::move(psd));

        const CVector& h = ch.h(k);
        const double g = cfg.sinr_for(k) * (1.0 + 1e-5);
        auto quad = [&](const CMatrix& v) { return (h.adjoint() * v * h)(0, 0).real(); };
        RVector row = p.zeros();
        for (Index j = 0; j < users; ++j)
            row += (j == k ? 1.0 : -g) * p.linear_functional(blocks[j], quad);
        p.affine.push_back({"sinr" + std::to_string(k), row, -g * cfg.noise_comm / p0});
        power -= p.linear_functional(blocks[k], [](const CMatrix& v) { return v.trace().real(); });
    }
    p.affine.push_back({"power", power, 1.0});
    p.linear_objective = power; // maximise -sum tr(W_k)

    const conic::SolverResult r = conic::solve(p, solver_options(cfg));
    if (r.status == conic::SolverStatus::infeasible_detected) {
        std::ostringstream os;
        os << "baseline: SINR targets unreachable within " << p0 << " W (phase-I slack " << r.feasibility_residual
           << ")";
        throw InfeasibleError(os.str());
    }
    std::vector<CMatrix> W;
    for (Index k = 0; k < users; ++k)
        W.push_back(p0 * p.hermitian_value(r.x, blocks[k]));
    return W;
}

BaselineSolution solve_baseline(const CommChannel& ch, const SensingStats& radar, const SensingStats& eve,
                                const ScenarioConfig& cfg, RngState& rng)
{
    const std::vector<CMatrix> W = min_power_covariances(ch, cfg);
    BaselineSolution out;
    for (const auto& wk : W)
        out.min_power += wk.trace().real();

    std::vector<CVector> w = extract_beamformers(W, ch, radar, cfg, cfg.frame_len, nullptr, {}, rng);
    out.sinr_unscaled = sinr(ch, std::span<const CVector>(w), cfg.noise_comm);

    double total = 0.0;
    for (const auto& v : w)
        total += v.squaredNorm();
    if (total > 0.0) {
        const double s = std::sqrt(cfg.power_budget_w / total);
        for (auto& v : w)
            v *= s;
    }
    out.solution = evaluate_solution(w, {}, std::nullopt, ch, radar, eve, cfg, cfg.frame_len);
    out.w = std::move(w);
    out.used_power = out.solution.power;
    out.sinr = out.solution.sinr;
    return out;
}

} // namespace isac
