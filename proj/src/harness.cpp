// SPDX-License-Identifier: Apache-2.0
#include "isac/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <json.hpp>

#include "isac/an_extension.hpp"
#include "isac/baseline.hpp"
#include "isac/errors.hpp"
#include "isac/kernels.hpp"

namespace isac {

namespace {

constexpr double kEveSlack = 1e-3;
constexpr double kCertificateThreshold = 0.999;
constexpr double kFlatTol = 1e-3;
constexpr double kMonotoneSlack = 1e-6;
constexpr int kMaxFlatIterations = 6;

// Independent random streams of one run.
enum Stream : std::uint64_t { kChannels = 0, kSca = 1, kBaseline = 2, kAnSamples = 3, kMonteCarlo = 4 };

const char* const kProposed = "proposed";
const char* const kProposedAn = "proposed-an";
const char* const kProposedMatched = "proposed-matched";
const char* const kBaselineName = "baseline";

enum class Method { proposed, proposed_an, baseline };

struct Task {
    std::string experiment;
    std::string label;
    Method method = Method::proposed;
    ScenarioConfig cfg;
    std::uint64_t seed = 0;
    double power_dbm = 0.0;
};

template <class F>
void parallel_for(std::size_t n, int jobs, F&& f)
{
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(jobs)
    for (long i = 0; i < count; ++i)
        f(static_cast<std::size_t>(i));
}

std::string fmt(double v, int digits = 10)
{
    if (!std::isfinite(v))
        return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string hex64(std::uint64_t v)
{
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Design-side Eve figure of a solution: the AN bound when present.
double eve_figure(const BeamformerSolution& s) { return s.eve_mi_bound.value_or(s.eve_mi); }

// Recomputes the feasibility claims of a solution from its beamformers.
std::vector<std::string> verify_solution(const BeamformerSolution& s, const CommChannel& ch,
                                         const SensingStats& radar, const SensingStats& eve,
                                         const ScenarioConfig& cfg, Method method, const ANSampleSet* samples)
{
    std::vector<std::string> v;
    std::ostringstream os;
    os.precision(10);
    auto flush = [&] {
        v.push_back(os.str());
        os.str("");
    };
    const CMatrix* rn = s.an_covariance ? &*s.an_covariance : nullptr;
    const std::vector<double> g = sinr(ch, std::span<const CVector>(s.w), cfg.noise_comm, rn);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double target = cfg.sinr_for(static_cast<Index>(k));
        if (!(g[k] >= target * (1.0 - 1e-6))) {
            os << "user " << k << " SINR " << g[k] << " below " << target;
            flush();
        }
    }
    const CMatrix r_x = transmit_covariance(std::span<const CVector>(s.w));
    double power = r_x.trace().real();
    if (rn) {
        try {
            require_psd(*rn, "AN covariance");
        } catch (const DomainError&) {
            v.push_back("AN covariance is not PSD");
        }
        power += rn->trace().real();
    }
    if (power > cfg.power_budget_w + 1e-6) {
        os << "power " << power << " W exceeds budget " << cfg.power_budget_w << " W";
        flush();
    }
    if (method != Method::baseline) {
        for (std::size_t k = 0; k < s.W.size(); ++k) {
            const double c = rank_one_certificate(s.W[k]);
            if (!(c >= kCertificateThreshold)) {
                os << "user " << k << " rank-one certificate " << c;
                flush();
            }
        }
    }
    const Index L = cfg.frame_len;
    const double ir = rn ? sensing_mi_with_an(radar, r_x, *rn, L) : sensing_mi(radar, r_x, L);
    if (std::abs(ir - s.radar_mi) > 1e-8 * std::max(1.0, std::abs(ir))) {
        os << "reported radar MI " << s.radar_mi << " differs from recomputed " << ir;
        flush();
    }
    if (method == Method::proposed) {
        const double ie = sensing_mi(eve, r_x, L);
        if (ie > cfg.eve_mi_cap + kEveSlack) {
            os << "Eve MI " << ie << " nats above cap " << cfg.eve_mi_cap;
            flush();
        }
    } else if (method == Method::proposed_an) {
        const double bound = eve_mi_an_upper_bound(eve, rn ? *rn : CMatrix::Zero(cfg.n_tx, cfg.n_tx), L,
                                                   samples->channels);
        if (bound > cfg.eve_mi_cap + kEveSlack) {
            os << "Eve MI bound " << bound << " nats above cap " << cfg.eve_mi_cap;
            flush();
        }
    }
    return v;
}

RunRecord run_task(const Task& t)
{
    RunRecord r;
    r.experiment = t.experiment;
    r.method = t.label;
    r.seed = t.seed;
    r.power_dbm = t.power_dbm;
    r.num_users = t.cfg.num_users;
    r.config_snapshot = t.cfg.canonical_string();
    r.config_hash = t.cfg.hash();
    const auto start = std::chrono::steady_clock::now();
    try {
        const ScenarioConfig& cfg = t.cfg;
        const RngState root(t.seed);
        RngState ch_rng = root.split(kChannels);
        const CommChannel ch = sample_comm_channels(cfg, ch_rng);
        const SensingStats radar = legitimate_stats(cfg);
        const SensingStats eve = eve_stats(cfg);
        switch (t.method) {
        case Method::proposed: {
            RngState rng = root.split(kSca);
            SCAResult res = run_sca_no_an(ch, radar, eve, cfg, rng);
            r.rows = std::move(res.trace.rows);
            r.converged = res.trace.converged;
            r.solution = std::move(res.solution);
            r.violations = verify_solution(r.solution, ch, radar, eve, cfg, t.method, nullptr);
            break;
        }
        case Method::proposed_an: {
            RngState sample_rng = root.split(kAnSamples);
            const ANSampleSet samples = sample_an_channels(eve, cfg.an_samples, sample_rng);
            RngState rng = root.split(kSca);
            SCAResult res = run_sca_an(ch, radar, eve, samples, cfg, rng);
            r.rows = std::move(res.trace.rows);
            r.converged = res.trace.converged;
            r.solution = std::move(res.solution);
            r.violations = verify_solution(r.solution, ch, radar, eve, cfg, t.method, &samples);
            break;
        }
        case Method::baseline: {
            RngState rng = root.split(kBaseline);
            BaselineSolution b = solve_baseline(ch, radar, eve, cfg, rng);
            r.solution = std::move(b.solution);
            r.converged = true;
            SCATraceRow row;
            row.radar_mi = r.solution.radar_mi;
            row.eve_mi = r.solution.eve_mi;
            row.eve_surrogate = r.solution.eve_mi;
            row.power = r.solution.power;
            row.solver_status = "optimal";
            r.rows.push_back(row);
            r.violations = verify_solution(r.solution, ch, radar, eve, cfg, t.method, nullptr);
            break;
        }
        }
        r.has_solution = true;
        r.feasible = r.violations.empty();
        for (const auto& row : r.rows)
            r.max_penalty = row.max_penalty;
    } catch (const std::exception& e) {
        r.error = e.what();
        r.feasible = false;
    }
    r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<RunRecord> run_tasks(const std::vector<Task>& tasks, int jobs)
{
    std::vector<RunRecord> out(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t i) { out[i] = run_task(tasks[i]); });
    return out;
}

Task make_task(const std::string& experiment, const std::string& label, Method m, ScenarioConfig cfg,
               std::uint64_t seed, double dbm)
{
    cfg.power_budget_w = dbm_to_watts(dbm);
    cfg.seed = seed;
    if (m == Method::proposed_an)
        cfg.frame_len = cfg.an_frame_len;
    return {experiment, label, m, std::move(cfg), seed, dbm};
}

CheckResult make_check(std::string name, bool passed, std::string detail)
{
    return {std::move(name), passed, std::move(detail)};
}

std::string ratio_text(int hits, int total)
{
    return std::to_string(hits) + "/" + std::to_string(total);
}

bool is_majority(int hits, int total) { return total > 0 && 2 * hits > total; }

CheckResult errors_check(const std::vector<RunRecord>& records)
{
    int bad = 0;
    std::string first;
    for (const auto& r : records)
        if (!r.error.empty()) {
            if (bad++ == 0)
                first = r.method + " seed " + std::to_string(r.seed) + ": " + r.error;
        }
    return make_check("runs_completed", bad == 0,
                      bad == 0 ? ratio_text(static_cast<int>(records.size()), static_cast<int>(records.size())) +
                                     " runs completed"
                               : std::to_string(bad) + " runs failed; first: " + first);
}

CheckResult feasibility_check(const std::vector<RunRecord>& records, const std::set<std::string>& methods)
{
    int total = 0, ok = 0;
    std::string first;
    for (const auto& r : records) {
        if (!methods.count(r.method) || !r.error.empty() || !r.converged)
            continue;
        ++total;
        if (r.feasible)
            ++ok;
        else if (first.empty())
            first = r.method + " seed " + std::to_string(r.seed) + " P0 " + fmt(r.power_dbm, 6) + " dBm: " +
                    r.violations.front();
    }
    std::string detail = ratio_text(ok, total) + " converged runs feasible";
    if (!first.empty())
        detail += "; first violation: " + first;
    return make_check("feasible_when_converged", ok == total, detail);
}

bool monotone_trace(const std::vector<SCATraceRow>& rows)
{
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].radar_mi < rows[i - 1].radar_mi - kMonotoneSlack)
            return false;
    return true;
}

// Converged, and every change after outer iteration kMaxFlatIterations is
// below kFlatTol.
bool flat_after_limit(const RunRecord& r)
{
    if (!r.converged || r.rows.size() < 2)
        return false;
    const std::size_t first = std::max<std::size_t>(1, kMaxFlatIterations);
    for (std::size_t i = first; i < r.rows.size(); ++i)
        if (std::abs(r.rows[i].radar_mi - r.rows[i - 1].radar_mi) >= kFlatTol)
            return false;
    return true;
}

// Records keyed by (method, power, users, seed).
using RecordKey = std::tuple<std::string, double, Index, std::uint64_t>;

std::map<RecordKey, const RunRecord*> index_records(const std::vector<RunRecord>& records)
{
    std::map<RecordKey, const RunRecord*> m;
    for (const auto& r : records)
        m[{r.method, r.power_dbm, r.num_users, r.seed}] = &r;
    return m;
}

bool usable(const RunRecord* r) { return r && r->error.empty() && r->has_solution; }

} // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::power_sweep: return "power-sweep";
    case ExperimentKind::an_compare: return "an-compare";
    case ExperimentKind::mc_validate: return "mc-validate";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name)
{
    if (name == "convergence" || name == "converge")
        return ExperimentKind::convergence;
    if (name == "power-sweep" || name == "sweep")
        return ExperimentKind::power_sweep;
    if (name == "an-compare")
        return ExperimentKind::an_compare;
    if (name == "mc-validate" || name == "validate")
        return ExperimentKind::mc_validate;
    throw ConfigError("unknown experiment kind '" + name + "'");
}

void ExperimentSpec::validate() const
{
    scenario.validate();
    if (seeds.empty())
        throw ConfigError("experiment needs at least one seed");
    if (jobs < 1)
        throw ConfigError("jobs must be at least 1");
    switch (kind) {
    case ExperimentKind::convergence:
        if (cases.empty())
            throw ConfigError("convergence experiment needs at least one (P0, K) case");
        for (const auto& c : cases)
            if (c.num_users < 1 || c.num_users > scenario.n_tx)
                throw ConfigError("convergence case user count out of range");
        break;
    case ExperimentKind::power_sweep:
        if (power_grid_dbm.empty())
            throw ConfigError("power sweep grid is empty");
        break;
    case ExperimentKind::an_compare:
        break;
    case ExperimentKind::mc_validate:
        if (mc_solutions < 1)
            throw ConfigError("mc_solutions must be at least 1");
        if (mc_trials <= scenario.n_rx * scenario.frame_len)
            throw ConfigError("mc_trials must exceed n_rx * frame_len");
        break;
    }
    for (double p : power_grid_dbm)
        if (!std::isfinite(p))
            throw ConfigError("power grid entries must be finite");
}

const std::vector<std::pair<std::string, std::string>>& experiment_key_docs()
{
    static const std::vector<std::pair<std::string, std::string>> docs{
        {"seeds", "explicit seed list (u64, comma separated)"},
        {"num_seeds", "number of consecutive seeds starting at `seed`"},
        {"case_power_dbm", "convergence cases: P0 per case (dBm)"},
        {"case_users", "convergence cases: K per case"},
        {"power_grid_dbm", "power sweep grid (dBm)"},
        {"sweep_with_an", "power sweep also runs the AN design (true/false)"},
        {"an_power_dbm", "AN comparison power budget (dBm)"},
        {"mc_trials", "Monte-Carlo trials per validation case"},
        {"mc_solutions", "designed solutions validated by Monte-Carlo"},
    };
    return docs;
}

ExperimentSpec make_experiment_spec(ExperimentKind kind, KeyValueFile* kv, std::optional<std::uint64_t> seed)
{
    ExperimentSpec spec;
    spec.kind = kind;
    ScenarioConfig base;
    int num_seeds = 5;
    switch (kind) {
    case ExperimentKind::convergence:
        base.sinr_threshold = {db_to_linear(20.0)};
        spec.cases = {{30.0, 3}, {40.0, 3}, {30.0, 4}};
        break;
    case ExperimentKind::power_sweep:
        base.sinr_threshold = {db_to_linear(28.0)};
        spec.power_grid_dbm = {10.0, 20.0, 30.0, 40.0};
        break;
    case ExperimentKind::an_compare:
        base.sinr_threshold = {db_to_linear(28.0)};
        break;
    case ExperimentKind::mc_validate:
        base.sinr_threshold = {db_to_linear(20.0)};
        break;
    }
    std::optional<std::vector<std::uint64_t>> seed_list;
    if (kv) {
        if (auto raw = kv->raw("seeds")) {
            std::vector<std::uint64_t> list;
            std::stringstream ss(*raw);
            std::string item;
            while (std::getline(ss, item, ',')) {
                const auto b = item.find_first_not_of(" \t");
                const auto e = item.find_last_not_of(" \t");
                if (b == std::string::npos)
                    throw ConfigError("empty entry in 'seeds'");
                try {
                    std::size_t used = 0;
                    const std::string tok = item.substr(b, e - b + 1);
                    list.push_back(std::stoull(tok, &used));
                    if (used != tok.size())
                        throw ConfigError("bad seed '" + tok + "'");
                } catch (const std::logic_error&) {
                    throw ConfigError("bad seed '" + item + "'");
                }
            }
            seed_list = std::move(list);
        }
        if (auto n = kv->integer("num_seeds")) {
            if (*n < 1)
                throw ConfigError("num_seeds must be positive");
            num_seeds = static_cast<int>(*n);
        }
        auto cp = kv->numbers("case_power_dbm");
        auto cu = kv->numbers("case_users");
        if (cp || cu) {
            if (!cp || !cu || cp->size() != cu->size())
                throw ConfigError("case_power_dbm and case_users must be given together with equal lengths");
            spec.cases.clear();
            for (std::size_t i = 0; i < cp->size(); ++i) {
                const double k = (*cu)[i];
                if (k != std::floor(k) || k < 1)
                    throw ConfigError("case_users entries must be positive integers");
                spec.cases.push_back({(*cp)[i], static_cast<Index>(k)});
            }
        }
        if (auto g = kv->numbers("power_grid_dbm"))
            spec.power_grid_dbm = *g;
        if (auto b = kv->boolean("sweep_with_an"))
            spec.sweep_with_an = *b;
        if (auto p = kv->number("an_power_dbm"))
            spec.an_power_dbm = *p;
        if (auto t = kv->integer("mc_trials"))
            spec.mc_trials = static_cast<int>(*t);
        if (auto s = kv->integer("mc_solutions"))
            spec.mc_solutions = static_cast<int>(*s);
        base = apply_scenario_keys(*kv, base);
        const auto unused = kv->unused_keys();
        if (!unused.empty())
            throw ConfigError("unknown config key '" + unused.front() + "'");
    }
    if (seed)
        base.seed = *seed;
    spec.scenario = base;
    if (seed_list && !seed) {
        spec.seeds = *seed_list;
    } else {
        const std::size_t n = seed_list ? seed_list->size() : static_cast<std::size_t>(num_seeds);
        for (std::size_t i = 0; i < n; ++i)
            spec.seeds.push_back(base.seed + i);
    }
    spec.validate();
    return spec;
}

bool ExperimentReport::all_passed() const
{
    if (checks.empty())
        return false;
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

// ---------------------------------------------------------------------------

ExperimentReport run_convergence(const ExperimentSpec& spec)
{
    if (spec.kind != ExperimentKind::convergence)
        throw ConfigError("run_convergence needs a convergence spec");
    spec.validate();
    ExperimentReport rep;
    rep.experiment = to_string(spec.kind);
    rep.spec = spec;
    std::vector<Task> tasks;
    for (const auto& c : spec.cases)
        for (auto seed : spec.seeds) {
            ScenarioConfig cfg = spec.scenario;
            cfg.num_users = c.num_users;
            tasks.push_back(make_task(rep.experiment, kProposed, Method::proposed, cfg, seed, c.power_dbm));
        }
    rep.records = run_tasks(tasks, spec.jobs);

    rep.checks.push_back(errors_check(rep.records));
    int flat = 0, monotone = 0, total = 0;
    for (const auto& r : rep.records) {
        if (!r.error.empty())
            continue;
        ++total;
        if (flat_after_limit(r))
            ++flat;
        if (monotone_trace(r.rows))
            ++monotone;
    }
    const int runs = static_cast<int>(rep.records.size());
    rep.checks.push_back(make_check("flat_after_6_iterations", flat == runs,
                                    ratio_text(flat, runs) + " traces converged and flat from iteration 6 on"));
    rep.checks.push_back(make_check("radar_mi_monotone", total > 0 && 10 * monotone >= 9 * runs,
                                    ratio_text(monotone, runs) + " traces nondecreasing (slack 1e-6)"));
    rep.checks.push_back(feasibility_check(rep.records, {kProposed}));

    // Larger budgets enlarge the feasible set.
    const auto idx = index_records(rep.records);
    int pairs = 0, nested = 0;
    std::string worst;
    for (const auto& a : spec.cases)
        for (const auto& b : spec.cases) {
            if (a.num_users != b.num_users || !(a.power_dbm < b.power_dbm))
                continue;
            for (auto seed : spec.seeds) {
                const auto ra = idx.find({kProposed, a.power_dbm, a.num_users, seed});
                const auto rb = idx.find({kProposed, b.power_dbm, b.num_users, seed});
                if (ra == idx.end() || rb == idx.end() || !usable(ra->second) || !usable(rb->second))
                    continue;
                ++pairs;
                if (ra->second->solution.radar_mi <= rb->second->solution.radar_mi + 1e-6)
                    ++nested;
                else if (worst.empty())
                    worst = "seed " + std::to_string(seed) + ": " + fmt(ra->second->solution.radar_mi) + " at " +
                            fmt(a.power_dbm, 6) + " dBm > " + fmt(rb->second->solution.radar_mi) + " at " +
                            fmt(b.power_dbm, 6) + " dBm";
            }
        }
    rep.checks.push_back(make_check("radar_mi_grows_with_power", nested == pairs,
                                    ratio_text(nested, pairs) + " budget pairs ordered" +
                                        (worst.empty() ? "" : "; " + worst)));

    // More users: slight reduction, majority over seeds.
    int upairs = 0, reduced = 0;
    for (const auto& a : spec.cases)
        for (const auto& b : spec.cases) {
            if (a.power_dbm != b.power_dbm || !(a.num_users < b.num_users))
                continue;
            for (auto seed : spec.seeds) {
                const auto ra = idx.find({kProposed, a.power_dbm, a.num_users, seed});
                const auto rb = idx.find({kProposed, b.power_dbm, b.num_users, seed});
                if (ra == idx.end() || rb == idx.end() || !usable(ra->second) || !usable(rb->second))
                    continue;
                ++upairs;
                if (rb->second->solution.radar_mi <= ra->second->solution.radar_mi + 1e-3)
                    ++reduced;
            }
        }
    if (upairs > 0)
        rep.checks.push_back(make_check("more_users_no_gain", is_majority(reduced, upairs),
                                        ratio_text(reduced, upairs) + " seeds with I_r(more users) <= I_r(fewer)"));
    return rep;
}

ExperimentReport run_power_sweep(const ExperimentSpec& spec)
{
    if (spec.kind != ExperimentKind::power_sweep)
        throw ConfigError("run_power_sweep needs a power-sweep spec");
    spec.validate();
    ExperimentReport rep;
    rep.experiment = to_string(spec.kind);
    rep.spec = spec;
    std::vector<Task> tasks;
    for (double dbm : spec.power_grid_dbm)
        for (auto seed : spec.seeds) {
            tasks.push_back(make_task(rep.experiment, kProposed, Method::proposed, spec.scenario, seed, dbm));
            tasks.push_back(make_task(rep.experiment, kBaselineName, Method::baseline, spec.scenario, seed, dbm));
            if (spec.sweep_with_an) {
                tasks.push_back(
                    make_task(rep.experiment, kProposedAn, Method::proposed_an, spec.scenario, seed, dbm));
                ScenarioConfig matched = spec.scenario;
                matched.frame_len = matched.an_frame_len;
                tasks.push_back(make_task(rep.experiment, kProposedMatched, Method::proposed, matched, seed, dbm));
            }
        }
    rep.records = run_tasks(tasks, spec.jobs);
    rep.checks.push_back(errors_check(rep.records));

    int capped = 0, designed = 0;
    for (const auto& r : rep.records) {
        if (r.method == kBaselineName || !usable(&r))
            continue;
        ++designed;
        if (eve_figure(r.solution) <= spec.scenario.eve_mi_cap + kEveSlack)
            ++capped;
    }
    rep.checks.push_back(make_check("eve_mi_capped", capped == designed,
                                    ratio_text(capped, designed) + " designed solutions within the Eve cap"));
    rep.checks.push_back(feasibility_check(rep.records, {kProposed, kProposedAn, kProposedMatched}));

    const auto idx = index_records(rep.records);
    const Index k = spec.scenario.num_users;
    int dominant = 0;
    for (auto seed : spec.seeds) {
        bool all = true;
        for (double dbm : spec.power_grid_dbm) {
            const auto p = idx.find({kProposed, dbm, k, seed});
            const auto b = idx.find({kBaselineName, dbm, k, seed});
            if (p == idx.end() || b == idx.end() || !usable(p->second) || !usable(b->second) ||
                !(p->second->solution.gap() >= b->second->solution.gap())) {
                all = false;
                break;
            }
        }
        if (all)
            ++dominant;
    }
    const int nseeds = static_cast<int>(spec.seeds.size());
    rep.checks.push_back(make_check("gap_dominates_baseline", 100 * dominant >= 95 * nseeds,
                                    ratio_text(dominant, nseeds) + " seeds with a larger gap at every power"));

    const double top = *std::max_element(spec.power_grid_dbm.begin(), spec.power_grid_dbm.end());
    int doubled = 0;
    for (auto seed : spec.seeds) {
        const auto p = idx.find({kProposed, top, k, seed});
        const auto b = idx.find({kBaselineName, top, k, seed});
        if (p != idx.end() && b != idx.end() && usable(p->second) && usable(b->second) &&
            p->second->solution.gap() >= 2.0 * b->second->solution.gap())
            ++doubled;
    }
    rep.checks.push_back(make_check("top_power_gap_ratio", is_majority(doubled, nseeds),
                                    ratio_text(doubled, nseeds) + " seeds with gap >= 2x baseline at " +
                                        fmt(top, 6) + " dBm"));

    if (spec.sweep_with_an) {
        bool all_points = true;
        std::string detail;
        for (double dbm : spec.power_grid_dbm) {
            int better = 0;
            for (auto seed : spec.seeds) {
                const auto a = idx.find({kProposedAn, dbm, k, seed});
                const auto n = idx.find({kProposedMatched, dbm, k, seed});
                if (a != idx.end() && n != idx.end() && usable(a->second) && usable(n->second) &&
                    a->second->solution.gap() >= n->second->solution.gap() - 1e-3)
                    ++better;
            }
            all_points = all_points && is_majority(better, nseeds);
            detail += (detail.empty() ? "" : ", ") + fmt(dbm, 6) + " dBm " + ratio_text(better, nseeds);
        }
        rep.checks.push_back(make_check("an_gap_not_worse", all_points, detail));
    }
    return rep;
}

ExperimentReport run_an_compare(const ExperimentSpec& spec)
{
    if (spec.kind != ExperimentKind::an_compare)
        throw ConfigError("run_an_compare needs an an-compare spec");
    spec.validate();
    ExperimentReport rep;
    rep.experiment = to_string(spec.kind);
    rep.spec = spec;
    ScenarioConfig matched = spec.scenario;
    matched.frame_len = matched.an_frame_len;
    std::vector<Task> tasks;
    for (auto seed : spec.seeds) {
        tasks.push_back(make_task(rep.experiment, kProposed, Method::proposed, matched, seed, spec.an_power_dbm));
        tasks.push_back(
            make_task(rep.experiment, kProposedAn, Method::proposed_an, matched, seed, spec.an_power_dbm));
    }
    rep.records = run_tasks(tasks, spec.jobs);
    rep.checks.push_back(errors_check(rep.records));
    rep.checks.push_back(feasibility_check(rep.records, {kProposed, kProposedAn}));

    const auto idx = index_records(rep.records);
    int better = 0;
    for (auto seed : spec.seeds) {
        const auto a = idx.find({kProposedAn, spec.an_power_dbm, matched.num_users, seed});
        const auto n = idx.find({kProposed, spec.an_power_dbm, matched.num_users, seed});
        if (a != idx.end() && n != idx.end() && usable(a->second) && usable(n->second) &&
            a->second->solution.gap() >= n->second->solution.gap() - 1e-3)
            ++better;
    }
    const int nseeds = static_cast<int>(spec.seeds.size());
    rep.checks.push_back(make_check("an_gap_not_worse", is_majority(better, nseeds),
                                    ratio_text(better, nseeds) + " seeds with gap(AN) >= gap(no AN) - 1e-3"));
    return rep;
}

// ---------------------------------------------------------------------------

MIEstimate gaussian_mi_estimate(const CMatrix& sample_cov, Index n, double noise_power)
{
    const Index p = sample_cov.rows();
    if (sample_cov.cols() != p)
        throw DimensionError("gaussian_mi_estimate: sample covariance must be square");
    if (n <= p)
        throw DomainError("gaussian_mi_estimate: need more samples than dimensions");
    if (!(noise_power > 0.0))
        throw DomainError("gaussian_mi_estimate: noise power must be positive");
    double bias = 0.0, var = 0.0;
    const double logn = std::log(static_cast<double>(n));
    for (Index i = 0; i < p; ++i) {
        const double dof = static_cast<double>(n - i);
        bias += boost::math::digamma(dof) - logn;
        var += boost::math::trigamma(dof);
    }
    MIEstimate e;
    e.value = logdet_psd(hermitian_part(sample_cov)) - bias - static_cast<double>(p) * std::log(noise_power);
    e.std_error = std::sqrt(var);
    return e;
}

MIEstimate monte_carlo_sensing_mi(const CMatrix& r_h, Index n_rx, double noise_power, const CMatrix& x,
                                  int trials, RngState& rng)
{
    const Index nt = x.rows();
    const Index len = x.cols();
    const Index p = n_rx * len;
    if (r_h.rows() != n_rx * nt || r_h.cols() != n_rx * nt)
        throw DimensionError("monte_carlo_sensing_mi: R_h does not match n_rx * rows(X)");
    if (trials <= p)
        throw DomainError("monte_carlo_sensing_mi: need more trials than n_rx * L");
    const CMatrix root = psd_sqrt(r_h);
    CMatrix samples(p, trials);
    CVector g(n_rx * nt);
    for (int t = 0; t < trials; ++t) {
        for (Index i = 0; i < g.size(); ++i)
            g(i) = rng.complex_normal();
        const CVector h = root * g;
        CMatrix y = Eigen::Map<const CMatrix>(h.data(), n_rx, nt) * x;
        for (Index c = 0; c < len; ++c)
            for (Index r = 0; r < n_rx; ++r)
                y(r, c) += rng.complex_normal(noise_power);
        samples.col(t) = Eigen::Map<const CVector>(y.data(), p);
    }
    return gaussian_mi_estimate(kernels::sample_covariance(samples), trials, noise_power);
}

namespace {

struct McCase {
    std::string name;
    CMatrix r_h;
    Index n_rx = 0;
    double noise = 1.0;
    CMatrix x;
    double closed_form = 0.0;
    std::uint64_t seed = 0;       // source seed (solution cases)
    std::uint64_t stream = 0;     // Monte-Carlo stream index
    std::optional<double> alt_closed_form;
};

// Frame X = W S with unit-power i.i.d. symbols S (K x L).
CMatrix waveform_from(const std::vector<CVector>& w, Index len, RngState& rng)
{
    CMatrix wm(w.front().size(), static_cast<Index>(w.size()));
    for (std::size_t k = 0; k < w.size(); ++k)
        wm.col(static_cast<Index>(k)) = w[k];
    return wm * standard_complex_gaussian(rng, wm.cols(), len);
}

// Explicit AN frame N = R_N^(1/2) G, G i.i.d. CN(0, 1).
CMatrix an_frame(const CMatrix& r_n, Index len, RngState& rng)
{
    return psd_sqrt(r_n) * standard_complex_gaussian(rng, r_n.rows(), len);
}

} // namespace

ExperimentReport run_mc_validate(const ExperimentSpec& spec)
{
    if (spec.kind != ExperimentKind::mc_validate)
        throw ConfigError("run_mc_validate needs an mc-validate spec");
    spec.validate();
    ExperimentReport rep;
    rep.experiment = to_string(spec.kind);
    rep.spec = spec;
    const ScenarioConfig& base = spec.scenario;
    const double dbm = watts_to_dbm(base.power_budget_w);

    // Designed solutions supply the waveforms.
    std::vector<Task> tasks;
    for (int i = 0; i < spec.mc_solutions; ++i) {
        const std::uint64_t seed = spec.seeds[static_cast<std::size_t>(i) % spec.seeds.size()] +
                                   static_cast<std::uint64_t>(i / static_cast<int>(spec.seeds.size())) * 1000003u;
        tasks.push_back(make_task(rep.experiment, kProposed, Method::proposed, base, seed, dbm));
    }
    std::vector<RunRecord> designs = run_tasks(tasks, spec.jobs);

    const SensingStats radar = legitimate_stats(base);
    const Index L = base.frame_len;
    const double noise = base.noise_radar;
    std::vector<McCase> cases;
    std::uint64_t stream = kMonteCarlo;
    for (const auto& d : designs) {
        if (!usable(&d)) {
            RunRecord r = d;
            r.method = "solution-" + std::to_string(d.seed);
            rep.records.push_back(r);
            continue;
        }
        RngState rng = RngState(d.seed).split(kMonteCarlo);
        McCase c;
        c.name = "solution-" + std::to_string(d.seed);
        c.r_h = radar.covariance;
        c.n_rx = base.n_rx;
        c.noise = noise;
        c.x = waveform_from(d.solution.w, L, rng);
        c.closed_form = sensing_mi_from_waveform(radar, c.x);
        c.alt_closed_form = sensing_mi(radar, c.x * c.x.adjoint() / static_cast<double>(L), L);
        c.seed = d.seed;
        c.stream = ++stream;
        cases.push_back(c);
    }
    const std::uint64_t seed0 = spec.seeds.front();
    {
        McCase c;
        c.name = "zero-waveform";
        c.r_h = radar.covariance;
        c.n_rx = base.n_rx;
        c.noise = noise;
        c.x = CMatrix::Zero(base.n_tx, L);
        c.closed_form = sensing_mi_from_waveform(radar, c.x);
        c.seed = seed0;
        c.stream = ++stream;
        cases.push_back(c);
    }
    {
        // White response and orthogonal rows: X X^H = L p I.
        McCase c;
        c.name = "white";
        c.n_rx = base.n_rx;
        c.r_h = CMatrix::Identity(base.n_rx * base.n_tx, base.n_rx * base.n_tx);
        c.noise = noise;
        const double p = base.power_budget_w / static_cast<double>(base.n_tx);
        c.x.resize(base.n_tx, L);
        for (Index m = 0; m < base.n_tx; ++m)
            for (Index l = 0; l < L; ++l)
                c.x(m, l) = std::sqrt(p) * std::polar(1.0, -2.0 * kPi * static_cast<double>(m * l) /
                                                               static_cast<double>(L));
        c.closed_form = static_cast<double>(base.n_rx * base.n_tx) *
                        std::log1p(static_cast<double>(L) * p / noise);
        c.seed = seed0;
        c.stream = ++stream;
        cases.push_back(c);
    }
    if (!cases.empty() && cases.front().name.rfind("solution-", 0) == 0) {
        // Explicit AN added to the first designed waveform, with R_N = 0 and
        // with a random R_N of a tenth of the budget.
        const McCase& src = cases.front();
        McCase z = src;
        z.name = "an-zero";
        RngState nrng = RngState(src.seed).split(kMonteCarlo + 1);
        const CMatrix n0 = an_frame(CMatrix::Zero(base.n_tx, base.n_tx), L, nrng);
        z.x = src.x + n0;
        z.closed_form = sensing_mi_from_waveform(radar, z.x);
        z.alt_closed_form = sensing_mi_with_an(radar, src.x * src.x.adjoint() / static_cast<double>(L),
                                               CMatrix::Zero(base.n_tx, base.n_tx), L);
        z.stream = src.stream; // same draws as the no-AN case
        cases.push_back(z);

        McCase a = src;
        a.name = "an-random";
        const CMatrix g = standard_complex_gaussian(nrng, base.n_tx, base.n_tx);
        CMatrix r_n = g * g.adjoint();
        r_n *= 0.1 * base.power_budget_w / r_n.trace().real();
        const CMatrix n1 = an_frame(r_n, L, nrng);
        a.x = src.x + n1;
        a.closed_form = sensing_mi_from_waveform(radar, a.x);
        a.alt_closed_form.reset();
        a.stream = ++stream;
        cases.push_back(a);
    }

    std::vector<RunRecord> out(cases.size());
    parallel_for(cases.size(), spec.jobs, [&](std::size_t i) {
        const McCase& c = cases[i];
        RunRecord& r = out[i];
        r.experiment = rep.experiment;
        r.method = c.name;
        r.seed = c.seed;
        r.power_dbm = dbm;
        r.num_users = base.num_users;
        ScenarioConfig cfg = base;
        cfg.seed = c.seed;
        r.config_snapshot = cfg.canonical_string();
        r.config_hash = cfg.hash();
        r.closed_form = c.closed_form;
        const auto start = std::chrono::steady_clock::now();
        try {
            RngState rng = RngState(c.seed).split(c.stream);
            const MIEstimate e = monte_carlo_sensing_mi(c.r_h, c.n_rx, c.noise, c.x, spec.mc_trials, rng);
            r.mc_estimate = e.value;
            r.mc_std_error = e.std_error;
            r.converged = true;
            r.has_solution = false;
            const double diff = std::abs(e.value - c.closed_form);
            if (diff > 3.0 * e.std_error)
                r.violations.push_back("closed form " + fmt(c.closed_form) + " vs estimate " + fmt(e.value) +
                                       " differ by " + fmt(diff / e.std_error, 4) + " standard errors");
            if (c.alt_closed_form &&
                std::abs(*c.alt_closed_form - c.closed_form) > 1e-8 * std::max(1.0, std::abs(c.closed_form)))
                r.violations.push_back("reduced closed form " + fmt(*c.alt_closed_form) +
                                       " disagrees with waveform form " + fmt(c.closed_form));
            r.feasible = r.violations.empty();
        } catch (const std::exception& ex) {
            r.error = ex.what();
        }
        r.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    });
    for (auto& r : out)
        rep.records.push_back(std::move(r));

    rep.checks.push_back(errors_check(rep.records));
    int within = 0, total = 0;
    std::string first;
    for (const auto& r : rep.records) {
        if (!r.error.empty())
            continue;
        ++total;
        if (r.feasible)
            ++within;
        else if (first.empty())
            first = r.method + ": " + r.violations.front();
    }
    rep.checks.push_back(make_check("closed_form_within_3se", within == total && total > 0,
                                    ratio_text(within, total) + " cases" + (first.empty() ? "" : "; " + first)));
    const RunRecord* an0 = nullptr;
    const RunRecord* src = nullptr;
    for (const auto& r : rep.records) {
        if (r.method == "an-zero")
            an0 = &r;
        else if (!src && r.method.rfind("solution-", 0) == 0 && r.error.empty())
            src = &r;
    }
    if (an0 && src && an0->error.empty()) {
        const double d = std::abs(an0->mc_estimate - src->mc_estimate);
        const bool ok = d <= 3.0 * src->mc_std_error && std::abs(an0->closed_form - src->closed_form) <= 1e-12;
        rep.checks.push_back(make_check("an_zero_reduction", ok,
                                        "estimate difference " + fmt(d, 4) + " nats, closed forms " +
                                            fmt(an0->closed_form) + " / " + fmt(src->closed_form)));
    } else {
        rep.checks.push_back(make_check("an_zero_reduction", false, "no designed solution available"));
    }
    return rep;
}

ExperimentReport run_experiment(const ExperimentSpec& spec)
{
    switch (spec.kind) {
    case ExperimentKind::convergence: return run_convergence(spec);
    case ExperimentKind::power_sweep: return run_power_sweep(spec);
    case ExperimentKind::an_compare: return run_an_compare(spec);
    case ExperimentKind::mc_validate: return run_mc_validate(spec);
    }
    throw ConfigError("unknown experiment kind");
}

// ---------------------------------------------------------------------------

namespace {

double design_eve(const SCATraceRow& row, const RunRecord& r)
{
    return r.method == kProposedAn ? row.eve_surrogate : row.eve_mi;
}

bool row_feasible(const SCATraceRow& row, const RunRecord& r, const ScenarioConfig& cfg)
{
    if (r.method == kBaselineName)
        return r.feasible;
    return row.max_penalty <= cfg.tol_pen && row.power <= cfg.power_budget_w + 1e-6 &&
           design_eve(row, r) <= cfg.eve_mi_cap + kEveSlack;
}

void csv_line(std::ostringstream& os, const RunRecord& r, int iteration, const std::string& method, double ir,
              double ie, double pen, bool feasible)
{
    os << r.experiment << ',' << method << ',' << r.seed << ',' << fmt(r.power_dbm, 6) << ',' << iteration << ','
       << fmt(ir) << ',' << fmt(ie) << ',' << fmt(ir - ie) << ',' << fmt(pen) << ',' << (feasible ? 1 : 0) << ','
       << hex64(r.config_hash) << '\n';
}

ScenarioConfig record_config(const ExperimentReport& rep, const RunRecord& r)
{
    ScenarioConfig cfg = rep.spec.scenario;
    cfg.power_budget_w = dbm_to_watts(r.power_dbm);
    return cfg;
}

} // namespace

std::string render_csv(const std::vector<ExperimentReport>& reports)
{
    std::ostringstream os;
    os << kCsvHeader << '\n';
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& rep : reports)
        for (const auto& r : rep.records) {
            if (rep.spec.kind == ExperimentKind::mc_validate) {
                if (!r.error.empty())
                    continue;
                csv_line(os, r, 0, r.method + "/closed-form", r.closed_form, 0.0, nan, r.feasible);
                csv_line(os, r, 0, r.method + "/monte-carlo", r.mc_estimate, 0.0, nan, r.feasible);
                continue;
            }
            const ScenarioConfig cfg = record_config(rep, r);
            for (const auto& row : r.rows)
                csv_line(os, r, row.iteration, r.method, row.radar_mi, design_eve(row, r), row.max_penalty,
                         row_feasible(row, r, cfg));
        }
    return os.str();
}

std::string render_json(const std::vector<ExperimentReport>& reports)
{
    using nlohmann::ordered_json;
    ordered_json root;
    bool all = !reports.empty();
    ordered_json exps = ordered_json::array();
    for (const auto& rep : reports) {
        ordered_json e;
        e["experiment"] = rep.experiment;
        e["passed"] = rep.all_passed();
        all = all && rep.all_passed();
        ordered_json seeds = ordered_json::array();
        for (auto s : rep.spec.seeds)
            seeds.push_back(s);
        e["seeds"] = seeds;
        e["scenario_hash"] = hex64(rep.spec.scenario.hash());
        ordered_json checks = ordered_json::array();
        for (const auto& c : rep.checks)
            checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        e["checks"] = checks;
        ordered_json recs = ordered_json::array();
        for (const auto& r : rep.records) {
            ordered_json j;
            j["method"] = r.method;
            j["seed"] = r.seed;
            j["P0_dBm"] = r.power_dbm;
            j["num_users"] = r.num_users;
            j["config_hash"] = hex64(r.config_hash);
            j["config"] = r.config_snapshot;
            j["iterations"] = r.rows.size();
            j["converged"] = r.converged;
            j["feasible"] = r.feasible;
            if (r.has_solution) {
                const auto& s = r.solution;
                ordered_json f;
                f["I_r_nats"] = s.radar_mi;
                f["I_e_nats"] = s.eve_mi;
                if (s.eve_mi_bound)
                    f["I_e_bound_nats"] = *s.eve_mi_bound;
                f["gap_nats"] = s.gap();
                f["power_W"] = s.power;
                if (s.an_covariance)
                    f["an_power_W"] = s.an_covariance->trace().real();
                f["sinr_dB"] = ordered_json::array();
                for (double g : s.sinr)
                    f["sinr_dB"].push_back(linear_to_db(g));
                f["rank_one_certificate"] = s.rank_one_certificate;
                j["final"] = f;
            }
            if (rep.spec.kind == ExperimentKind::mc_validate && r.error.empty())
                j["monte_carlo"] = {{"closed_form_nats", r.closed_form},
                                    {"estimate_nats", r.mc_estimate},
                                    {"std_error_nats", r.mc_std_error}};
            j["violations"] = r.violations;
            if (!r.error.empty())
                j["error"] = r.error;
            j["duration_s"] = r.duration_s;
            recs.push_back(j);
        }
        e["records"] = recs;
        exps.push_back(e);
    }
    root["all_passed"] = all;
    root["experiments"] = exps;
    return root.dump(2) + "\n";
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& body)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error("cannot open '" + path.string() + "' for writing");
    f << body;
    f.flush();
    if (!f)
        throw Error("write to '" + path.string() + "' failed");
}

std::string gnuplot_data(const ExperimentReport& rep)
{
    std::ostringstream os;
    switch (rep.spec.kind) {
    case ExperimentKind::convergence: {
        // One data block per (P0, K) case: mean I_r per iteration over seeds.
        for (const auto& c : rep.spec.cases) {
            std::map<int, std::pair<double, int>> acc;
            for (const auto& r : rep.records) {
                if (r.power_dbm != c.power_dbm || r.num_users != c.num_users || !r.error.empty())
                    continue;
                for (const auto& row : r.rows) {
                    auto& a = acc[row.iteration];
                    a.first += row.radar_mi;
                    ++a.second;
                }
            }
            os << "# P0_dBm=" << fmt(c.power_dbm, 6) << " K=" << c.num_users << "\n# iteration mean_I_r_nats runs\n";
            for (const auto& [it, a] : acc)
                os << it << ' ' << fmt(a.first / a.second) << ' ' << a.second << '\n';
            os << "\n\n";
        }
        break;
    }
    case ExperimentKind::power_sweep: {
        const std::vector<std::string> methods =
            rep.spec.sweep_with_an
                ? std::vector<std::string>{kProposed, kProposedAn, kProposedMatched, kBaselineName}
                : std::vector<std::string>{kProposed, kBaselineName};
        os << "# P0_dBm";
        for (const auto& m : methods)
            os << ' ' << m << ":I_r " << m << ":I_e " << m << ":gap";
        os << "\n";
        for (double dbm : rep.spec.power_grid_dbm) {
            os << fmt(dbm, 6);
            for (const auto& m : methods) {
                double ir = 0, ie = 0, gap = 0;
                int n = 0;
                for (const auto& r : rep.records)
                    if (r.method == m && r.power_dbm == dbm && usable(&r)) {
                        ir += r.solution.radar_mi;
                        ie += eve_figure(r.solution);
                        gap += r.solution.gap();
                        ++n;
                    }
                const double nan = std::numeric_limits<double>::quiet_NaN();
                os << ' ' << (n ? fmt(ir / n) : fmt(nan)) << ' ' << (n ? fmt(ie / n) : fmt(nan)) << ' '
                   << (n ? fmt(gap / n) : fmt(nan));
            }
            os << '\n';
        }
        break;
    }
    case ExperimentKind::an_compare: {
        os << "# seed gap_no_an gap_an an_power_W\n";
        for (auto seed : rep.spec.seeds) {
            const RunRecord* n = nullptr;
            const RunRecord* a = nullptr;
            for (const auto& r : rep.records) {
                if (r.seed != seed || !usable(&r))
                    continue;
                (r.method == kProposedAn ? a : n) = &r;
            }
            if (!n || !a)
                continue;
            os << seed << ' ' << fmt(n->solution.gap()) << ' ' << fmt(a->solution.gap()) << ' '
               << fmt(a->solution.an_covariance ? a->solution.an_covariance->trace().real() : 0.0) << '\n';
        }
        break;
    }
    case ExperimentKind::mc_validate: {
        os << "# case closed_form_nats estimate_nats std_error_nats\n";
        for (const auto& r : rep.records)
            if (r.error.empty())
                os << r.method << ' ' << fmt(r.closed_form) << ' ' << fmt(r.mc_estimate) << ' '
                   << fmt(r.mc_std_error) << '\n';
        break;
    }
    }
    return os.str();
}

} // namespace

void emit_report(const std::vector<ExperimentReport>& reports, const std::string& out_dir)
{
    if (reports.empty())
        throw ConfigError("emit_report: no experiment reports");
    for (const auto& r : reports)
        if (r.records.empty())
            throw ConfigError("emit_report: experiment '" + r.experiment + "' has no records");
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
    write_file(dir / "results.csv", render_csv(reports));
    write_file(dir / "summary.json", render_json(reports));
    for (const auto& r : reports)
        write_file(dir / (r.experiment + ".dat"), gnuplot_data(r));
}

} // namespace isac
