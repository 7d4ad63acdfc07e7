// SPDX-License-Identifier: Apache-2.0
#include "isac/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "isac/errors.hpp"

namespace isac {

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }
double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double ratio) { return 10.0 * std::log10(ratio); }
double deg_to_rad(double deg) { return deg * kPi / 180.0; }

ScenarioConfig::ScenarioConfig()
{
    user_aoa_rad = {deg_to_rad(20.0), deg_to_rad(70.0), deg_to_rad(110.0), deg_to_rad(35.0)};
    radar_targets = {{deg_to_rad(45.0), 1.0}, {deg_to_rad(90.0), 1.0}};
    eve_targets = {{deg_to_rad(145.0), 1.0}};
}

void ScenarioConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (n_tx < 1 || n_rx < 1 || n_eve < 1)
        fail("antenna counts must be >= 1");
    if (num_users < 1)
        fail("num_users must be >= 1");
    if (frame_len < 1 || an_frame_len < 1)
        fail("frame lengths must be >= 1");
    if (!(power_budget_w > 0.0))
        fail("power budget must be positive");
    if (sinr_threshold.empty() || (sinr_threshold.size() != 1 && static_cast<Index>(sinr_threshold.size()) != num_users))
        fail("sinr threshold list must have 1 or num_users entries");
    for (double g : sinr_threshold)
        if (!(g > 0.0))
            fail("sinr thresholds must be positive");
    if (!(eve_mi_cap > 0.0))
        fail("eve_mi_cap must be positive");
    if (!(noise_comm > 0.0) || !(noise_radar > 0.0) || !(noise_eve > 0.0))
        fail("noise powers must be positive");
    if (rician_factor.empty() || (rician_factor.size() != 1 && static_cast<Index>(rician_factor.size()) < num_users))
        fail("rician factor list must have 1 or >= num_users entries");
    for (double kf : rician_factor)
        if (kf < 0.0)
            fail("rician factors must be >= 0");
    if (static_cast<Index>(user_aoa_rad.size()) < num_users)
        fail("need one user AoA per user");
    for (double a : user_aoa_rad)
        if (a < 0.0 || a > kPi)
            fail("user AoA outside [0, 180] degrees");
    if (radar_targets.empty() || eve_targets.empty())
        fail("radar and eve target lists must be nonempty");
    for (const auto* list : {&radar_targets, &eve_targets})
        for (const auto& t : *list)
            if (t.angle_rad < 0.0 || t.angle_rad > kPi || !(t.gain > 0.0))
                fail("targets need angle in [0, 180] degrees and positive gain");
    if (loading_rel < 0.0)
        fail("loading_rel must be >= 0");
    if (!(penalty_init > 0.0) || !(penalty_growth > 1.0))
        fail("penalty_init must be > 0 and penalty_growth > 1");
    if (max_outer_iters < 1)
        fail("max_outer_iters must be >= 1");
    if (!(tol_obj > 0.0) || !(tol_pen > 0.0))
        fail("tolerances must be positive");
    if (an_samples < 1)
        fail("an_samples must be >= 1");
    if (randomization_candidates < 1)
        fail("randomization_candidates must be >= 1");
}

double ScenarioConfig::sinr_for(Index user) const
{
    return sinr_threshold.size() == 1 ? sinr_threshold[0] : sinr_threshold.at(user);
}

double ScenarioConfig::rician_for(Index user) const
{
    return rician_factor.size() == 1 ? rician_factor[0] : rician_factor.at(user);
}

namespace {

void put(std::ostringstream& os, const char* key, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << key << '=' << buf << '\n';
}

void put_list(std::ostringstream& os, const char* key, const std::vector<double>& v)
{
    os << key << '=';
    for (std::size_t i = 0; i < v.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        os << (i ? "," : "") << buf;
    }
    os << '\n';
}

std::vector<double> angles_of(const std::vector<PointTarget>& t)
{
    std::vector<double> out;
    for (const auto& x : t)
        out.push_back(x.angle_rad);
    return out;
}

std::vector<double> gains_of(const std::vector<PointTarget>& t)
{
    std::vector<double> out;
    for (const auto& x : t)
        out.push_back(x.gain);
    return out;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string ScenarioConfig::canonical_string() const
{
    std::ostringstream os;
    put(os, "n_tx", static_cast<double>(n_tx));
    put(os, "n_rx", static_cast<double>(n_rx));
    put(os, "n_eve", static_cast<double>(n_eve));
    put(os, "num_users", static_cast<double>(num_users));
    put(os, "frame_len", static_cast<double>(frame_len));
    put(os, "power_budget_w", power_budget_w);
    put_list(os, "sinr_threshold", sinr_threshold);
    put(os, "eve_mi_cap", eve_mi_cap);
    put(os, "noise_comm", noise_comm);
    put(os, "noise_radar", noise_radar);
    put(os, "noise_eve", noise_eve);
    put_list(os, "rician_factor", rician_factor);
    put_list(os, "user_aoa_rad", user_aoa_rad);
    put_list(os, "radar_target_rad", angles_of(radar_targets));
    put_list(os, "radar_target_gain", gains_of(radar_targets));
    put_list(os, "eve_target_rad", angles_of(eve_targets));
    put_list(os, "eve_target_gain", gains_of(eve_targets));
    put(os, "loading_rel", loading_rel);
    put(os, "penalty_init", penalty_init);
    put(os, "penalty_growth", penalty_growth);
    put(os, "max_outer_iters", max_outer_iters);
    put(os, "tol_obj", tol_obj);
    put(os, "tol_pen", tol_pen);
    put(os, "rho_cap", rho_cap);
    put(os, "kappa_cap", kappa_cap);
    put(os, "randomization_candidates", randomization_candidates);
    put(os, "an_samples", an_samples);
    put(os, "an_frame_len", static_cast<double>(an_frame_len));
    put(os, "an_collapse_lmi", an_collapse_lmi ? 1.0 : 0.0);
    put(os, "solver_feas_tol", solver_feas_tol);
    put(os, "solver_obj_tol", solver_obj_tol);
    put(os, "solver_max_newton", solver_max_newton);
    os << "seed=" << seed << '\n';
    return os.str();
}

std::uint64_t fnv1a64(const std::string& text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t ScenarioConfig::hash() const { return fnv1a64(canonical_string()); }

KeyValueFile KeyValueFile::parse(const std::string& text)
{
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (kv.values_.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.values_[key] = value;
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) != 0; }

std::optional<std::string> KeyValueFile::raw(const std::string& key)
{
    auto it = values_.find(key);
    if (it == values_.end())
        return std::nullopt;
    used_.insert(key);
    return it->second;
}

std::optional<double> KeyValueFile::number(const std::string& key)
{
    auto v = raw(key);
    if (!v)
        return std::nullopt;
    try {
        std::size_t pos = 0;
        double d = std::stod(*v, &pos);
        if (trim(v->substr(pos)).empty())
            return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': not a number: " + *v);
}

std::optional<std::int64_t> KeyValueFile::integer(const std::string& key)
{
    auto d = number(key);
    if (!d)
        return std::nullopt;
    if (std::floor(*d) != *d)
        throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<std::int64_t>(*d);
}

std::optional<bool> KeyValueFile::boolean(const std::string& key)
{
    auto v = raw(key);
    if (!v)
        return std::nullopt;
    if (*v == "true" || *v == "1" || *v == "yes")
        return true;
    if (*v == "false" || *v == "0" || *v == "no")
        return false;
    throw ConfigError("config key '" + key + "': expected a boolean");
}

std::optional<std::vector<double>> KeyValueFile::numbers(const std::string& key)
{
    auto v = raw(key);
    if (!v)
        return std::nullopt;
    std::vector<double> out;
    std::istringstream in(*v);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty())
            continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (!trim(item.substr(pos)).empty())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': bad list entry '" + item + "'");
        }
    }
    if (out.empty())
        throw ConfigError("config key '" + key + "': empty list");
    return out;
}

void KeyValueFile::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::vector<std::string> KeyValueFile::unused_keys() const
{
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!used_.count(k))
            out.push_back(k);
    return out;
}

const std::vector<std::pair<std::string, std::string>>& scenario_key_docs()
{
    static const std::vector<std::pair<std::string, std::string>> docs = {
        {"n_tx", "transmit antennas (count)"},
        {"n_rx", "legitimate radar receive antennas (count)"},
        {"n_eve", "eavesdropper receive antennas (count)"},
        {"num_users", "communication users K (count)"},
        {"frame_len", "frame length L (slots)"},
        {"power_dbm", "transmit power budget P0 (dBm)"},
        {"sinr_db", "SINR threshold(s) (dB); one value or one per user"},
        {"eve_mi_cap_nats", "Eve sensing-MI cap epsilon (nats)"},
        {"noise_comm_dbm", "user noise power (dBm)"},
        {"noise_radar_dbm", "legitimate radar noise power (dBm)"},
        {"noise_eve_dbm", "Eve noise power (dBm)"},
        {"rician_factor", "Rician factor(s), linear; one value or one per user"},
        {"user_aoa_deg", "user LoS angles of arrival (degrees, 0..180)"},
        {"radar_target_deg", "legitimate-receiver target angles (degrees)"},
        {"radar_target_gain", "legitimate-receiver target amplitudes (linear)"},
        {"eve_target_deg", "Eve target angles (degrees)"},
        {"eve_target_gain", "Eve target amplitudes (linear)"},
        {"loading_rel", "diagonal loading of R_h relative to trace/dim"},
        {"penalty_init", "initial penalty weight"},
        {"penalty_growth", "penalty growth factor per outer iteration (> 1)"},
        {"max_outer_iters", "maximum outer SCA iterations"},
        {"tol_obj", "outer objective-change tolerance (nats)"},
        {"tol_pen", "outer penalty tolerance"},
        {"randomization_candidates", "Gaussian randomization candidates"},
        {"an_samples", "Eve channel samples J for the AN design"},
        {"an_frame_len", "frame length used by the AN design (slots)"},
        {"an_collapse_lmi", "collapse the block-diagonal AN LMI (true/false)"},
        {"solver_feas_tol", "conic solver feasibility tolerance"},
        {"solver_obj_tol", "conic solver duality-gap tolerance"},
        {"solver_max_newton", "conic solver Newton step cap"},
        {"seed", "base random seed (u64)"},
    };
    return docs;
}

ScenarioConfig apply_scenario_keys(KeyValueFile& kv, ScenarioConfig cfg)
{
    if (auto v = kv.integer("n_tx")) cfg.n_tx = *v;
    if (auto v = kv.integer("n_rx")) cfg.n_rx = *v;
    if (auto v = kv.integer("n_eve")) cfg.n_eve = *v;
    if (auto v = kv.integer("num_users")) cfg.num_users = *v;
    if (auto v = kv.integer("frame_len")) cfg.frame_len = *v;
    if (auto v = kv.number("power_dbm")) cfg.power_budget_w = dbm_to_watts(*v);
    if (auto v = kv.numbers("sinr_db")) {
        cfg.sinr_threshold.clear();
        for (double db : *v)
            cfg.sinr_threshold.push_back(db_to_linear(db));
    }
    if (auto v = kv.number("eve_mi_cap_nats")) cfg.eve_mi_cap = *v;
    if (auto v = kv.number("noise_comm_dbm")) cfg.noise_comm = dbm_to_watts(*v);
    if (auto v = kv.number("noise_radar_dbm")) cfg.noise_radar = dbm_to_watts(*v);
    if (auto v = kv.number("noise_eve_dbm")) cfg.noise_eve = dbm_to_watts(*v);
    if (auto v = kv.numbers("rician_factor")) cfg.rician_factor = *v;
    if (auto v = kv.numbers("user_aoa_deg")) {
        cfg.user_aoa_rad.clear();
        for (double d : *v)
            cfg.user_aoa_rad.push_back(deg_to_rad(d));
    }
    auto targets = [&](const char* angle_key, const char* gain_key, std::vector<PointTarget>& out) {
        auto angles = kv.numbers(angle_key);
        auto gains = kv.numbers(gain_key);
        if (!angles && !gains)
            return;
        std::vector<double> a = angles ? *angles : angles_of(out);
        std::vector<double> g = gains ? *gains : std::vector<double>(a.size(), 1.0);
        if (angles && !gains && a.size() != out.size())
            g.assign(a.size(), 1.0);
        if (a.size() != g.size())
            throw ConfigError(std::string("config: ") + angle_key + " and " + gain_key + " lengths differ");
        out.clear();
        for (std::size_t i = 0; i < a.size(); ++i)
            out.push_back({angles ? deg_to_rad(a[i]) : a[i], g[i]});
    };
    targets("radar_target_deg", "radar_target_gain", cfg.radar_targets);
    targets("eve_target_deg", "eve_target_gain", cfg.eve_targets);
    if (auto v = kv.number("loading_rel")) cfg.loading_rel = *v;
    if (auto v = kv.number("penalty_init")) cfg.penalty_init = *v;
    if (auto v = kv.number("penalty_growth")) cfg.penalty_growth = *v;
    if (auto v = kv.integer("max_outer_iters")) cfg.max_outer_iters = static_cast<int>(*v);
    if (auto v = kv.number("tol_obj")) cfg.tol_obj = *v;
    if (auto v = kv.number("tol_pen")) cfg.tol_pen = *v;
    if (auto v = kv.integer("randomization_candidates")) cfg.randomization_candidates = static_cast<int>(*v);
    if (auto v = kv.integer("an_samples")) cfg.an_samples = static_cast<int>(*v);
    if (auto v = kv.integer("an_frame_len")) cfg.an_frame_len = *v;
    if (auto v = kv.boolean("an_collapse_lmi")) cfg.an_collapse_lmi = *v;
    if (auto v = kv.number("solver_feas_tol")) cfg.solver_feas_tol = *v;
    if (auto v = kv.number("solver_obj_tol")) cfg.solver_obj_tol = *v;
    if (auto v = kv.integer("solver_max_newton")) cfg.solver_max_newton = static_cast<int>(*v);
    if (auto v = kv.raw("seed")) {
        try {
            cfg.seed = std::stoull(*v);
        } catch (const std::exception&) {
            throw ConfigError("config key 'seed': expected an unsigned integer");
        }
    }
    cfg.validate();
    return cfg;
}

} // namespace isac
