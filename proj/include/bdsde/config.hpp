#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/model.hpp"

namespace bdsde {

/// Experiment description parsed from a flat key = value file. Every key
/// is typed and validated before any compute; unknown keys are rejected so
/// a typo cannot silently fall back to a default.
struct ExperimentConfig {
    std::string model_name = "linear-kb";
    // inline coefficients, honored only for model = linear
    double lin_a = -1.0;
    double lin_c = 1.0;
    double rho = 0.5;
    double rho_tilde = 0.0;
    double p0_mean = 0.0;
    double p0_var = 0.25;

    double horizon_T = 0.0; // 0 = model default
    int n_steps = 1000;

    bool grid_auto = true;
    double grid_x_min = -8.0;
    double grid_x_max = 8.0;
    int grid_m = 401;

    int quad_k = 8;
    std::vector<std::uint64_t> seeds = {1};
    std::string out_dir = "out";
    std::vector<int> slices;
    std::string phi = "tanh";
    double fk_x0 = 0.0;
    bool fk_x0_set = false;
    int ks_particles = 100000;

    bool with_kalman_bucy = true;
    bool with_ks = true;
    bool with_fk_check = true;
    bool with_adjoint = true;

    // raw key/value pairs as parsed, echoed into the run manifest
    std::vector<std::pair<std::string, std::string>> raw;

    FilteringModel build_model() const {
        FilteringModel m;
        if (model_name == "linear")
            m = make_linear_model(lin_a, lin_c, rho, rho_tilde, p0_mean, p0_var,
                                  horizon_T > 0.0 ? horizon_T : 1.0);
        else {
            m = make_zoo_model(model_name);
            if (horizon_T > 0.0) m.horizon_T = horizon_T;
        }
        return m;
    }

    SpaceGrid build_grid(const FilteringModel& m) const {
        if (grid_auto) return auto_grid(m, grid_m);
        return SpaceGrid(grid_x_min, grid_x_max, grid_m);
    }

    TimeGrid build_tgrid(const FilteringModel& m) const {
        return TimeGrid(m.horizon_T, n_steps);
    }

    StateFn build_phi() const { return named_phi(phi); }

    static StateFn named_phi(const std::string& name) {
        if (name == "one") return [](double) { return 1.0; };
        if (name == "id" || name == "x") return [](double x) { return x; };
        if (name == "square" || name == "x2") return [](double x) { return x * x; };
        if (name == "tanh") return [](double x) { return std::tanh(x); };
        throw ConfigError("unknown phi '" + name + "' (expected one|id|square|tanh)");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

/// "1,2,5" or "1..20" (inclusive range).
inline std::vector<std::uint64_t> parse_seed_list(const std::string& key,
                                                  const std::string& v) {
    std::vector<std::uint64_t> out;
    const auto dots = v.find("..");
    if (dots != std::string::npos) {
        const long long lo = parse_int(key, trim(v.substr(0, dots)));
        const long long hi = parse_int(key, trim(v.substr(dots + 2)));
        if (lo < 0 || hi < lo)
            throw ConfigError("config key '" + key + "': bad seed range '" + v + "'");
        for (long long s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
        return out;
    }
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const long long s = parse_int(key, item);
        if (s < 0) throw ConfigError("config key '" + key + "': seeds must be >= 0");
        out.push_back(static_cast<std::uint64_t>(s));
    }
    if (out.empty()) throw ConfigError("config key '" + key + "': empty seed list");
    return out;
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    return out;
}

} // namespace detail

/// Parse config text. Lines are `key = value`; '#' starts a comment;
/// duplicate or unknown keys are errors.
inline ExperimentConfig parse_config_text(const std::string& text) {
    static const std::set<std::string> known = {
        "model", "lin_a", "lin_c", "rho", "rho_tilde", "p0_mean", "p0_var",
        "horizon_T", "n_steps", "grid_mode", "grid_x_min", "grid_x_max",
        "grid_m", "quad_k", "seeds", "out_dir", "slices", "phi", "fk_x0",
        "ks_particles", "with_kalman_bucy", "with_ks", "with_fk_check",
        "with_adjoint"};

    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool grid_mode_manual = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (!known.count(key))
            throw ConfigError("unknown config key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("duplicate config key '" + key + "'");
        cfg.raw.emplace_back(key, val);

        if (key == "model") cfg.model_name = val;
        else if (key == "lin_a") cfg.lin_a = detail::parse_double(key, val);
        else if (key == "lin_c") cfg.lin_c = detail::parse_double(key, val);
        else if (key == "rho") cfg.rho = detail::parse_double(key, val);
        else if (key == "rho_tilde") cfg.rho_tilde = detail::parse_double(key, val);
        else if (key == "p0_mean") cfg.p0_mean = detail::parse_double(key, val);
        else if (key == "p0_var") cfg.p0_var = detail::parse_double(key, val);
        else if (key == "horizon_T") cfg.horizon_T = detail::parse_double(key, val);
        else if (key == "n_steps") cfg.n_steps = static_cast<int>(detail::parse_int(key, val));
        else if (key == "grid_mode") {
            if (val == "auto") grid_mode_manual = false;
            else if (val == "manual") grid_mode_manual = true;
            else throw ConfigError("config key 'grid_mode': expected auto|manual");
        }
        else if (key == "grid_x_min") cfg.grid_x_min = detail::parse_double(key, val);
        else if (key == "grid_x_max") cfg.grid_x_max = detail::parse_double(key, val);
        else if (key == "grid_m") cfg.grid_m = static_cast<int>(detail::parse_int(key, val));
        else if (key == "quad_k") cfg.quad_k = static_cast<int>(detail::parse_int(key, val));
        else if (key == "seeds") cfg.seeds = detail::parse_seed_list(key, val);
        else if (key == "out_dir") cfg.out_dir = val;
        else if (key == "slices") cfg.slices = detail::parse_int_list(key, val);
        else if (key == "phi") cfg.phi = val;
        else if (key == "fk_x0") { cfg.fk_x0 = detail::parse_double(key, val); cfg.fk_x0_set = true; }
        else if (key == "ks_particles") cfg.ks_particles = static_cast<int>(detail::parse_int(key, val));
        else if (key == "with_kalman_bucy") cfg.with_kalman_bucy = detail::parse_bool(key, val);
        else if (key == "with_ks") cfg.with_ks = detail::parse_bool(key, val);
        else if (key == "with_fk_check") cfg.with_fk_check = detail::parse_bool(key, val);
        else if (key == "with_adjoint") cfg.with_adjoint = detail::parse_bool(key, val);
    }
    cfg.grid_auto = !grid_mode_manual;

    // cross-field validation, before any compute
    if (cfg.model_name != "linear") {
        static const std::set<std::string> linear_only = {
            "lin_a", "lin_c", "rho", "rho_tilde", "p0_mean", "p0_var"};
        for (const auto& [k, v] : cfg.raw)
            if (linear_only.count(k))
                throw ConfigError("config key '" + k + "' requires model = linear");
        (void)make_zoo_model(cfg.model_name); // throws on unknown name
    }
    if (cfg.n_steps < 2) throw ConfigError("config key 'n_steps': need at least 2 steps");
    if (cfg.horizon_T < 0.0) throw ConfigError("config key 'horizon_T': must be > 0");
    if (cfg.grid_m < 8) throw ConfigError("config key 'grid_m': need at least 8 nodes");
    if (!cfg.grid_auto && !(cfg.grid_x_min < cfg.grid_x_max))
        throw ConfigError("config: grid_x_min must be < grid_x_max");
    if (cfg.quad_k < 1 || cfg.quad_k > 64)
        throw ConfigError("config key 'quad_k': must be in [1, 64]");
    if (cfg.ks_particles < 100)
        throw ConfigError("config key 'ks_particles': need at least 100");
    for (int s : cfg.slices)
        if (s < 0 || s > cfg.n_steps)
            throw ConfigError("config key 'slices': index " + std::to_string(s) +
                              " outside [0, n_steps]");
    ExperimentConfig::named_phi(cfg.phi); // throws on unknown name
    if (cfg.model_name == "linear" && !(cfg.p0_var > 0.0))
        throw ConfigError("config key 'p0_var': must be > 0");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

} // namespace bdsde
