#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bdsde/diagnostics.hpp"
#include "bdsde/errors.hpp"
#include "bdsde/filter.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/oracles.hpp"
#include "bdsde/path.hpp"

#include <json.hpp>

namespace bdsde {

// All numeric output is written with 17 significant digits, enough to
// round-trip IEEE doubles, so reruns with the same config and seed produce
// byte-identical files.

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

} // namespace detail

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "' for checksum");
    std::stringstream ss;
    ss << in.rdbuf();
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(ss.str())));
    return std::string("fnv1a64:") + buf;
}

/// Columns t, U, V, dW, dB. The increment columns hold the increment over
/// [t_n, t_{n+1}]; the final row carries zeros there.
inline void write_path_csv(const std::string& path, const PathBundle& b) {
    auto out = detail::open_out(path);
    out << "t,U,V,dW,dB\n";
    const int n = b.tgrid.n_steps;
    for (int i = 0; i <= n; ++i) {
        const double dw = (i < n) ? b.dW[static_cast<std::size_t>(i)] : 0.0;
        const double db = (i < n) ? b.dB[static_cast<std::size_t>(i)] : 0.0;
        out << detail::fmt(b.tgrid.time(i)) << ',' << detail::fmt(b.truth_u[static_cast<std::size_t>(i)])
            << ',' << detail::fmt(b.obs_v[static_cast<std::size_t>(i)]) << ',' << detail::fmt(dw) << ','
            << detail::fmt(db) << '\n';
    }
}

/// Columns x, value.
inline void write_field_csv(const std::string& path, const GridField& f) {
    auto out = detail::open_out(path);
    out << "x,value\n";
    for (int j = 0; j < f.grid().m; ++j)
        out << detail::fmt(f.grid().node(j)) << ',' << detail::fmt(f.values()[static_cast<std::size_t>(j)])
            << '\n';
}

/// Columns x, value, log_scale (log_scale constant down the file).
inline void write_density_csv(const std::string& path, const GridField& f,
                              double log_scale) {
    auto out = detail::open_out(path);
    out << "x,value,log_scale\n";
    for (int j = 0; j < f.grid().m; ++j)
        out << detail::fmt(f.grid().node(j)) << ',' << detail::fmt(f.values()[static_cast<std::size_t>(j)])
            << ',' << detail::fmt(log_scale) << '\n';
}

struct SummaryRow {
    double t = 0.0;
    double post_mean = 0.0;
    double post_var = 0.0;
    double mass = 0.0;
    double min_density = 0.0;
};

inline void write_summary_csv(const std::string& path,
                              const std::vector<SummaryRow>& rows) {
    auto out = detail::open_out(path);
    out << "t,post_mean,post_var,mass,min_density\n";
    for (const auto& r : rows)
        out << detail::fmt(r.t) << ',' << detail::fmt(r.post_mean) << ','
            << detail::fmt(r.post_var) << ',' << detail::fmt(r.mass) << ','
            << detail::fmt(r.min_density) << '\n';
}

/// Filter summary: posterior mean/variance, scale-corrected mass and
/// minimum density value per step.
inline std::vector<SummaryRow> filter_summary(const FilterRun& run) {
    std::vector<SummaryRow> rows;
    rows.reserve(run.fields_ybar.size());
    for (int n = 0; n <= run.tgrid.n_steps; ++n) {
        SummaryRow r;
        r.t = run.tgrid.time(n);
        const auto [mean, var] = posterior_moments(run, n);
        r.post_mean = mean;
        r.post_var = var;
        r.mass = field_mass(run.ybar(n)) * run.scale_factor(n);
        r.min_density = field_min_max(run.ybar(n)).first * run.scale_factor(n);
        rows.push_back(r);
    }
    return rows;
}

inline std::vector<SummaryRow> kalman_summary(const KalmanBucyPath& kb) {
    std::vector<SummaryRow> rows;
    rows.reserve(kb.times.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < kb.times.size(); ++i)
        rows.push_back({kb.times[i], kb.mean[i], kb.variance[i], nan, nan});
    return rows;
}

/// Columns t, R, relative_drift.
inline void write_trace_csv(const std::string& path, const AdjointTrace& tr) {
    auto out = detail::open_out(path);
    out << "t,R,relative_drift\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        out << detail::fmt(tr.times[i]) << ',' << detail::fmt(tr.pairing[i]) << ','
            << detail::fmt(tr.relative_drift[i]) << '\n';
}

/// Run manifest: config echo, code version and a checksum per output file.
/// Written last so the checksums cover final file contents.
inline void write_manifest(const std::string& dir, const std::string& command,
                           const std::vector<std::pair<std::string, std::string>>& config_echo,
                           const std::vector<std::string>& files,
                           const char* version) {
    nlohmann::json j;
    j["version"] = version;
    j["command"] = command;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : config_echo) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::json fs = nlohmann::json::object();
    for (const auto& f : files)
        fs[f] = file_checksum((std::filesystem::path(dir) / f).string());
    j["files"] = fs;
    auto out = detail::open_out((std::filesystem::path(dir) / "manifest.json").string());
    out << j.dump(2) << '\n';
}

/// Re-read a manifest and verify every recorded checksum. Returns the list
/// of mismatched files (empty = verified).
inline std::vector<std::string> verify_manifest(const std::string& dir) {
    const auto mpath = std::filesystem::path(dir) / "manifest.json";
    std::ifstream in(mpath);
    if (!in) throw IoError("cannot open manifest '" + mpath.string() + "'");
    nlohmann::json j;
    in >> j;
    std::vector<std::string> bad;
    for (const auto& [name, sum] : j.at("files").items())
        if (file_checksum((std::filesystem::path(dir) / name).string()) !=
            sum.get<std::string>())
            bad.push_back(name);
    return bad;
}

} // namespace bdsde
