#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/grid.hpp"

namespace bdsde {

using TimeFn = std::function<double(double)>;          // t -> value
using StateFn = std::function<double(double)>;         // x -> value
using DriftFn = std::function<double(double, double)>; // (t, x) -> value

/// A one-dimensional partially observed diffusion:
///     dU = b_t(U) dt + rho_t dW + rho_tilde_t dB,
///     dV = h(U) dt + dB,
/// with initial density p0 and horizon T. Derivatives of b and h are
/// supplied analytically; validate() cross-checks them against finite
/// differences, since a silently wrong derivative is the most likely
/// user error.
struct FilteringModel {
    DriftFn drift_b;
    DriftFn drift_b_prime; // d b / dx
    TimeFn rho;
    TimeFn rho_tilde;
    StateFn obs_h;
    StateFn obs_h_prime;
    StateFn obs_h_second;
    StateFn p0;
    double horizon_T = 1.0;

    // Location/scale of p0, used by the auto-sized grid. For the built-in
    // models these are the exact Gaussian parameters.
    double p0_mean = 0.0;
    double p0_stdev = 1.0;

    // When set, the initial state is the deterministic point p0_point and
    // p0 is ignored by path simulation and particle starts.
    std::optional<double> p0_point;

    std::string name = "custom";
};

/// Uniform partition of [0, T] into n_steps intervals.
struct TimeGrid {
    int n_steps = 2;
    double horizon = 1.0;

    TimeGrid() = default;
    TimeGrid(double T, int steps) : n_steps(steps), horizon(T) {
        if (!(T > 0.0)) throw ConfigError("TimeGrid: horizon must be > 0");
        if (steps < 2) throw ConfigError("TimeGrid: need at least 2 steps");
    }

    double dt() const { return horizon / n_steps; }
    double time(int n) const { return n * dt(); }

    bool operator==(const TimeGrid& o) const {
        return n_steps == o.n_steps && horizon == o.horizon;
    }
};

/// Total diffusion scale sigma_t = sqrt(rho_t^2 + rho_tilde_t^2).
/// Both grid schemes divide by sigma, so a degenerate value is an error.
inline double sigma(const FilteringModel& model, double t) {
    const double r = model.rho(t);
    const double rt = model.rho_tilde(t);
    const double s = std::sqrt(r * r + rt * rt);
    if (!(s >= 1e-12))
        throw NumericError("sigma: degenerate diffusion (sigma < 1e-12) at t=" +
                           std::to_string(t));
    return s;
}

/// One validation finding: a stable machine-readable code plus a human
/// message.
struct Violation {
    std::string code;
    std::string message;
};

namespace detail {

inline bool deriv_mismatch(double analytic, double centered, double scale) {
    const double tol = 1e-6 * std::max({1.0, std::abs(analytic), scale});
    return std::abs(analytic - centered) > tol;
}

} // namespace detail

/// Diagnostic sweep over the model on the given grid. Returns a list of
/// violations; empty means the model satisfies everything the solvers
/// assume. Codes: degenerate-diffusion, nan-probe, bad-horizon, p0-mass,
/// p0-negative, derivative-mismatch.
inline std::vector<Violation> validate(const FilteringModel& model,
                                       const SpaceGrid& grid) {
    std::vector<Violation> bad;

    // sigma > 0 along the horizon
    bool degenerate = false, sigma_nan = false;
    for (int i = 0; i <= 256; ++i) {
        const double t = model.horizon_T * i / 256.0;
        const double r = model.rho(t);
        const double rt = model.rho_tilde(t);
        if (!std::isfinite(r) || !std::isfinite(rt)) {
            sigma_nan = true;
            break;
        }
        if (std::sqrt(r * r + rt * rt) < 1e-12) degenerate = true;
    }
    if (sigma_nan)
        bad.push_back({"nan-probe", "noise coefficients produce NaN/Inf"});
    if (degenerate)
        bad.push_back({"degenerate-diffusion", "degenerate diffusion: sigma < 1e-12 on [0,T]"});

    if (!(model.horizon_T > 0.0))
        bad.push_back({"bad-horizon", "horizon_T must be > 0"});

    // p0 mass on the grid
    double mass = 0.0;
    bool p0_nan = false, p0_negative = false;
    for (int j = 0; j < grid.m; ++j) {
        const double v = model.p0(grid.node(j));
        if (!std::isfinite(v)) {
            p0_nan = true;
            break;
        }
        if (v < 0.0) p0_negative = true;
        const double w = (j == 0 || j == grid.m - 1) ? 0.5 : 1.0;
        mass += w * v;
    }
    mass *= grid.dx();
    if (p0_nan)
        bad.push_back({"nan-probe", "p0 produces NaN/Inf on the grid"});
    else {
        if (p0_negative)
            bad.push_back({"p0-negative", "p0 takes negative values on the grid"});
        if (!(mass > 0.0))
            bad.push_back({"p0-mass", "p0 mass on the grid is <= 0"});
    }

    // derivative probes: 64 points spread over the grid
    const double probe_step = 1e-5 * std::max(1.0, grid.x_max - grid.x_min) / 16.0;
    bool h1_bad = false, h2_bad = false, b1_bad = false, probe_nan = false;
    for (int i = 0; i < 64; ++i) {
        const double x = grid.x_min + (grid.x_max - grid.x_min) * (i + 0.5) / 64.0;
        const double d = probe_step;
        const double hp = (model.obs_h(x + d) - model.obs_h(x - d)) / (2.0 * d);
        const double hpp = (model.obs_h_prime(x + d) - model.obs_h_prime(x - d)) / (2.0 * d);
        const double t_mid = 0.5 * model.horizon_T;
        const double bp = (model.drift_b(t_mid, x + d) - model.drift_b(t_mid, x - d)) / (2.0 * d);
        const double scale_h = std::abs(model.obs_h(x));
        const double scale_b = std::abs(model.drift_b(t_mid, x));
        if (!std::isfinite(hp) || !std::isfinite(hpp) || !std::isfinite(bp) ||
            !std::isfinite(model.obs_h_prime(x)) ||
            !std::isfinite(model.obs_h_second(x)) ||
            !std::isfinite(model.drift_b_prime(t_mid, x))) {
            probe_nan = true;
            break;
        }
        if (detail::deriv_mismatch(model.obs_h_prime(x), hp, scale_h)) h1_bad = true;
        if (detail::deriv_mismatch(model.obs_h_second(x), hpp, scale_h)) h2_bad = true;
        if (detail::deriv_mismatch(model.drift_b_prime(t_mid, x), bp, scale_b)) b1_bad = true;
    }
    if (probe_nan)
        bad.push_back({"nan-probe", "derivative probes produce NaN/Inf"});
    if (h1_bad)
        bad.push_back({"derivative-mismatch",
                       "derivative mismatch: obs_h_prime vs finite difference of obs_h"});
    if (h2_bad)
        bad.push_back({"derivative-mismatch",
                       "derivative mismatch: obs_h_second vs finite difference of obs_h_prime"});
    if (b1_bad)
        bad.push_back({"derivative-mismatch",
                       "derivative mismatch: drift_b_prime vs finite difference of drift_b"});

    return bad;
}

/// What a caller needs from the model. The grid schemes divide by sigma, so
/// they refuse degenerate diffusion; plain path simulation and particle
/// transport are well defined without noise, and a point-mass start does
/// not read p0 at all.
enum class ValidationMode { Solver, Simulation };

inline void require_valid(const FilteringModel& model, const SpaceGrid& grid,
                          ValidationMode mode = ValidationMode::Solver) {
    auto bad = validate(model, grid);
    if (mode == ValidationMode::Simulation) {
        std::erase_if(bad, [&](const Violation& v) {
            if (v.code == "degenerate-diffusion") return true;
            if (model.p0_point && (v.code == "p0-mass" || v.code == "p0-negative" ||
                                   v.message.find("p0") != std::string::npos))
                return true;
            return false;
        });
    }
    if (!bad.empty()) {
        std::string msg = "model '" + model.name + "' failed validation:";
        for (const auto& b : bad) msg += "\n  - " + b.message;
        throw ConfigError(msg);
    }
}

/// Grid sized to hold the prior plus diffusion spread over the horizon:
/// [mean(p0) +- 8 (stdev(p0) + sigma_max sqrt(T))]. Keeps Gaussian mass
/// loss at the boundary far below the solver tolerances.
inline SpaceGrid auto_grid(const FilteringModel& model, int m = 401) {
    double sigma_max = 0.0;
    for (int i = 0; i <= 256; ++i) {
        const double t = model.horizon_T * i / 256.0;
        const double r = model.rho(t);
        const double rt = model.rho_tilde(t);
        sigma_max = std::max(sigma_max, std::sqrt(r * r + rt * rt));
    }
    const double half =
        8.0 * (model.p0_stdev + sigma_max * std::sqrt(model.horizon_T));
    return SpaceGrid(model.p0_mean - half, model.p0_mean + half, m);
}

inline StateFn gaussian_density(double mean, double variance) {
    if (!(variance > 0.0)) throw ConfigError("gaussian_density: variance must be > 0");
    const double inv2v = 0.5 / variance;
    const double norm = 1.0 / std::sqrt(2.0 * M_PI * variance);
    return [=](double x) {
        const double d = x - mean;
        return norm * std::exp(-d * d * inv2v);
    };
}

/// Linear-Gaussian model dU = a U dt + rho dW + rho_tilde dB, h(x) = c x,
/// p0 = Normal(m0, v0).
inline FilteringModel make_linear_model(double a, double c, double rho,
                                        double rho_tilde, double m0, double v0,
                                        double T, std::string name = "linear") {
    FilteringModel mod;
    mod.drift_b = [a](double, double x) { return a * x; };
    mod.drift_b_prime = [a](double, double) { return a; };
    mod.rho = [rho](double) { return rho; };
    mod.rho_tilde = [rho_tilde](double) { return rho_tilde; };
    mod.obs_h = [c](double x) { return c * x; };
    mod.obs_h_prime = [c](double) { return c; };
    mod.obs_h_second = [](double) { return 0.0; };
    mod.p0 = gaussian_density(m0, v0);
    mod.p0_mean = m0;
    mod.p0_stdev = std::sqrt(v0);
    mod.horizon_T = T;
    mod.name = std::move(name);
    return mod;
}

/// Built-in model zoo:
///   linear-kb       a=-1, c=1, rho=0.5, rho_tilde=0, p0=N(0,0.25), T=1.
///                   Kalman-Bucy comparable. h(x)=x is unbounded, outside
///                   the boundedness assumptions behind the probabilistic
///                   representation; kept for exact-oracle comparisons
///                   (see README).
///   linear-corr     same but rho=0.4, rho_tilde=0.3 (correlated noise).
///   nonlinear-tanh  b=sin(x), h=tanh(x), rho=0.4, rho_tilde=0.3,
///                   p0=N(0,0.25), T=0.5. Bounded coefficients.
///   heat-gauss      b=0, h=0, rho=1, rho_tilde=0, p0=N(0,0.25), T=0.5.
///                   Degenerate-observation benchmark (pure diffusion).
inline FilteringModel make_zoo_model(const std::string& name) {
    if (name == "linear-kb")
        return make_linear_model(-1.0, 1.0, 0.5, 0.0, 0.0, 0.25, 1.0, name);
    if (name == "linear-corr")
        return make_linear_model(-1.0, 1.0, 0.4, 0.3, 0.0, 0.25, 1.0, name);
    if (name == "nonlinear-tanh") {
        FilteringModel mod;
        mod.drift_b = [](double, double x) { return std::sin(x); };
        mod.drift_b_prime = [](double, double x) { return std::cos(x); };
        mod.rho = [](double) { return 0.4; };
        mod.rho_tilde = [](double) { return 0.3; };
        mod.obs_h = [](double x) { return std::tanh(x); };
        mod.obs_h_prime = [](double x) {
            const double c = std::cosh(x);
            return 1.0 / (c * c);
        };
        mod.obs_h_second = [](double x) {
            const double t = std::tanh(x);
            const double c = std::cosh(x);
            return -2.0 * t / (c * c);
        };
        mod.p0 = gaussian_density(0.0, 0.25);
        mod.p0_mean = 0.0;
        mod.p0_stdev = 0.5;
        mod.horizon_T = 0.5;
        mod.name = name;
        return mod;
    }
    if (name == "heat-gauss") {
        FilteringModel mod;
        mod.drift_b = [](double, double) { return 0.0; };
        mod.drift_b_prime = [](double, double) { return 0.0; };
        mod.rho = [](double) { return 1.0; };
        mod.rho_tilde = [](double) { return 0.0; };
        mod.obs_h = [](double) { return 0.0; };
        mod.obs_h_prime = [](double) { return 0.0; };
        mod.obs_h_second = [](double) { return 0.0; };
        mod.p0 = gaussian_density(0.0, 0.25);
        mod.p0_mean = 0.0;
        mod.p0_stdev = 0.5;
        mod.horizon_T = 0.5;
        mod.name = name;
        return mod;
    }
    throw ConfigError("unknown zoo model '" + name + "'");
}

inline std::vector<std::string> zoo_names() {
    return {"linear-kb", "linear-corr", "nonlinear-tanh", "heat-gauss"};
}

} // namespace bdsde
