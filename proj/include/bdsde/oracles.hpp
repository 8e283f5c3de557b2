#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/model.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/path.hpp"
#include "bdsde/rng.hpp"

namespace bdsde {

/// Exact linear-Gaussian filter path (conditional mean and variance),
/// Euler-integrated on the observation grid.
struct KalmanBucyPath {
    std::vector<double> times;
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Closed-form filter for dU = a U dt + rho dW, dV = c U dt + dB:
///   dP = (2 a P + rho^2 - c^2 P^2) dt,
///   dm = a m dt + P c (dV - c m dt).
/// The variance path is deterministic (independent of the observations).
inline KalmanBucyPath kalman_bucy(double a, double c, double rho, double m0,
                                  double p0, const PathBundle& obs) {
    const int n = obs.tgrid.n_steps;
    const double dt = obs.tgrid.dt();
    KalmanBucyPath out;
    out.times.resize(static_cast<std::size_t>(n) + 1);
    out.mean.resize(static_cast<std::size_t>(n) + 1);
    out.variance.resize(static_cast<std::size_t>(n) + 1);
    out.times[0] = 0.0;
    out.mean[0] = m0;
    out.variance[0] = p0;
    for (int i = 0; i < n; ++i) {
        const double m = out.mean[static_cast<std::size_t>(i)];
        const double P = out.variance[static_cast<std::size_t>(i)];
        const double dv = obs.delta_v(i);
        out.mean[static_cast<std::size_t>(i) + 1] =
            m + a * m * dt + P * c * (dv - c * m * dt);
        out.variance[static_cast<std::size_t>(i) + 1] =
            P + (2.0 * a * P + rho * rho - c * c * P * P) * dt;
        out.times[static_cast<std::size_t>(i) + 1] = obs.tgrid.time(i + 1);
    }
    return out;
}

/// Weighted Monte Carlo estimate with its delta-method standard error.
struct KSEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int n_particles = 0;
    double effective_sample_size = 0.0;
    bool degenerate_weights = false;
};

/// Particle start: either the model's initial density or a point mass.
struct KSStart {
    static KSStart density() { return {}; }
    static KSStart point(double x) {
        KSStart s;
        s.x0 = x;
        return s;
    }
    std::optional<double> x0;
};

namespace detail {

/// Terminal states and log-weights of the reference-measure particle
/// system. The observation path is an exogenous driver: substituting
/// dB = dV - h dt into the state equation gives
///   dU = (b(U) - rho_tilde h(U)) dt + rho dW + rho_tilde dV,
/// and the likelihood weight accumulates log Q = sum h(U_n) dV_n
/// - 1/2 h(U_n)^2 dt along the path.
struct ParticleCloud {
    std::vector<double> terminal;
    std::vector<double> log_weight;
};

inline ParticleCloud run_particles(const FilteringModel& model,
                                   const PathBundle& obs, int n_particles,
                                   std::uint64_t seed, const KSStart& start,
                                   const SpaceGrid& init_grid) {
    const int n = obs.tgrid.n_steps;
    const double dt = obs.tgrid.dt();
    const double sqrt_dt = std::sqrt(dt);

    ParticleCloud cloud;
    cloud.terminal.resize(static_cast<std::size_t>(n_particles));
    cloud.log_weight.resize(static_cast<std::size_t>(n_particles));

    parallel_for(n_particles, [&](int p) {
        const std::uint64_t stream = kStreamParticle0 + static_cast<std::uint64_t>(p);
        double u;
        if (start.x0)
            u = *start.x0;
        else
            u = sample_initial_state(model, init_grid, uniform_at(seed, stream, 0));
        double logw = 0.0;
        for (int i = 0; i < n; ++i) {
            const double t = obs.tgrid.time(i);
            const double h = model.obs_h(u);
            const double dv = obs.delta_v(i);
            logw += h * dv - 0.5 * h * h * dt;
            const double xi = normal_at(seed, stream, static_cast<std::uint64_t>(i) + 1);
            u += (model.drift_b(t, u) - model.rho_tilde(t) * h) * dt +
                 model.rho(t) * sqrt_dt * xi + model.rho_tilde(t) * dv;
        }
        cloud.terminal[static_cast<std::size_t>(p)] = u;
        cloud.log_weight[static_cast<std::size_t>(p)] = logw;
    });
    return cloud;
}

} // namespace detail

/// Normalized estimate of E[phi(U_T) | observations] by the weighted-ratio
/// form: sum w phi / sum w over reference-measure particles.
inline KSEstimate ks_monte_carlo(const FilteringModel& model,
                                 const PathBundle& obs, const StateFn& phi,
                                 int n_particles, std::uint64_t seed,
                                 const KSStart& start = KSStart::density(),
                                 const SpaceGrid* init_grid = nullptr) {
    if (n_particles < 100)
        throw ConfigError("ks_monte_carlo: need at least 100 particles");
    const SpaceGrid grid = init_grid ? *init_grid : auto_grid(model);
    require_valid(model, grid, ValidationMode::Simulation);
    const auto cloud = detail::run_particles(model, obs, n_particles, seed, start, grid);

    double max_lw = cloud.log_weight[0];
    for (double lw : cloud.log_weight) max_lw = std::max(max_lw, lw);

    double sw = 0.0, swp = 0.0, sw2 = 0.0;
    std::vector<double> w(static_cast<std::size_t>(n_particles)), f(static_cast<std::size_t>(n_particles));
    for (int p = 0; p < n_particles; ++p) {
        w[static_cast<std::size_t>(p)] = std::exp(cloud.log_weight[static_cast<std::size_t>(p)] - max_lw);
        f[static_cast<std::size_t>(p)] = phi(cloud.terminal[static_cast<std::size_t>(p)]);
        sw += w[static_cast<std::size_t>(p)];
        sw2 += w[static_cast<std::size_t>(p)] * w[static_cast<std::size_t>(p)];
        swp += w[static_cast<std::size_t>(p)] * f[static_cast<std::size_t>(p)];
    }
    KSEstimate est;
    est.n_particles = n_particles;
    est.value = swp / sw;
    double var_acc = 0.0;
    for (int p = 0; p < n_particles; ++p) {
        const double d = f[static_cast<std::size_t>(p)] - est.value;
        var_acc += w[static_cast<std::size_t>(p)] * w[static_cast<std::size_t>(p)] * d * d;
    }
    est.std_error = std::sqrt(var_acc) / sw;
    est.effective_sample_size = sw * sw / sw2;
    est.degenerate_weights = est.effective_sample_size < 0.01 * n_particles;
    return est;
}

/// Unnormalized estimate of E~[phi(U_T) Q_T | observations]: plain average
/// (1/n) sum w phi, no ratio. This is the quantity the terminal density
/// field pairs to under the adjoint identity.
inline KSEstimate unnormalized_ks(const FilteringModel& model,
                                  const PathBundle& obs, const StateFn& phi,
                                  int n_particles, std::uint64_t seed,
                                  const KSStart& start = KSStart::density(),
                                  const SpaceGrid* init_grid = nullptr) {
    if (n_particles < 100)
        throw ConfigError("unnormalized_ks: need at least 100 particles");
    const SpaceGrid grid = init_grid ? *init_grid : auto_grid(model);
    require_valid(model, grid, ValidationMode::Simulation);
    const auto cloud = detail::run_particles(model, obs, n_particles, seed, start, grid);

    double max_lw = cloud.log_weight[0];
    for (double lw : cloud.log_weight) max_lw = std::max(max_lw, lw);
    const double scale = std::exp(max_lw);

    double s = 0.0, sw = 0.0, sw2 = 0.0;
    std::vector<double> wf(static_cast<std::size_t>(n_particles));
    for (int p = 0; p < n_particles; ++p) {
        const double w = std::exp(cloud.log_weight[static_cast<std::size_t>(p)] - max_lw);
        wf[static_cast<std::size_t>(p)] = w * phi(cloud.terminal[static_cast<std::size_t>(p)]);
        s += wf[static_cast<std::size_t>(p)];
        sw += w;
        sw2 += w * w;
    }
    const double mean = s / n_particles;
    double var_acc = 0.0;
    for (double v : wf) var_acc += (v - mean) * (v - mean);

    KSEstimate est;
    est.n_particles = n_particles;
    est.value = scale * mean;
    est.std_error =
        scale * std::sqrt(var_acc / (n_particles - 1)) / std::sqrt(static_cast<double>(n_particles));
    est.effective_sample_size = sw * sw / sw2;
    est.degenerate_weights = est.effective_sample_size < 0.01 * n_particles;
    return est;
}

/// Posterior summary (mean, variance, unnormalized mass) from one particle
/// cloud, for column-wise comparison against filter summaries.
struct KSPosterior {
    double mean = 0.0, mean_se = 0.0;
    double variance = 0.0;
    double mass = 0.0, mass_se = 0.0; // estimate of E~[Q_T | observations]
    double effective_sample_size = 0.0;
    double max_abs_log_weight = 0.0;
};

inline KSPosterior ks_posterior_summary(const FilteringModel& model,
                                        const PathBundle& obs, int n_particles,
                                        std::uint64_t seed,
                                        const SpaceGrid* init_grid = nullptr) {
    if (n_particles < 100)
        throw ConfigError("ks_posterior_summary: need at least 100 particles");
    const SpaceGrid grid = init_grid ? *init_grid : auto_grid(model);
    require_valid(model, grid, ValidationMode::Simulation);
    const auto cloud =
        detail::run_particles(model, obs, n_particles, seed, KSStart::density(), grid);

    double max_lw = cloud.log_weight[0], max_abs_lw = 0.0;
    for (double lw : cloud.log_weight) {
        max_lw = std::max(max_lw, lw);
        max_abs_lw = std::max(max_abs_lw, std::abs(lw));
    }
    double sw = 0.0, sw2 = 0.0, swu = 0.0, swu2 = 0.0;
    for (int p = 0; p < n_particles; ++p) {
        const double w = std::exp(cloud.log_weight[static_cast<std::size_t>(p)] - max_lw);
        const double u = cloud.terminal[static_cast<std::size_t>(p)];
        sw += w;
        sw2 += w * w;
        swu += w * u;
        swu2 += w * u * u;
    }
    KSPosterior out;
    out.mean = swu / sw;
    out.variance = swu2 / sw - out.mean * out.mean;
    double var_acc = 0.0, wvar_acc = 0.0;
    const double wbar = sw / n_particles;
    for (int p = 0; p < n_particles; ++p) {
        const double w = std::exp(cloud.log_weight[static_cast<std::size_t>(p)] - max_lw);
        const double d = cloud.terminal[static_cast<std::size_t>(p)] - out.mean;
        var_acc += w * w * d * d;
        wvar_acc += (w - wbar) * (w - wbar);
    }
    out.mean_se = std::sqrt(var_acc) / sw;
    out.mass = std::exp(max_lw) * wbar;
    out.mass_se = std::exp(max_lw) *
                  std::sqrt(wvar_acc / (n_particles - 1)) /
                  std::sqrt(static_cast<double>(n_particles));
    out.effective_sample_size = sw * sw / sw2;
    out.max_abs_log_weight = max_abs_lw;
    return out;
}

} // namespace bdsde
