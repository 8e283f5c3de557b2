#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/model.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/path.hpp"
#include "bdsde/quadrature.hpp"
#include "bdsde/solver_common.hpp"

namespace bdsde {

/// Forward evolution of the unnormalized filtering density. The stored
/// field at index n times exp(log_scale[n]) is the density itself; the
/// rescaling keeps the stored values inside [1e-6, 1e6] on long horizons.
/// Rescale factors are powers of two, so rescaling is exact in floating
/// point and cancels bitwise in normalized ratios.
struct FilterRun {
    SpaceGrid grid;
    TimeGrid tgrid;
    std::vector<GridField> fields_ybar; // 0..n_steps, stored (rescaled)
    std::vector<GridField> fields_zbar;
    std::vector<double> log_scale;      // log_scale[0] = 0
    std::vector<int> negativity_steps;  // steps where min < -0.01 max
    std::uint64_t obs_checksum = 0;

    const GridField& ybar(int n) const { return fields_ybar.at(static_cast<std::size_t>(n)); }
    const GridField& zbar(int n) const { return fields_zbar.at(static_cast<std::size_t>(n)); }
    double scale_factor(int n) const { return std::exp(log_scale.at(static_cast<std::size_t>(n))); }
};

namespace detail {

/// Power-of-two rescale factor bringing magnitude toward 1; returns 1.0
/// while the magnitude stays within the comfortable range.
inline double rescale_factor(double max_abs) {
    if (max_abs >= 1e-6 && max_abs <= 1e6) return 1.0;
    if (max_abs == 0.0) return 1.0;
    int exp2 = 0;
    std::frexp(max_abs, &exp2);
    return std::ldexp(1.0, exp2);
}

} // namespace detail

/// Forward time-stepping of the density field driven by the observation
/// increments. Starting from p0 on the grid, each step applies the
/// one-step conditional expectation of the backward Euler flow (one-step
/// law x - b dt + sigma sqrt(dt) Z) and the observation increment:
///   Ybar_{n+1}(x) = Ebar_x[Ybar_n] - Ebar_x[b' Ybar_n] dt
///                 + ( Ebar_x[h Ybar_n] - (rho_tilde/sigma)(t_n) Ebar_x[Zbar_n] ) dV_n,
/// with Zbar_n = sigma(t_n) dYbar_n/dx. All observation integrands sit at
/// the left endpoint t_n; field n depends only on increments 0..n-1.
/// Negative excursions of the density are kept (clipping would destroy
/// linearity) and recorded in negativity_steps when they exceed 1% of the
/// field maximum.
inline FilterRun solve_filter(const FilteringModel& model, const SpaceGrid& grid,
                              const TimeGrid& tgrid, const PathBundle& obs,
                              const SolverOptions& opt = {}) {
    require_valid(model, grid);
    if (!(obs.tgrid == tgrid))
        throw ConfigError("solve_filter: observation bundle is on a different time grid");

    const int N = tgrid.n_steps;
    const double dt = tgrid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const QuadratureRule rule = gauss_nodes(opt.quad_nodes);
    const int k = rule.size();

    FilterRun run;
    run.grid = grid;
    run.tgrid = tgrid;
    run.obs_checksum = observation_checksum(obs);
    run.fields_ybar.reserve(static_cast<std::size_t>(N) + 1);
    run.fields_zbar.reserve(static_cast<std::size_t>(N) + 1);
    run.log_scale.assign(static_cast<std::size_t>(N) + 1, 0.0);

    run.fields_ybar.push_back(sample_field(grid, model.p0, BoundaryPolicy::Zero));
    detail::check_field_finite(run.fields_ybar[0].values(), 0, "solve_filter");

    auto make_zbar = [&](const GridField& y, double s) {
        std::vector<double> zv = derivative(y).values();
        for (double& v : zv) v *= s;
        return GridField(grid, std::move(zv), BoundaryPolicy::Zero);
    };

    run.fields_zbar.push_back(make_zbar(run.fields_ybar[0], sigma(model, 0.0)));

    std::vector<double> y_new(static_cast<std::size_t>(grid.m));
    for (int n = 0; n < N; ++n) {
        const double t_n = tgrid.time(n);
        const double s_n = sigma(model, t_n);
        const double ratio_n = model.rho_tilde(t_n) / s_n;
        const double dv = obs.delta_v(n);
        const GridField& yf = run.fields_ybar[static_cast<std::size_t>(n)];
        const GridField& zf = run.fields_zbar[static_cast<std::size_t>(n)];

        parallel_for(grid.m, [&](int j) {
            const double x = grid.node(j);
            const double mu = x - model.drift_b(t_n, x) * dt;
            const double sd = s_n * sqrt_dt;
            double acc_y = 0.0, acc_by = 0.0, acc_hy = 0.0, acc_z = 0.0;
            for (int i = 0; i < k; ++i) {
                const double xp = mu + sd * rule.nodes[static_cast<std::size_t>(i)];
                const double w = rule.weights[static_cast<std::size_t>(i)];
                const double yv = interpolate(yf, xp);
                acc_y += w * yv;
                acc_by += w * model.drift_b_prime(t_n, xp) * yv;
                acc_hy += w * model.obs_h(xp) * yv;
                acc_z += w * interpolate(zf, xp);
            }
            y_new[static_cast<std::size_t>(j)] =
                acc_y - acc_by * dt + (acc_hy - ratio_n * acc_z) * dv;
        });

        detail::check_field_finite(y_new, n + 1, "solve_filter");

        double lo = y_new[0], hi = y_new[0];
        for (double v : y_new) {
            if (v < lo) lo = v;
            if (v > hi) hi = v;
        }
        const double max_abs = std::max(std::abs(lo), std::abs(hi));
        if (lo < -0.01 * hi && hi > 0.0) run.negativity_steps.push_back(n + 1);

        const double s = detail::rescale_factor(max_abs);
        if (s != 1.0) {
            const double inv = 1.0 / s; // exact: s is a power of two
            for (double& v : y_new) v *= inv;
        }
        run.log_scale[static_cast<std::size_t>(n) + 1] =
            run.log_scale[static_cast<std::size_t>(n)] + std::log(s);

        run.fields_ybar.emplace_back(grid, y_new, BoundaryPolicy::Zero);
        run.fields_zbar.push_back(
            make_zbar(run.fields_ybar.back(), sigma(model, tgrid.time(n + 1))));
    }
    return run;
}

/// Normalized posterior estimate <Ybar_n, phi> / <Ybar_n, 1>. The stored
/// field is used directly: any common scale (including the tracked
/// log_scale) cancels in the ratio.
inline double estimate(const FilterRun& run, int n, const StateFn& phi) {
    const GridField& y = run.ybar(n);
    const GridField ones = sample_field(run.grid, [](double) { return 1.0; },
                                        BoundaryPolicy::Zero);
    const double den = inner_product(y, ones);
    if (!(den > 0.0))
        throw NumericError("estimate: density mass is not positive at step " +
                               std::to_string(n),
                           n);
    const double num = inner_product(y, sample_field(run.grid, phi, BoundaryPolicy::Zero));
    return num / den;
}

/// Posterior mean and variance at step n. Variance can come out negative
/// when the unmollified density has strong negative excursions; it is
/// reported as computed, not clamped.
inline std::pair<double, double> posterior_moments(const FilterRun& run, int n) {
    const double mean = estimate(run, n, [](double x) { return x; });
    const double m2 = estimate(run, n, [](double x) { return x * x; });
    return {mean, m2 - mean * mean};
}

} // namespace bdsde
