#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/model.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/path.hpp"
#include "bdsde/quadrature.hpp"
#include "bdsde/solver_common.hpp"

namespace bdsde {

/// Backward sweep output: fields_y[n] is the value field Y_n(x),
/// fields_z[n] = sigma(t_n) * dY_n/dx its gradient companion.
/// fields_y[n_steps] is the terminal payoff.
struct FKRun {
    SpaceGrid grid;
    TimeGrid tgrid;
    std::vector<GridField> fields_y;
    std::vector<GridField> fields_z;
    std::uint64_t obs_checksum = 0;

    const GridField& y(int n) const { return fields_y.at(static_cast<std::size_t>(n)); }
    const GridField& z(int n) const { return fields_z.at(static_cast<std::size_t>(n)); }
};

/// Backward grid sweep for the value field driven by the observation path:
/// starting from Y_N = phi, each step applies the one-step conditional
/// expectation of the forward Euler flow and the observation increment:
///   Y_n(x) = E_x[Y_{n+1}]
///          + ( E_x[h Y_{n+1}] + (rho_tilde/sigma)(t_{n+1}) E_x[Z_{n+1}] ) dV_n,
/// with Z_{n+1} = sigma(t_{n+1}) dY_{n+1}/dx evaluated on the grid. The
/// observation integrand sits at the right endpoint t_{n+1}, matching the
/// backward stochastic integral; field n depends only on increments
/// n..N-1.
inline FKRun solve_backward(const FilteringModel& model, const SpaceGrid& grid,
                            const TimeGrid& tgrid, const PathBundle& obs,
                            const StateFn& phi, const SolverOptions& opt = {}) {
    require_valid(model, grid);
    if (!(obs.tgrid == tgrid))
        throw ConfigError("solve_backward: observation bundle is on a different time grid");

    const int N = tgrid.n_steps;
    const double dt = tgrid.dt();
    const double sqrt_dt = std::sqrt(dt);
    const QuadratureRule rule = gauss_nodes(opt.quad_nodes);
    const int k = rule.size();

    FKRun run;
    run.grid = grid;
    run.tgrid = tgrid;
    run.obs_checksum = observation_checksum(obs);
    run.fields_y.reserve(static_cast<std::size_t>(N) + 1);
    run.fields_z.reserve(static_cast<std::size_t>(N) + 1);

    // Terminal slice. Value fields clamp at the boundary (Y approaches a
    // constant away from the dynamics), gradients vanish there.
    GridField y_next = sample_field(grid, phi, BoundaryPolicy::Clamp);
    detail::check_field_finite(y_next.values(), N, "solve_backward");
    GridField z_next = derivative(y_next).with_policy(BoundaryPolicy::Zero);
    {
        const double s_T = sigma(model, tgrid.time(N));
        std::vector<double> zv = z_next.values();
        for (double& v : zv) v *= s_T;
        z_next = GridField(grid, std::move(zv), BoundaryPolicy::Zero);
    }

    std::vector<GridField> ys, zs; // filled N, N-1, ..., 0
    ys.push_back(y_next);
    zs.push_back(z_next);

    std::vector<double> y_new(static_cast<std::size_t>(grid.m));
    for (int n = N - 1; n >= 0; --n) {
        const double t_n = tgrid.time(n);
        const double t_n1 = tgrid.time(n + 1);
        const double s_n = sigma(model, t_n);
        const double s_n1 = sigma(model, t_n1);
        const double ratio_n1 = model.rho_tilde(t_n1) / s_n1;
        const double dv = obs.delta_v(n);
        const GridField& yf = ys.back();
        const GridField& zf = zs.back();

        parallel_for(grid.m, [&](int j) {
            const double x = grid.node(j);
            const double mu = x + model.drift_b(t_n, x) * dt;
            const double sd = s_n * sqrt_dt;
            double acc_y = 0.0, acc_hy = 0.0, acc_z = 0.0;
            for (int i = 0; i < k; ++i) {
                const double xp = mu + sd * rule.nodes[static_cast<std::size_t>(i)];
                const double w = rule.weights[static_cast<std::size_t>(i)];
                const double yv = interpolate(yf, xp);
                acc_y += w * yv;
                acc_hy += w * model.obs_h(xp) * yv;
                acc_z += w * interpolate(zf, xp);
            }
            y_new[static_cast<std::size_t>(j)] = acc_y + (acc_hy + ratio_n1 * acc_z) * dv;
        });

        detail::check_field_finite(y_new, n, "solve_backward");
        GridField y_field(grid, y_new, BoundaryPolicy::Clamp);
        std::vector<double> zv = derivative(y_field).values();
        for (double& v : zv) v *= s_n;
        ys.push_back(y_field);
        zs.emplace_back(grid, std::move(zv), BoundaryPolicy::Zero);
    }

    // Reorder to natural time indexing 0..N.
    for (int n = N; n >= 0; --n) {
        run.fields_y.push_back(std::move(ys[static_cast<std::size_t>(n)]));
        run.fields_z.push_back(std::move(zs[static_cast<std::size_t>(n)]));
    }
    return run;
}

/// Interpolated read of Y_n at x.
inline double value_at(const FKRun& run, int n, double x) {
    if (n < 0 || n > run.tgrid.n_steps)
        throw ConfigError("value_at: time index out of range");
    return interpolate(run.fields_y[static_cast<std::size_t>(n)], x);
}

} // namespace bdsde
