#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/fk_solver.hpp"
#include "bdsde/filter.hpp"
#include "bdsde/oracles.hpp"

namespace bdsde {

/// Time trace of the L2 pairing between the backward value field and the
/// forward density field. In the continuum the pairing is constant in
/// time; the discrete drift relative to its initial value measures the
/// scheme error and must shrink under dt refinement.
struct AdjointTrace {
    std::vector<double> times;
    std::vector<double> pairing;        // R_n, scale-corrected
    std::vector<double> relative_drift; // |R_n - R_0| / |R_0|
    double max_relative_drift = 0.0;
    bool degenerate = false; // |R_0| too small to normalize
};

/// R_n = <Y_n, Ybar_n> exp(log_scale_n), evaluated at every shared step.
/// Both runs must be on identical grids and have consumed the same
/// observation increments.
inline AdjointTrace adjoint_trace(const FKRun& fk, const FilterRun& filt) {
    if (!(fk.grid == filt.grid))
        throw ConfigError("adjoint_trace: runs use different space grids");
    if (!(fk.tgrid == filt.tgrid))
        throw ConfigError("adjoint_trace: runs use different time grids");
    if (fk.obs_checksum != filt.obs_checksum)
        throw ConfigError("adjoint_trace: runs consumed different observation paths");

    const int N = fk.tgrid.n_steps;
    AdjointTrace tr;
    tr.times.resize(static_cast<std::size_t>(N) + 1);
    tr.pairing.resize(static_cast<std::size_t>(N) + 1);
    tr.relative_drift.assign(static_cast<std::size_t>(N) + 1, 0.0);
    for (int n = 0; n <= N; ++n) {
        tr.times[static_cast<std::size_t>(n)] = fk.tgrid.time(n);
        tr.pairing[static_cast<std::size_t>(n)] =
            inner_product(fk.y(n), filt.ybar(n)) * filt.scale_factor(n);
    }
    const double r0 = tr.pairing[0];
    if (std::abs(r0) <= 1e-12) {
        tr.degenerate = true;
        tr.max_relative_drift = std::numeric_limits<double>::quiet_NaN();
        return tr;
    }
    for (int n = 0; n <= N; ++n) {
        tr.relative_drift[static_cast<std::size_t>(n)] =
            std::abs(tr.pairing[static_cast<std::size_t>(n)] - r0) / std::abs(r0);
        tr.max_relative_drift =
            std::max(tr.max_relative_drift, tr.relative_drift[static_cast<std::size_t>(n)]);
    }
    return tr;
}

/// One-shot consistency check of the backward solver against the
/// point-start particle oracle on the same observation path.
struct FKCheckReport {
    double solver_value = 0.0; // Y_0(x0) from the grid sweep
    double oracle_value = 0.0; // unnormalized particle estimate
    double std_error = 0.0;
    double z_score = 0.0;
};

inline FKCheckReport feynman_kac_check(const FilteringModel& model,
                                       const SpaceGrid& grid, const TimeGrid& tgrid,
                                       const PathBundle& obs, const StateFn& phi,
                                       double x0, int n_particles,
                                       std::uint64_t seed,
                                       const SolverOptions& opt = {}) {
    if (!(x0 > grid.x_min && x0 < grid.x_max))
        throw ConfigError("feynman_kac_check: x0 must be interior to the grid");
    const FKRun run = solve_backward(model, grid, tgrid, obs, phi, opt);
    const KSEstimate mc =
        unnormalized_ks(model, obs, phi, n_particles, seed, KSStart::point(x0), &grid);

    FKCheckReport rep;
    rep.solver_value = value_at(run, 0, x0);
    rep.oracle_value = mc.value;
    rep.std_error = mc.std_error;
    const double diff = rep.solver_value - rep.oracle_value;
    if (mc.std_error == 0.0)
        rep.z_score = (diff == 0.0) ? 0.0
                                    : std::copysign(std::numeric_limits<double>::infinity(), diff);
    else
        rep.z_score = diff / mc.std_error;
    return rep;
}

} // namespace bdsde
