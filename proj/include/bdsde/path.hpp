#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/model.hpp"
#include "bdsde/rng.hpp"

namespace bdsde {

/// One seeded realization of the truth/observation system on a time grid:
/// truth path U, observation path V (V_0 = 0), and the driving increments
/// dW, dB. Bundles produced by simulate() satisfy
///     V_{n+1} - V_n = h(U_n) dt + dB_n   exactly (bitwise).
struct PathBundle {
    TimeGrid tgrid;
    std::vector<double> truth_u; // n_steps + 1
    std::vector<double> obs_v;   // n_steps + 1, obs_v[0] = 0
    std::vector<double> dW;      // n_steps
    std::vector<double> dB;      // n_steps
    std::uint64_t seed = 0;

    double delta_v(int n) const { return obs_v[static_cast<std::size_t>(n) + 1] - obs_v[static_cast<std::size_t>(n)]; }
};

/// FNV-1a over the observation increments; lets downstream consumers check
/// two runs consumed the same path.
inline std::uint64_t observation_checksum(const PathBundle& b) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](double x) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(x));
        __builtin_memcpy(&bits, &x, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffULL;
            h *= 0x100000001b3ULL;
        }
    };
    for (std::size_t n = 0; n + 1 < b.obs_v.size(); ++n)
        mix(b.obs_v[n + 1] - b.obs_v[n]);
    return h;
}

/// Draw from p0 tabulated on the grid via its piecewise-linear CDF.
/// u is a uniform variate in (0, 1).
inline double sample_initial_state(const FilteringModel& model,
                                   const SpaceGrid& grid, double u) {
    if (model.p0_point) return *model.p0_point;
    const int m = grid.m;
    std::vector<double> cdf(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j + 1 < m; ++j) {
        const double pj = std::max(0.0, model.p0(grid.node(j)));
        const double pj1 = std::max(0.0, model.p0(grid.node(j + 1)));
        cdf[static_cast<std::size_t>(j + 1)] = cdf[static_cast<std::size_t>(j)] + 0.5 * (pj + pj1) * grid.dx();
    }
    const double total = cdf[static_cast<std::size_t>(m - 1)];
    if (!(total > 0.0))
        throw NumericError("sample_initial_state: p0 has no mass on the grid");
    const double target = u * total;
    int lo = 0, hi = m - 1;
    while (hi - lo > 1) {
        const int mid = (lo + hi) / 2;
        if (cdf[static_cast<std::size_t>(mid)] <= target)
            lo = mid;
        else
            hi = mid;
    }
    const double span = cdf[static_cast<std::size_t>(hi)] - cdf[static_cast<std::size_t>(lo)];
    if (span <= 0.0) return grid.node(lo);
    const double frac = (target - cdf[static_cast<std::size_t>(lo)]) / span;
    return grid.node(lo) + frac * grid.dx();
}

/// Euler-Maruyama simulation of the truth/observation system:
///   U_{n+1} = U_n + b(t_n, U_n) dt + rho(t_n) dW_n + rho_tilde(t_n) dB_n,
///   V_{n+1} = V_n + h(U_n) dt + dB_n,
/// with U_0 drawn from p0 by inverse CDF on the space grid.
inline PathBundle simulate(const FilteringModel& model, const TimeGrid& tgrid,
                           const SpaceGrid& sgrid, std::uint64_t seed) {
    require_valid(model, sgrid, ValidationMode::Simulation);
    const int n = tgrid.n_steps;
    const double dt = tgrid.dt();

    PathBundle b;
    b.tgrid = tgrid;
    b.seed = seed;
    b.dW = brownian_increments(n, dt, seed, kStreamW);
    b.dB = brownian_increments(n, dt, seed, kStreamB);
    b.truth_u.resize(static_cast<std::size_t>(n) + 1);
    b.obs_v.resize(static_cast<std::size_t>(n) + 1);

    b.truth_u[0] = sample_initial_state(model, sgrid, uniform_at(seed, kStreamInit, 0));
    b.obs_v[0] = 0.0;
    for (int k = 0; k < n; ++k) {
        const double t = tgrid.time(k);
        const double u = b.truth_u[static_cast<std::size_t>(k)];
        b.truth_u[static_cast<std::size_t>(k) + 1] =
            u + model.drift_b(t, u) * dt + model.rho(t) * b.dW[static_cast<std::size_t>(k)] +
            model.rho_tilde(t) * b.dB[static_cast<std::size_t>(k)];
        b.obs_v[static_cast<std::size_t>(k) + 1] =
            b.obs_v[static_cast<std::size_t>(k)] + model.obs_h(u) * dt + b.dB[static_cast<std::size_t>(k)];
    }
    return b;
}

inline PathBundle simulate(const FilteringModel& model, const TimeGrid& tgrid,
                           std::uint64_t seed) {
    return simulate(model, tgrid, auto_grid(model), seed);
}

/// Coarsen a bundle by factor k: consecutive increments are summed, paths
/// subsampled. The coarse bundle carries the same underlying trajectory
/// observed at resolution k dt (used for dt-refinement studies).
inline PathBundle resample_observation(const PathBundle& fine, int k) {
    if (k < 1) throw ConfigError("resample_observation: k must be >= 1");
    if (k == 1) return fine;
    const int n = fine.tgrid.n_steps;
    if (n % k != 0)
        throw ConfigError("resample_observation: k must divide n_steps");
    const int nc = n / k;
    PathBundle out;
    out.tgrid = TimeGrid(fine.tgrid.horizon, nc);
    out.seed = fine.seed;
    out.truth_u.resize(static_cast<std::size_t>(nc) + 1);
    out.obs_v.resize(static_cast<std::size_t>(nc) + 1);
    out.dW.assign(static_cast<std::size_t>(nc), 0.0);
    out.dB.assign(static_cast<std::size_t>(nc), 0.0);
    for (int j = 0; j <= nc; ++j) {
        out.truth_u[static_cast<std::size_t>(j)] = fine.truth_u[static_cast<std::size_t>(j) * k];
        out.obs_v[static_cast<std::size_t>(j)] = fine.obs_v[static_cast<std::size_t>(j) * k];
    }
    for (int j = 0; j < nc; ++j)
        for (int i = 0; i < k; ++i) {
            out.dW[static_cast<std::size_t>(j)] += fine.dW[static_cast<std::size_t>(j) * k + i];
            out.dB[static_cast<std::size_t>(j)] += fine.dB[static_cast<std::size_t>(j) * k + i];
        }
    return out;
}

} // namespace bdsde
