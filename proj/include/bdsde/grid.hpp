#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "bdsde/errors.hpp"

namespace bdsde {

/// Uniform spatial grid on [x_min, x_max] with m nodes.
struct SpaceGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    int m = 8;

    SpaceGrid() = default;
    SpaceGrid(double lo, double hi, int nodes) : x_min(lo), x_max(hi), m(nodes) {
        if (!(x_min < x_max)) throw ConfigError("SpaceGrid: x_min must be < x_max");
        if (m < 8) throw ConfigError("SpaceGrid: need at least 8 nodes");
    }

    double dx() const { return (x_max - x_min) / (m - 1); }
    double node(int j) const { return x_min + j * dx(); }

    bool operator==(const SpaceGrid& o) const {
        return x_min == o.x_min && x_max == o.x_max && m == o.m;
    }
};

enum class BoundaryPolicy {
    Zero,  // field vanishes outside the grid (densities)
    Clamp, // field continues at the nearest node value (value functions)
};

/// Scalar function sampled on a SpaceGrid. Values are validated finite on
/// construction; evaluation outside the grid follows the boundary policy.
class GridField {
public:
    GridField(SpaceGrid grid, std::vector<double> values, BoundaryPolicy policy)
        : grid_(grid), values_(std::move(values)), policy_(policy) {
        if (static_cast<int>(values_.size()) != grid_.m)
            throw ConfigError("GridField: value count does not match grid");
        for (double v : values_)
            if (!std::isfinite(v))
                throw NumericError("GridField: non-finite value");
    }

    const SpaceGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    BoundaryPolicy policy() const { return policy_; }

    GridField with_policy(BoundaryPolicy p) const {
        GridField f = *this;
        f.policy_ = p;
        return f;
    }

private:
    SpaceGrid grid_;
    std::vector<double> values_;
    BoundaryPolicy policy_;
};

/// Tabulate fn(x) on the grid.
template <class Fn>
GridField sample_field(const SpaceGrid& grid, Fn&& fn, BoundaryPolicy policy) {
    std::vector<double> v(static_cast<std::size_t>(grid.m));
    for (int j = 0; j < grid.m; ++j) v[static_cast<std::size_t>(j)] = fn(grid.node(j));
    return GridField(grid, std::move(v), policy);
}

/// Catmull-Rom cubic interpolation. Exact on grid nodes, reproduces
/// quadratics in the interior (edge cells use quadratic ghost extrapolation).
inline double interpolate(const GridField& field, double x) {
    const SpaceGrid& g = field.grid();
    const std::vector<double>& v = field.values();
    if (x < g.x_min || x > g.x_max) {
        if (field.policy() == BoundaryPolicy::Zero) return 0.0;
        return (x < g.x_min) ? v.front() : v.back();
    }
    const double dx = g.dx();
    int j = static_cast<int>((x - g.x_min) / dx);
    if (j > g.m - 2) j = g.m - 2;
    if (j < 0) j = 0;
    // grid nodes read back their stored value bit-exactly
    if (x == g.node(j)) return v[static_cast<std::size_t>(j)];
    if (x == g.node(j + 1)) return v[static_cast<std::size_t>(j + 1)];
    const double t = (x - g.node(j)) / dx;

    const double p1 = v[static_cast<std::size_t>(j)];
    const double p2 = v[static_cast<std::size_t>(j + 1)];
    const double p0 = (j - 1 >= 0) ? v[static_cast<std::size_t>(j - 1)]
                                   : 3.0 * v[0] - 3.0 * v[1] + v[2];
    const double p3 = (j + 2 <= g.m - 1)
                          ? v[static_cast<std::size_t>(j + 2)]
                          : 3.0 * v[static_cast<std::size_t>(g.m - 1)] -
                                3.0 * v[static_cast<std::size_t>(g.m - 2)] +
                                v[static_cast<std::size_t>(g.m - 3)];

    const double c0 = 2.0 * p1;
    const double c1 = p2 - p0;
    const double c2 = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3;
    const double c3 = -p0 + 3.0 * p1 - 3.0 * p2 + p3;
    return 0.5 * (c0 + t * (c1 + t * (c2 + t * c3)));
}

/// Grid derivative: central differences inside, one-sided second order at
/// the two boundary nodes. Preserves the input's boundary policy.
inline GridField derivative(const GridField& field) {
    const SpaceGrid& g = field.grid();
    if (g.m < 4) throw ConfigError("derivative: need at least 4 nodes");
    const std::vector<double>& v = field.values();
    const double inv2dx = 1.0 / (2.0 * g.dx());
    std::vector<double> d(static_cast<std::size_t>(g.m));
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv2dx;
    for (int j = 1; j < g.m - 1; ++j)
        d[static_cast<std::size_t>(j)] =
            (v[static_cast<std::size_t>(j + 1)] - v[static_cast<std::size_t>(j - 1)]) * inv2dx;
    const std::size_t last = static_cast<std::size_t>(g.m - 1);
    d[last] = (3.0 * v[last] - 4.0 * v[last - 1] + v[last - 2]) * inv2dx;
    return GridField(g, std::move(d), field.policy());
}

/// Trapezoid-rule L2 pairing: sum' f_j g_j dx with half weights at the ends.
inline double inner_product(const GridField& f, const GridField& g) {
    if (!(f.grid() == g.grid()))
        throw ConfigError("inner_product: fields live on different grids");
    const std::vector<double>& a = f.values();
    const std::vector<double>& b = g.values();
    const int m = f.grid().m;
    double s = 0.5 * (a[0] * b[0] + a[static_cast<std::size_t>(m - 1)] * b[static_cast<std::size_t>(m - 1)]);
    for (int j = 1; j < m - 1; ++j)
        s += a[static_cast<std::size_t>(j)] * b[static_cast<std::size_t>(j)];
    return s * f.grid().dx();
}

inline double field_mass(const GridField& f) {
    return inner_product(f, sample_field(f.grid(), [](double) { return 1.0; },
                                         BoundaryPolicy::Clamp));
}

inline std::pair<double, double> field_min_max(const GridField& f) {
    double lo = f.values().front(), hi = lo;
    for (double v : f.values()) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    return {lo, hi};
}

} // namespace bdsde
