#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bdsde/errors.hpp"
#include "bdsde/grid.hpp"

namespace bdsde {

/// Quadrature rule for the standard normal measure: sum_i w_i f(xi_i)
/// approximates E[f(Z)], Z ~ N(0,1). Exact for polynomials of degree
/// <= 2k-1.
struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
    int size() const { return static_cast<int>(nodes.size()); }
};

namespace detail {

// Implicit-QL eigensolve of a symmetric tridiagonal matrix, accumulating
// eigenvectors. d: diagonal (in: matrix, out: eigenvalues); e: subdiagonal
// (e[0..n-2]); z: n x n row-major, in: identity, out: eigenvector columns.
inline void tridiag_ql(std::vector<double>& d, std::vector<double>& e,
                       std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    if (n == 1) return;
    e.push_back(0.0);
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (iter++ == 60)
                    throw NumericError("gauss_nodes: eigensolve failed to converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                bool underflow = false;
                for (int i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        underflow = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (int w = 0; w < n; ++w) {
                        f = z[static_cast<std::size_t>(w) * n + i + 1];
                        z[static_cast<std::size_t>(w) * n + i + 1] =
                            s * z[static_cast<std::size_t>(w) * n + i] + c * f;
                        z[static_cast<std::size_t>(w) * n + i] =
                            c * z[static_cast<std::size_t>(w) * n + i] - s * f;
                    }
                }
                if (underflow) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

} // namespace detail

/// Gauss-Hermite rule transformed to the standard normal measure, built
/// from the Jacobi matrix of the probabilists' Hermite polynomials
/// (Golub-Welsch). Weights are nudged so their in-order floating-point sum
/// is exactly 1, which keeps constant fields invariant under one-step
/// conditional expectations.
inline QuadratureRule gauss_nodes(int k) {
    if (k < 1 || k > 64) throw ConfigError("gauss_nodes: k must be in [1, 64]");
    QuadratureRule rule;
    if (k == 1) {
        rule.nodes = {0.0};
        rule.weights = {1.0};
        return rule;
    }
    std::vector<double> d(static_cast<std::size_t>(k), 0.0);
    std::vector<double> e(static_cast<std::size_t>(k - 1));
    for (int i = 1; i < k; ++i) e[static_cast<std::size_t>(i - 1)] = std::sqrt(static_cast<double>(i));
    std::vector<double> z(static_cast<std::size_t>(k) * k, 0.0);
    for (int i = 0; i < k; ++i) z[static_cast<std::size_t>(i) * k + i] = 1.0;
    detail::tridiag_ql(d, e, z);

    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return d[static_cast<std::size_t>(a)] < d[static_cast<std::size_t>(b)]; });

    rule.nodes.resize(static_cast<std::size_t>(k));
    rule.weights.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const int c = order[static_cast<std::size_t>(i)];
        rule.nodes[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(c)];
        const double z0 = z[static_cast<std::size_t>(c)]; // first row, column c
        rule.weights[static_cast<std::size_t>(i)] = z0 * z0;
    }

    // Symmetrize node/weight pairs (the rule is symmetric by construction,
    // this removes the eigensolver's last-ulp asymmetry).
    for (int i = 0; i < k / 2; ++i) {
        const int jm = k - 1 - i;
        const double xs = 0.5 * (rule.nodes[static_cast<std::size_t>(jm)] - rule.nodes[static_cast<std::size_t>(i)]);
        rule.nodes[static_cast<std::size_t>(i)] = -xs;
        rule.nodes[static_cast<std::size_t>(jm)] = xs;
        const double ws = 0.5 * (rule.weights[static_cast<std::size_t>(i)] + rule.weights[static_cast<std::size_t>(jm)]);
        rule.weights[static_cast<std::size_t>(i)] = ws;
        rule.weights[static_cast<std::size_t>(jm)] = ws;
    }
    if (k % 2 == 1) rule.nodes[static_cast<std::size_t>(k / 2)] = 0.0;

    // Pin the in-order weight sum to exactly 1.0.
    for (int pass = 0; pass < 4; ++pass) {
        double s = 0.0;
        for (double w : rule.weights) s += w;
        const double r = 1.0 - s;
        if (r == 0.0) break;
        rule.weights.back() += r;
    }
    return rule;
}

/// E[f(X)] for one Euler step X = x + b dt + sigma sqrt(dt) Z of the
/// forward flow, with f given on a grid.
inline double cond_exp_forward(const GridField& field, double x, double b_val,
                               double sigma_val, double dt,
                               const QuadratureRule& rule) {
    if (!(dt > 0.0)) throw ConfigError("cond_exp_forward: dt must be > 0");
    if (sigma_val < 0.0) throw ConfigError("cond_exp_forward: sigma must be >= 0");
    const double mu = x + b_val * dt;
    const double sd = sigma_val * std::sqrt(dt);
    double acc = 0.0;
    for (int i = 0; i < rule.size(); ++i)
        acc += rule.weights[static_cast<std::size_t>(i)] *
               interpolate(field, mu + sd * rule.nodes[static_cast<std::size_t>(i)]);
    return acc;
}

/// Same as cond_exp_forward with the drift sign negated: one Euler step of
/// the backward flow dX = b dt - sigma d<-W has one-step law
/// x - b dt + sigma sqrt(dt) Z.
inline double cond_exp_backward(const GridField& field, double x, double b_val,
                                double sigma_val, double dt,
                                const QuadratureRule& rule) {
    return cond_exp_forward(field, x, -b_val, sigma_val, dt, rule);
}

} // namespace bdsde
