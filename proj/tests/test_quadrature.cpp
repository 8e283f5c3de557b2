#include <catch2/catch_amalgamated.hpp>

#include <bdsde/quadrature.hpp>

#include <cmath>

using namespace bdsde;

namespace {

// closed-form moments of the standard normal: E[Z^p] = (p-1)!! for even p
double normal_moment(int p) {
    if (p % 2 == 1) return 0.0;
    double m = 1.0;
    for (int i = p - 1; i > 1; i -= 2) m *= i;
    return m;
}

} // namespace

TEST_CASE("one- and two-point rules") {
    const auto r1 = gauss_nodes(1);
    REQUIRE(r1.nodes == std::vector<double>{0.0});
    REQUIRE(r1.weights == std::vector<double>{1.0});

    // the 2-point rule matching moments 1, 0, 1, 0 has nodes +-1, weights 1/2
    const auto r2 = gauss_nodes(2);
    REQUIRE(r2.nodes[0] == Catch::Approx(-1.0).margin(1e-14));
    REQUIRE(r2.nodes[1] == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(r2.weights[0] == Catch::Approx(0.5).margin(1e-14));
    REQUIRE(r2.weights[1] == Catch::Approx(0.5).margin(1e-14));
}

TEST_CASE("rule invariants: mass, mean, variance") {
    for (int k : {1, 2, 3, 5, 8, 16, 33, 64}) {
        const auto r = gauss_nodes(k);
        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
        for (int i = 0; i < k; ++i) {
            s0 += r.weights[static_cast<std::size_t>(i)];
            s1 += r.weights[static_cast<std::size_t>(i)] * r.nodes[static_cast<std::size_t>(i)];
            s2 += r.weights[static_cast<std::size_t>(i)] * r.nodes[static_cast<std::size_t>(i)] *
                  r.nodes[static_cast<std::size_t>(i)];
        }
        CAPTURE(k);
        REQUIRE(std::abs(s0 - 1.0) <= 1e-12);
        REQUIRE(std::abs(s1) <= 1e-12);
        if (k >= 2) REQUIRE(std::abs(s2 - 1.0) <= 1e-10);
    }
}

TEST_CASE("five-point rule integrates the fourth moment") {
    const auto r = gauss_nodes(5);
    double s4 = 0.0;
    for (int i = 0; i < 5; ++i)
        s4 += r.weights[static_cast<std::size_t>(i)] * std::pow(r.nodes[static_cast<std::size_t>(i)], 4);
    REQUIRE(s4 == Catch::Approx(3.0).margin(1e-10));
}

TEST_CASE("k-node rules are exact for monomials up to degree 2k-1") {
    for (int k : {2, 4, 8, 12}) {
        const auto r = gauss_nodes(k);
        for (int p = 0; p <= 2 * k - 1; ++p) {
            double s = 0.0, scale = 0.0;
            for (int i = 0; i < k; ++i) {
                const double term = r.weights[static_cast<std::size_t>(i)] *
                                    std::pow(r.nodes[static_cast<std::size_t>(i)], p);
                s += term;
                scale += std::abs(term);
            }
            CAPTURE(k, p);
            // odd moments cancel two large symmetric halves; allow rounding
            // proportional to the cancelled magnitude
            REQUIRE(s == Catch::Approx(normal_moment(p)).margin(1e-9 * std::max(1.0, scale)));
        }
    }
}

TEST_CASE("gauss_nodes range errors") {
    REQUIRE_THROWS_AS(gauss_nodes(0), ConfigError);
    REQUIRE_THROWS_AS(gauss_nodes(65), ConfigError);
}

TEST_CASE("conditional expectations over one Euler step") {
    SpaceGrid g(-4.0, 4.0, 161);
    const auto rule = gauss_nodes(8);

    // sigma = 0: deterministic push
    auto f = sample_field(g, [](double x) { return std::sin(x); }, BoundaryPolicy::Clamp);
    const double pushed = cond_exp_forward(f, 0.3, 1.0, 0.0, 0.1, rule);
    REQUIRE(pushed == Catch::Approx(interpolate(f, 0.4)).margin(1e-15));

    // linear field: noise integrates away
    auto lin = sample_field(g, [](double x) { return x; }, BoundaryPolicy::Clamp);
    REQUIRE(cond_exp_forward(lin, 0.0, 1.0, 1.0, 0.1, rule) ==
            Catch::Approx(0.1).margin(1e-12));
    REQUIRE(cond_exp_backward(lin, 0.0, 1.0, 1.0, 0.1, rule) ==
            Catch::Approx(-0.1).margin(1e-12));

    // quadratic field picks up the sigma^2 dt variance
    auto sq = sample_field(g, [](double x) { return x * x; }, BoundaryPolicy::Clamp);
    REQUIRE(cond_exp_forward(sq, 0.0, 0.0, 1.0, 0.04, rule) ==
            Catch::Approx(0.04).margin(1e-10));
    // with no drift the backward step has the same law
    REQUIRE(cond_exp_backward(sq, 0.0, 0.0, 1.0, 0.04, rule) ==
            cond_exp_forward(sq, 0.0, 0.0, 1.0, 0.04, rule));
}

TEST_CASE("quadrature exactness against analytic Gaussian moments") {
    // bypass interpolation: evaluate monomials analytically at the one-step
    // points and compare with the closed-form moments of x + b dt + s sqrt(dt) Z
    const double x = 0.2, b = 0.5, s = 1.3, dt = 0.05;
    const double mu = x + b * dt, sd = s * std::sqrt(dt);
    for (int k : {4, 8}) {
        const auto rule = gauss_nodes(k);
        for (int p = 0; p <= 2 * k - 1 && p <= 10; ++p) {
            double acc = 0.0;
            for (int i = 0; i < k; ++i)
                acc += rule.weights[static_cast<std::size_t>(i)] *
                       std::pow(mu + sd * rule.nodes[static_cast<std::size_t>(i)], p);
            double exact = 0.0; // binomial expansion over central moments
            double binom = 1.0;
            for (int j = 0; j <= p; ++j) {
                exact += binom * std::pow(mu, p - j) * std::pow(sd, j) * normal_moment(j);
                binom = binom * (p - j) / (j + 1);
            }
            CAPTURE(k, p);
            REQUIRE(acc == Catch::Approx(exact).epsilon(1e-9));
        }
    }
}
