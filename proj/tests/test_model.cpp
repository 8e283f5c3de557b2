#include <catch2/catch_amalgamated.hpp>

#include <bdsde/model.hpp>

#include <cmath>

using namespace bdsde;

TEST_CASE("sigma combines the two noise coefficients") {
    auto m = make_linear_model(-1.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0);
    REQUIRE(sigma(m, 0.3) == 1.0);

    m.rho = [](double) { return 3.0; };
    m.rho_tilde = [](double) { return 4.0; };
    REQUIRE(sigma(m, 0.7) == 5.0);

    m.rho = [](double t) { return t; };
    m.rho_tilde = [](double) { return 1.0; };
    REQUIRE(sigma(m, 1.0) == Catch::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("sigma rejects degenerate diffusion") {
    auto m = make_linear_model(-1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0);
    REQUIRE_THROWS_AS(sigma(m, 0.5), NumericError);
}

TEST_CASE("sigma is finite and continuous over the zoo") {
    for (const auto& name : zoo_names()) {
        const auto m = make_zoo_model(name);
        double prev = sigma(m, 0.0);
        for (int i = 1; i <= 1000; ++i) {
            const double t = m.horizon_T * i / 1000.0;
            const double s = sigma(m, t);
            REQUIRE(std::isfinite(s));
            REQUIRE(std::abs(s - prev) <= 1e-6 + 0.01 * prev);
            prev = s;
        }
    }
}

TEST_CASE("validate accepts every zoo model") {
    for (const auto& name : zoo_names()) {
        const auto m = make_zoo_model(name);
        const auto grid = auto_grid(m);
        CAPTURE(name);
        REQUIRE(validate(m, grid).empty());
    }
}

TEST_CASE("validate reports degenerate diffusion") {
    auto m = make_linear_model(-1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0);
    const auto bad = validate(m, SpaceGrid(-4.0, 4.0, 65));
    REQUIRE_FALSE(bad.empty());
    bool found = false;
    for (const auto& v : bad)
        if (v.code == "degenerate-diffusion") found = true;
    REQUIRE(found);
}

TEST_CASE("validate detects a wrong observation derivative") {
    auto m = make_zoo_model("nonlinear-tanh");
    m.obs_h_prime = [](double x) {
        const double c = std::cosh(x);
        return 2.0 / (c * c); // off by a factor of 2
    };
    const auto bad = validate(m, auto_grid(m));
    bool found = false;
    for (const auto& v : bad)
        if (v.code == "derivative-mismatch" &&
            v.message.find("obs_h_prime") != std::string::npos)
            found = true;
    REQUIRE(found);
}

TEST_CASE("validate detects a wrong drift derivative and NaN probes") {
    auto m = make_zoo_model("nonlinear-tanh");
    m.drift_b_prime = [](double, double x) { return -std::cos(x); };
    bool found = false;
    for (const auto& v : validate(m, auto_grid(m)))
        if (v.message.find("drift_b_prime") != std::string::npos) found = true;
    REQUIRE(found);

    auto m2 = make_zoo_model("linear-kb");
    m2.p0 = [](double) { return std::numeric_limits<double>::quiet_NaN(); };
    bool nan_found = false;
    for (const auto& v : validate(m2, auto_grid(make_zoo_model("linear-kb"))))
        if (v.code == "nan-probe") nan_found = true;
    REQUIRE(nan_found);
}

TEST_CASE("validate reports zero prior mass") {
    auto m = make_zoo_model("linear-kb");
    m.p0 = [](double) { return 0.0; };
    bool found = false;
    for (const auto& v : validate(m, SpaceGrid(-4.0, 4.0, 65)))
        if (v.code == "p0-mass") found = true;
    REQUIRE(found);
}

TEST_CASE("time grid invariants") {
    TimeGrid tg(1.0, 4);
    REQUIRE(tg.dt() == 0.25);
    REQUIRE(tg.time(4) == 1.0);
    REQUIRE_THROWS_AS(TimeGrid(1.0, 1), ConfigError);
    REQUIRE_THROWS_AS(TimeGrid(0.0, 10), ConfigError);
}

TEST_CASE("auto grid covers the prior plus diffusion spread") {
    const auto m = make_zoo_model("linear-kb");
    const auto g = auto_grid(m);
    REQUIRE(g.m == 401);
    REQUIRE(g.x_min == Catch::Approx(-8.0));
    REQUIRE(g.x_max == Catch::Approx(8.0));
}
