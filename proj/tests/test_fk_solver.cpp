#include <catch2/catch_amalgamated.hpp>

#include <bdsde/fk_solver.hpp>
#include <bdsde/quadrature.hpp>

#include <cmath>

using namespace bdsde;

namespace {

PathBundle perturb_observation_value(const PathBundle& b, int i, double bump) {
    PathBundle out = b;
    out.obs_v[static_cast<std::size_t>(i)] += bump;
    return out;
}

} // namespace

TEST_CASE("constant payoff is preserved exactly when observations decouple") {
    // h = 0 and rho_tilde = 0: the update is a plain conditional
    // expectation whose quadrature weights sum to exactly one
    const auto m = make_zoo_model("heat-gauss");
    const auto g = auto_grid(m, 101);
    TimeGrid tg(0.5, 50);
    const auto b = simulate(m, tg, g, 9);
    const auto run = solve_backward(m, g, tg, b, [](double) { return 1.0; });
    for (int n = 0; n <= tg.n_steps; ++n)
        for (double v : run.y(n).values()) REQUIRE(v == 1.0);
}

TEST_CASE("driftless diffusion keeps a linear payoff (martingale)") {
    const auto m = make_zoo_model("heat-gauss");
    const auto g = auto_grid(m, 301);
    TimeGrid tg(0.5, 10);
    const auto b = simulate(m, tg, g, 4);
    const auto run = solve_backward(m, g, tg, b, [](double x) { return x; });
    for (double x : {-1.0, -0.3, 0.0, 0.3, 1.0})
        REQUIRE(value_at(run, 0, x) == Catch::Approx(x).margin(1e-8));
    REQUIRE(value_at(run, 0, 0.3) == Catch::Approx(0.3).margin(1e-8));
}

TEST_CASE("value_at reads the stored fields") {
    const auto m = make_zoo_model("nonlinear-tanh");
    const auto g = auto_grid(m, 401);
    TimeGrid tg(m.horizon_T, 16);
    const auto b = simulate(m, tg, g, 1);
    auto phi = [](double x) { return std::tanh(x); };
    const auto run = solve_backward(m, g, tg, b, phi);

    // terminal slice is phi itself, up to cubic interpolation error
    for (double x : {-2.0, 0.1, 1.7})
        REQUIRE(value_at(run, tg.n_steps, x) == Catch::Approx(phi(x)).margin(1e-6));
    // grid nodes are exact
    REQUIRE(value_at(run, 5, g.node(40)) == run.y(5).values()[40]);
    REQUIRE_THROWS_AS(value_at(run, tg.n_steps + 1, 0.0), ConfigError);
    REQUIRE_THROWS_AS(value_at(run, -1, 0.0), ConfigError);
}

TEST_CASE("terminal gradient field matches sigma times the payoff slope") {
    const auto m = make_zoo_model("linear-corr"); // sigma = 0.5
    const auto g = auto_grid(m, 201);
    TimeGrid tg(1.0, 8);
    const auto b = simulate(m, tg, g, 2);
    const auto run = solve_backward(m, g, tg, b, [](double x) { return x; });
    const double s = sigma(m, 1.0);
    // interior nodes: d(x)/dx = 1
    for (int j = 5; j < g.m - 5; j += 19)
        REQUIRE(run.z(tg.n_steps).values()[static_cast<std::size_t>(j)] ==
                Catch::Approx(s).margin(1e-10));
}

TEST_CASE("Y_n depends only on observation increments n..N-1") {
    const auto m = make_zoo_model("nonlinear-tanh");
    const auto g = auto_grid(m, 101);
    TimeGrid tg(m.horizon_T, 32);
    const auto b = simulate(m, tg, g, 17);
    auto phi = [](double x) { return std::tanh(x); };
    const auto base = solve_backward(m, g, tg, b, phi);

    const int n = 12;
    // bumping interior value V_i with i <= n-1 changes only increments < n
    for (int i : {1, 5, 11}) {
        const auto pert = perturb_observation_value(b, i, 0.25);
        const auto run = solve_backward(m, g, tg, pert, phi);
        for (int k = n; k <= tg.n_steps; ++k)
            REQUIRE(run.y(k).values() == base.y(k).values());
        // and the earlier fields do change
        REQUIRE(run.y(0).values() != base.y(0).values());
    }
}

TEST_CASE("the solve is linear in the terminal payoff") {
    const auto m = make_zoo_model("nonlinear-tanh");
    const auto g = auto_grid(m, 151);
    TimeGrid tg(m.horizon_T, 25);
    const auto b = simulate(m, tg, g, 23);
    auto phi1 = [](double x) { return std::tanh(x); };
    auto phi2 = [](double x) { return std::exp(-x * x); };
    const double al = 2.0, be = -3.0;
    const auto r1 = solve_backward(m, g, tg, b, phi1);
    const auto r2 = solve_backward(m, g, tg, b, phi2);
    const auto rc = solve_backward(m, g, tg, b,
                                   [&](double x) { return al * phi1(x) + be * phi2(x); });
    for (int n : {0, 10, 25}) {
        for (int j = 0; j < g.m; ++j) {
            const double combo = al * r1.y(n).values()[static_cast<std::size_t>(j)] +
                                 be * r2.y(n).values()[static_cast<std::size_t>(j)];
            REQUIRE(rc.y(n).values()[static_cast<std::size_t>(j)] ==
                    Catch::Approx(combo).margin(1e-10));
        }
    }
}

TEST_CASE("one-step observation regularity: E[(h(X_t)-h(x))^2] <= C (t-s)") {
    // quadrature estimate of the conditional increment of h over one Euler
    // step; the constant is stable under halving dt
    const auto m = make_zoo_model("nonlinear-tanh");
    const auto g = auto_grid(m, 201);
    const auto rule = gauss_nodes(8);
    auto fitted_c = [&](double dt) {
        double worst = 0.0;
        for (int j = 0; j < g.m; ++j) {
            const double x = g.node(j);
            const double mu = x + m.drift_b(0.0, x) * dt;
            const double sd = sigma(m, 0.0) * std::sqrt(dt);
            double acc = 0.0;
            for (int i = 0; i < rule.size(); ++i) {
                const double d = m.obs_h(mu + sd * rule.nodes[static_cast<std::size_t>(i)]) -
                                 m.obs_h(x);
                acc += rule.weights[static_cast<std::size_t>(i)] * d * d;
            }
            worst = std::max(worst, acc / dt);
        }
        return worst;
    };
    const double c4 = fitted_c(4e-3);
    const double c2 = fitted_c(2e-3);
    const double c1 = fitted_c(1e-3);
    REQUIRE(c4 <= 2.0); // bounded by sigma^2 sup|h'|^2 + drift terms
    REQUIRE(std::abs(c2 - c4) <= 0.2 * c4);
    REQUIRE(std::abs(c1 - c2) <= 0.2 * c2);
}

TEST_CASE("a non-finite observation aborts with the failing step index") {
    const auto m = make_zoo_model("nonlinear-tanh");
    const auto g = auto_grid(m, 101);
    TimeGrid tg(m.horizon_T, 16);
    auto b = simulate(m, tg, g, 3);
    b.obs_v[10] = std::numeric_limits<double>::infinity();
    try {
        solve_backward(m, g, tg, b, [](double x) { return std::tanh(x); });
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        REQUIRE(e.step() >= 0);
        REQUIRE(e.step() <= 16);
    }
}

TEST_CASE("solver composes the public one-step conditional expectations") {
    // one full step reproduced with cond_exp_forward on the stored fields
    const auto m = make_zoo_model("linear-corr");
    const auto g = auto_grid(m, 101);
    TimeGrid tg(1.0, 8);
    const auto b = simulate(m, tg, g, 6);
    auto phi = [](double x) { return std::tanh(x); };
    const auto run = solve_backward(m, g, tg, b, phi);
    const auto rule = gauss_nodes(8);

    const int n = 3;
    const double t_n = tg.time(n), t_n1 = tg.time(n + 1);
    const double dt = tg.dt();
    const auto& yf = run.y(n + 1);
    const auto& zf = run.z(n + 1);
    GridField hy = yf;
    {
        std::vector<double> v = yf.values();
        for (int j = 0; j < g.m; ++j) v[static_cast<std::size_t>(j)] *= m.obs_h(g.node(j));
        hy = GridField(g, v, yf.policy());
    }
    for (int j : {7, 29, 50, 77, 93}) {
        const double x = g.node(j);
        const double bval = m.drift_b(t_n, x);
        const double sval = sigma(m, t_n);
        // pointwise product before quadrature requires evaluating h at the
        // displaced points, so compare against the fused definition directly
        double acc_hy = 0.0;
        for (int i = 0; i < rule.size(); ++i) {
            const double xp = x + bval * dt + sval * std::sqrt(dt) * rule.nodes[static_cast<std::size_t>(i)];
            acc_hy += rule.weights[static_cast<std::size_t>(i)] * m.obs_h(xp) * interpolate(yf, xp);
        }
        const double expect =
            cond_exp_forward(yf, x, bval, sval, dt, rule) +
            (acc_hy + (m.rho_tilde(t_n1) / sigma(m, t_n1)) *
                          cond_exp_forward(zf, x, bval, sval, dt, rule)) *
                b.delta_v(n);
        REQUIRE(run.y(n).values()[static_cast<std::size_t>(j)] ==
                Catch::Approx(expect).margin(1e-13));
    }
}
