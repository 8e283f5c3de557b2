// Command-line driver: simulate | fk | filter | oracle | adjoint | compare.
// Exit codes: 0 ok, 1 config error, 2 numeric error, 3 I/O error,
// 4 acceptance gate failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <bdsde/bdsde.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::vector<int>> slices;
};

struct RunContext {
    bdsde::ExperimentConfig cfg;
    bdsde::FilteringModel model;
    bdsde::SpaceGrid grid;
    bdsde::TimeGrid tgrid;
    bdsde::SolverOptions opt;
};

RunContext make_context(const std::string& config_path, const CliOverrides& ov) {
    RunContext ctx{bdsde::load_config(config_path), {}, {}, {}, {}};
    if (ov.seed) ctx.cfg.seeds = {*ov.seed};
    if (ov.out_dir) ctx.cfg.out_dir = *ov.out_dir;
    if (ov.slices) ctx.cfg.slices = *ov.slices;
    ctx.model = ctx.cfg.build_model();
    ctx.grid = ctx.cfg.build_grid(ctx.model);
    ctx.tgrid = ctx.cfg.build_tgrid(ctx.model);
    ctx.opt.quad_nodes = ctx.cfg.quad_k;
    bdsde::require_valid(ctx.model, ctx.grid);
    for (int s : ctx.cfg.slices)
        if (s > ctx.tgrid.n_steps)
            throw bdsde::ConfigError("slice index " + std::to_string(s) +
                                     " exceeds n_steps");
    return ctx;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw bdsde::IoError("cannot create output directory '" + dir + "'");
}

std::string seed_tag(std::uint64_t s) { return "seed" + std::to_string(s); }

bool model_is_linear_kb_comparable(const RunContext& ctx) {
    if (ctx.cfg.model_name == "linear") return ctx.cfg.rho_tilde == 0.0;
    return ctx.cfg.model_name == "linear-kb";
}

struct LinearParams {
    double a, c, rho, m0, p0_var;
};

LinearParams linear_params(const RunContext& ctx) {
    if (ctx.cfg.model_name == "linear")
        return {ctx.cfg.lin_a, ctx.cfg.lin_c, ctx.cfg.rho, ctx.cfg.p0_mean,
                ctx.cfg.p0_var};
    // zoo linear-kb
    return {-1.0, 1.0, 0.5, 0.0, 0.25};
}

bool observation_is_constant_zero(const RunContext& ctx) {
    for (int j = 0; j < ctx.grid.m; ++j)
        if (ctx.model.obs_h(ctx.grid.node(j)) != 0.0) return false;
    return true;
}

int cmd_simulate(const RunContext& ctx) {
    ensure_out_dir(ctx.cfg.out_dir);
    std::vector<std::string> files(ctx.cfg.seeds.size());
    bdsde::parallel_for(static_cast<int>(ctx.cfg.seeds.size()), [&](int i) {
        const auto seed = ctx.cfg.seeds[static_cast<std::size_t>(i)];
        const auto bundle = bdsde::simulate(ctx.model, ctx.tgrid, ctx.grid, seed);
        const std::string name = "path_" + seed_tag(seed) + ".csv";
        bdsde::write_path_csv((fs::path(ctx.cfg.out_dir) / name).string(), bundle);
        files[static_cast<std::size_t>(i)] = name;
    });
    bdsde::write_manifest(ctx.cfg.out_dir, "simulate", ctx.cfg.raw, files,
                          bdsde::kVersion);
    return 0;
}

int cmd_fk(const RunContext& ctx) {
    ensure_out_dir(ctx.cfg.out_dir);
    std::vector<int> slices = ctx.cfg.slices;
    if (slices.empty()) slices = {0};
    const auto phi = ctx.cfg.build_phi();
    std::vector<std::vector<std::string>> files(ctx.cfg.seeds.size());
    bdsde::parallel_for(static_cast<int>(ctx.cfg.seeds.size()), [&](int i) {
        const auto seed = ctx.cfg.seeds[static_cast<std::size_t>(i)];
        const auto bundle = bdsde::simulate(ctx.model, ctx.tgrid, ctx.grid, seed);
        const auto run =
            bdsde::solve_backward(ctx.model, ctx.grid, ctx.tgrid, bundle, phi, ctx.opt);
        for (int s : slices) {
            const std::string name =
                "fk_" + seed_tag(seed) + "_slice" + std::to_string(s) + ".csv";
            bdsde::write_field_csv((fs::path(ctx.cfg.out_dir) / name).string(),
                                   run.y(s));
            files[static_cast<std::size_t>(i)].push_back(name);
        }
    });
    std::vector<std::string> flat;
    for (auto& v : files) flat.insert(flat.end(), v.begin(), v.end());
    bdsde::write_manifest(ctx.cfg.out_dir, "fk", ctx.cfg.raw, flat, bdsde::kVersion);
    return 0;
}

int cmd_filter(const RunContext& ctx) {
    ensure_out_dir(ctx.cfg.out_dir);
    std::vector<std::vector<std::string>> files(ctx.cfg.seeds.size());
    bdsde::parallel_for(static_cast<int>(ctx.cfg.seeds.size()), [&](int i) {
        const auto seed = ctx.cfg.seeds[static_cast<std::size_t>(i)];
        const auto bundle = bdsde::simulate(ctx.model, ctx.tgrid, ctx.grid, seed);
        const auto run = bdsde::solve_filter(ctx.model, ctx.grid, ctx.tgrid, bundle, ctx.opt);
        const std::string sname = "summary_" + seed_tag(seed) + ".csv";
        bdsde::write_summary_csv((fs::path(ctx.cfg.out_dir) / sname).string(),
                                 bdsde::filter_summary(run));
        files[static_cast<std::size_t>(i)].push_back(sname);
        for (int s : ctx.cfg.slices) {
            const std::string name =
                "density_" + seed_tag(seed) + "_slice" + std::to_string(s) + ".csv";
            bdsde::write_density_csv((fs::path(ctx.cfg.out_dir) / name).string(),
                                     run.ybar(s), run.log_scale[static_cast<std::size_t>(s)]);
            files[static_cast<std::size_t>(i)].push_back(name);
        }
    });
    std::vector<std::string> flat;
    for (auto& v : files) flat.insert(flat.end(), v.begin(), v.end());
    bdsde::write_manifest(ctx.cfg.out_dir, "filter", ctx.cfg.raw, flat, bdsde::kVersion);
    return 0;
}

int cmd_oracle(const RunContext& ctx) {
    ensure_out_dir(ctx.cfg.out_dir);
    const bool kb_ok = model_is_linear_kb_comparable(ctx) && ctx.cfg.with_kalman_bucy;
    std::vector<std::vector<std::string>> files(ctx.cfg.seeds.size());
    bdsde::parallel_for(static_cast<int>(ctx.cfg.seeds.size()), [&](int i) {
        const auto seed = ctx.cfg.seeds[static_cast<std::size_t>(i)];
        const auto bundle = bdsde::simulate(ctx.model, ctx.tgrid, ctx.grid, seed);
        if (kb_ok) {
            const auto lp = linear_params(ctx);
            const auto kb = bdsde::kalman_bucy(lp.a, lp.c, lp.rho, lp.m0, lp.p0_var, bundle);
            const std::string name = "oracle_kb_" + seed_tag(seed) + ".csv";
            bdsde::write_summary_csv((fs::path(ctx.cfg.out_dir) / name).string(),
                                     bdsde::kalman_summary(kb));
            files[static_cast<std::size_t>(i)].push_back(name);
        }
        if (ctx.cfg.with_ks) {
            const auto ks = bdsde::ks_posterior_summary(ctx.model, bundle,
                                                        ctx.cfg.ks_particles, seed,
                                                        &ctx.grid);
            const std::string name = "oracle_ks_" + seed_tag(seed) + ".csv";
            const double nan = std::numeric_limits<double>::quiet_NaN();
            bdsde::write_summary_csv(
                (fs::path(ctx.cfg.out_dir) / name).string(),
                {{ctx.tgrid.horizon, ks.mean, ks.variance, ks.mass, nan}});
            files[static_cast<std::size_t>(i)].push_back(name);
        }
    });
    std::vector<std::string> flat;
    for (auto& v : files) flat.insert(flat.end(), v.begin(), v.end());
    bdsde::write_manifest(ctx.cfg.out_dir, "oracle", ctx.cfg.raw, flat, bdsde::kVersion);
    return 0;
}

int cmd_adjoint(const RunContext& ctx) {
    ensure_out_dir(ctx.cfg.out_dir);
    const auto phi = ctx.cfg.build_phi();
    std::vector<std::string> files(ctx.cfg.seeds.size());
    bdsde::parallel_for(static_cast<int>(ctx.cfg.seeds.size()), [&](int i) {
        const auto seed = ctx.cfg.seeds[static_cast<std::size_t>(i)];
        const auto bundle = bdsde::simulate(ctx.model, ctx.tgrid, ctx.grid, seed);
        const auto fk =
            bdsde::solve_backward(ctx.model, ctx.grid, ctx.tgrid, bundle, phi, ctx.opt);
        const auto filt = bdsde::solve_filter(ctx.model, ctx.grid, ctx.tgrid, bundle, ctx.opt);
        const auto tr = bdsde::adjoint_trace(fk, filt);
        const std::string name = "trace_" + seed_tag(seed) + ".csv";
        bdsde::write_trace_csv((fs::path(ctx.cfg.out_dir) / name).string(), tr);
        files[static_cast<std::size_t>(i)] = name;
    });
    bdsde::write_manifest(ctx.cfg.out_dir, "adjoint", ctx.cfg.raw, files,
                          bdsde::kVersion);
    return 0;
}

// Gate thresholds are fixed here, not configurable: a run either meets the
// advertised accuracy or exits nonzero.
constexpr double kGateKalmanRmse = 0.02;
constexpr double kGateKalmanVarRel = 0.10;
constexpr double kGateZ = 3.0;
constexpr double kGateAdjointDrift = 0.05;
constexpr double kGateTrivialLogWeight = 1e-12;

int cmd_compare(const RunContext& ctx) {
    ensure_out_dir(ctx.cfg.out_dir);
    const auto phi = ctx.cfg.build_phi();
    const bool kb_ok = model_is_linear_kb_comparable(ctx) && ctx.cfg.with_kalman_bucy;
    const bool h_zero = observation_is_constant_zero(ctx);
    const double fk_x0 = ctx.cfg.fk_x0_set ? ctx.cfg.fk_x0 : ctx.model.p0_mean;

    const int n_seeds = static_cast<int>(ctx.cfg.seeds.size());
    struct SeedRecord {
        double kb_rmse = 0.0, kb_var_rel = 0.0;
        double fk_z = 0.0, unnorm_z = 0.0;
        double unnorm_filter = 0.0, unnorm_mc = 0.0, unnorm_se = 0.0;
        double adjoint_drift = 0.0;
        double max_abs_log_weight = 0.0;
        double ess = 0.0;
    };
    std::vector<SeedRecord> recs(static_cast<std::size_t>(n_seeds));

    bdsde::parallel_for(n_seeds, [&](int i) {
        const auto seed = ctx.cfg.seeds[static_cast<std::size_t>(i)];
        SeedRecord& r = recs[static_cast<std::size_t>(i)];
        const auto bundle = bdsde::simulate(ctx.model, ctx.tgrid, ctx.grid, seed);
        const auto filt = bdsde::solve_filter(ctx.model, ctx.grid, ctx.tgrid, bundle, ctx.opt);

        if (kb_ok) {
            const auto lp = linear_params(ctx);
            const auto kb = bdsde::kalman_bucy(lp.a, lp.c, lp.rho, lp.m0, lp.p0_var, bundle);
            double se = 0.0, vrel = 0.0;
            const int N = ctx.tgrid.n_steps;
            for (int n = 0; n <= N; ++n) {
                const auto [mean, var] = bdsde::posterior_moments(filt, n);
                const double dm = mean - kb.mean[static_cast<std::size_t>(n)];
                se += dm * dm;
                vrel += std::abs(var - kb.variance[static_cast<std::size_t>(n)]) /
                        kb.variance[static_cast<std::size_t>(n)];
            }
            r.kb_rmse = std::sqrt(se / (N + 1));
            r.kb_var_rel = vrel / (N + 1);
        }

        if (ctx.cfg.with_fk_check) {
            const auto rep = bdsde::feynman_kac_check(ctx.model, ctx.grid, ctx.tgrid,
                                                      bundle, phi, fk_x0,
                                                      ctx.cfg.ks_particles, seed, ctx.opt);
            r.fk_z = rep.z_score;
        }

        if (ctx.cfg.with_ks) {
            const auto mc = bdsde::unnormalized_ks(ctx.model, bundle, phi,
                                                   ctx.cfg.ks_particles, seed,
                                                   bdsde::KSStart::density(), &ctx.grid);
            const auto phi_field =
                bdsde::sample_field(ctx.grid, phi, bdsde::BoundaryPolicy::Zero);
            const int N = ctx.tgrid.n_steps;
            r.unnorm_filter = bdsde::inner_product(filt.ybar(N), phi_field) *
                            filt.scale_factor(N);
            r.unnorm_mc = mc.value;
            r.unnorm_se = mc.std_error;
            r.unnorm_z = (mc.std_error == 0.0)
                           ? (r.unnorm_filter == mc.value ? 0.0 : INFINITY)
                           : (r.unnorm_filter - mc.value) / mc.std_error;
            const auto ks = bdsde::ks_posterior_summary(ctx.model, bundle,
                                                        ctx.cfg.ks_particles, seed,
                                                        &ctx.grid);
            r.max_abs_log_weight = ks.max_abs_log_weight;
            r.ess = ks.effective_sample_size;
        }

        if (ctx.cfg.with_adjoint) {
            const auto fk =
                bdsde::solve_backward(ctx.model, ctx.grid, ctx.tgrid, bundle, phi, ctx.opt);
            const auto tr = bdsde::adjoint_trace(fk, filt);
            r.adjoint_drift = tr.degenerate ? 0.0 : tr.max_relative_drift;
        }
    });

    // gates: a fraction-based gate tolerates floor(0.1 n) failing seeds
    const int allowed_fail = n_seeds / 10;
    json gates = json::object();
    std::vector<std::string> failing;
    auto add_gate = [&](const std::string& name, bool enabled, bool pass,
                        const json& detail) {
        json g = detail;
        g["enabled"] = enabled;
        g["pass"] = pass;
        gates[name] = g;
        if (enabled && !pass) failing.push_back(name);
    };

    {
        double rmse = 0.0, vrel = 0.0;
        for (const auto& r : recs) {
            rmse += r.kb_rmse;
            vrel += r.kb_var_rel;
        }
        rmse /= n_seeds;
        vrel /= n_seeds;
        add_gate("kalman-rmse", kb_ok, rmse <= kGateKalmanRmse,
                 {{"value", rmse}, {"threshold", kGateKalmanRmse}});
        add_gate("kalman-variance", kb_ok, vrel <= kGateKalmanVarRel,
                 {{"value", vrel}, {"threshold", kGateKalmanVarRel}});
    }
    {
        int bad = 0;
        for (const auto& r : recs)
            if (!(std::abs(r.fk_z) <= kGateZ)) ++bad;
        add_gate("fk-z", ctx.cfg.with_fk_check, bad <= allowed_fail,
                 {{"failing_seeds", bad}, {"allowed", allowed_fail}, {"threshold", kGateZ}});
    }
    {
        int bad = 0;
        for (const auto& r : recs)
            if (!(std::abs(r.unnorm_z) <= kGateZ)) ++bad;
        add_gate("unnormalized-identity-z", ctx.cfg.with_ks, bad <= allowed_fail,
                 {{"failing_seeds", bad}, {"allowed", allowed_fail}, {"threshold", kGateZ}});
    }
    {
        int bad = 0;
        for (const auto& r : recs)
            if (!(r.adjoint_drift <= kGateAdjointDrift)) ++bad;
        add_gate("adjoint-drift", ctx.cfg.with_adjoint, bad <= allowed_fail,
                 {{"failing_seeds", bad}, {"allowed", allowed_fail},
                  {"threshold", kGateAdjointDrift}});
    }
    {
        double worst = 0.0;
        for (const auto& r : recs) worst = std::max(worst, r.max_abs_log_weight);
        add_gate("trivial-weights", h_zero && ctx.cfg.with_ks,
                 worst <= kGateTrivialLogWeight,
                 {{"value", worst}, {"threshold", kGateTrivialLogWeight}});
    }

    json per_seed = json::array();
    for (int i = 0; i < n_seeds; ++i) {
        const auto& r = recs[static_cast<std::size_t>(i)];
        per_seed.push_back({{"seed", ctx.cfg.seeds[static_cast<std::size_t>(i)]},
                            {"kb_rmse", r.kb_rmse},
                            {"kb_var_rel", r.kb_var_rel},
                            {"fk_z", r.fk_z},
                            {"unnorm_z", r.unnorm_z},
                            {"unnorm_filter", r.unnorm_filter},
                            {"unnorm_mc", r.unnorm_mc},
                            {"unnorm_se", r.unnorm_se},
                            {"adjoint_drift", r.adjoint_drift},
                            {"ess", r.ess},
                            {"max_abs_log_weight", r.max_abs_log_weight}});
    }
    json report;
    report["model"] = ctx.cfg.model_name;
    report["n_seeds"] = n_seeds;
    report["per_seed"] = per_seed;
    report["gates"] = gates;
    report["failing_gates"] = failing;
    {
        std::ofstream out(fs::path(ctx.cfg.out_dir) / "report.json",
                          std::ios::binary);
        if (!out) throw bdsde::IoError("cannot write report.json");
        out << report.dump(2) << '\n';
    }
    bdsde::write_manifest(ctx.cfg.out_dir, "compare", ctx.cfg.raw, {"report.json"},
                          bdsde::kVersion);
    if (!failing.empty()) {
        std::cerr << "acceptance gates failed:";
        for (const auto& f : failing) std::cerr << ' ' << f;
        std::cerr << '\n';
        return 4;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid solver for the optimal filtering of 1-D partially observed diffusions"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides ov;
    std::uint64_t seed_val = 0;
    std::string out_val;
    std::vector<int> slices_val;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed_val, "run a single seed instead of the config list");
        sub->add_option("--out", out_val, "output directory override");
        sub->add_option("--slices", slices_val, "time-slice indices override")
            ->delimiter(',');
    };

    auto* c_sim = app.add_subcommand("simulate", "write truth/observation path CSVs");
    auto* c_fk = app.add_subcommand("fk", "solve the backward value field");
    auto* c_filter = app.add_subcommand("filter", "run the density filter");
    auto* c_oracle = app.add_subcommand("oracle", "run reference solutions");
    auto* c_adjoint = app.add_subcommand("adjoint", "pairing trace of backward and forward runs");
    auto* c_compare = app.add_subcommand("compare", "filter vs oracles with acceptance gates");
    for (auto* sub : {c_sim, c_fk, c_filter, c_oracle, c_adjoint, c_compare})
        add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    for (auto* sub : {c_sim, c_fk, c_filter, c_oracle, c_adjoint, c_compare}) {
        if (!sub->parsed()) continue;
        if (sub->count("--seed")) ov.seed = seed_val;
        if (sub->count("--out")) ov.out_dir = out_val;
        if (sub->count("--slices")) ov.slices = slices_val;
    }

    try {
        const RunContext ctx = make_context(config_path, ov);
        if (c_sim->parsed()) return cmd_simulate(ctx);
        if (c_fk->parsed()) return cmd_fk(ctx);
        if (c_filter->parsed()) return cmd_filter(ctx);
        if (c_oracle->parsed()) return cmd_oracle(ctx);
        if (c_adjoint->parsed()) return cmd_adjoint(ctx);
        if (c_compare->parsed()) return cmd_compare(ctx);
        return 1;
    } catch (const bdsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const bdsde::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 2;
    } catch (const bdsde::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
