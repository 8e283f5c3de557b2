#include <catch2/catch_amalgamated.hpp>

#include <bdsde/csv.hpp>
#include <bdsde/model.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(BDSDE_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    std::array<char, 512> buf{};
    while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bdsde_cli_" + std::to_string(std::rand()) + "_" +
                std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    fs::path write_config(const std::string& text) const {
        const auto p = path / "exp.cfg";
        std::ofstream out(p);
        out << text;
        return p;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_lines(const fs::path& p) {
    std::ifstream in(p);
    int n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

} // namespace

TEST_CASE("simulate writes per-seed paths plus a verifiable manifest") {
    TempDir tmp;
    const auto cfg = tmp.write_config("model = linear-kb\nn_steps = 50\nseeds = 1,2\nout_dir = " +
                                      (tmp.path / "o1").string() + "\n");
    const auto r = run_cli("simulate --config " + cfg.string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(tmp.path / "o1" / "path_seed1.csv"));
    REQUIRE(fs::exists(tmp.path / "o1" / "path_seed2.csv"));
    REQUIRE(bdsde::verify_manifest((tmp.path / "o1").string()).empty());

    // rerun into a second directory: byte-identical files
    const auto r2 = run_cli("simulate --config " + cfg.string() + " --out " +
                            (tmp.path / "o2").string());
    REQUIRE(r2.exit_code == 0);
    REQUIRE(slurp(tmp.path / "o1" / "path_seed1.csv") ==
            slurp(tmp.path / "o2" / "path_seed1.csv"));
    REQUIRE(slurp(tmp.path / "o1" / "path_seed2.csv") ==
            slurp(tmp.path / "o2" / "path_seed2.csv"));
}

TEST_CASE("config errors exit with code 1 and name the key") {
    TempDir tmp;
    const auto bad_key = tmp.write_config("model = linear-kb\nrho_tildee = 0.1\n");
    const auto r1 = run_cli("simulate --config " + bad_key.string());
    REQUIRE(r1.exit_code == 1);
    REQUIRE(r1.output.find("rho_tildee") != std::string::npos);

    const auto zero_steps = tmp.write_config("model = linear-kb\nn_steps = 0\n");
    REQUIRE(run_cli("simulate --config " + zero_steps.string()).exit_code == 1);
}

TEST_CASE("missing config file exits with the I/O code") {
    const auto r = run_cli("simulate --config /no/such/file.cfg");
    REQUIRE(r.exit_code == 3);
}

TEST_CASE("filter emits the summary and requested density slices") {
    TempDir tmp;
    const auto out = (tmp.path / "out").string();
    const auto cfg = tmp.write_config(
        "model = linear-kb\nn_steps = 40\nseeds = 3\nslices = 0,40\nout_dir = " + out + "\n");
    const auto r = run_cli("filter --config " + cfg.string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    // summary: header + n_steps+1 rows
    REQUIRE(count_lines(tmp.path / "out" / "summary_seed3.csv") == 42);
    REQUIRE(fs::exists(tmp.path / "out" / "density_seed3_slice0.csv"));
    REQUIRE(fs::exists(tmp.path / "out" / "density_seed3_slice40.csv"));

    // slice 0 equals p0 sampled on the grid, round-tripped through 17 digits
    const auto m = bdsde::make_zoo_model("linear-kb");
    const auto g = bdsde::auto_grid(m);
    std::ifstream in(tmp.path / "out" / "density_seed3_slice0.csv");
    std::string line;
    std::getline(in, line);
    for (int j = 0; j < g.m; ++j) {
        std::getline(in, line);
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const double x = std::strtod(line.substr(0, c1).c_str(), nullptr);
        const double v = std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr);
        REQUIRE(x == g.node(j));
        REQUIRE(v == m.p0(g.node(j)));
    }

    // rerun is byte-identical
    const auto out2 = (tmp.path / "out2").string();
    REQUIRE(run_cli("filter --config " + cfg.string() + " --out " + out2).exit_code == 0);
    REQUIRE(slurp(tmp.path / "out" / "summary_seed3.csv") ==
            slurp(tmp.path / "out2" / "summary_seed3.csv"));
}

TEST_CASE("seed and slice overrides") {
    TempDir tmp;
    const auto out = (tmp.path / "o").string();
    const auto cfg = tmp.write_config("model = linear-kb\nn_steps = 30\nseeds = 1..4\nout_dir = " + out + "\n");
    const auto r = run_cli("simulate --config " + cfg.string() + " --seed 9");
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(tmp.path / "o" / "path_seed9.csv"));
    REQUIRE_FALSE(fs::exists(tmp.path / "o" / "path_seed1.csv"));

    const auto r2 = run_cli("filter --config " + cfg.string() + " --seed 9 --slices 15 --out " +
                            (tmp.path / "o2").string());
    CAPTURE(r2.output);
    REQUIRE(r2.exit_code == 0);
    REQUIRE(fs::exists(tmp.path / "o2" / "density_seed9_slice15.csv"));
}

TEST_CASE("fk writes the initial-time slice by default") {
    TempDir tmp;
    const auto out = (tmp.path / "o").string();
    const auto cfg = tmp.write_config(
        "model = nonlinear-tanh\nn_steps = 25\nseeds = 2\nphi = tanh\nout_dir = " + out + "\n");
    const auto r = run_cli("fk --config " + cfg.string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(tmp.path / "o" / "fk_seed2_slice0.csv"));
    REQUIRE(count_lines(tmp.path / "o" / "fk_seed2_slice0.csv") == 402);
}

TEST_CASE("oracle emits reference summaries") {
    TempDir tmp;
    const auto out = (tmp.path / "o").string();
    const auto cfg = tmp.write_config(
        "model = linear-kb\nn_steps = 50\nseeds = 1\nks_particles = 500\nout_dir = " + out + "\n");
    const auto r = run_cli("oracle --config " + cfg.string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(count_lines(tmp.path / "o" / "oracle_kb_seed1.csv") == 52);
    REQUIRE(count_lines(tmp.path / "o" / "oracle_ks_seed1.csv") == 2);
    REQUIRE(bdsde::verify_manifest(out).empty());
}

TEST_CASE("adjoint writes the pairing trace") {
    TempDir tmp;
    const auto out = (tmp.path / "o").string();
    const auto cfg = tmp.write_config(
        "model = nonlinear-tanh\nn_steps = 20\nseeds = 4\nout_dir = " + out + "\n");
    const auto r = run_cli("adjoint --config " + cfg.string());
    REQUIRE(r.exit_code == 0);
    REQUIRE(count_lines(tmp.path / "o" / "trace_seed4.csv") == 22);
}

TEST_CASE("compare passes its gates on the linear benchmark") {
    TempDir tmp;
    const auto out = (tmp.path / "o").string();
    const auto cfg = tmp.write_config(
        "model = linear-kb\nn_steps = 250\nseeds = 1,2\nks_particles = 4000\nphi = tanh\nout_dir = " +
        out + "\n");
    const auto r = run_cli("compare --config " + cfg.string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(tmp.path / "o" / "report.json"));
    const auto report = slurp(tmp.path / "o" / "report.json");
    REQUIRE(report.find("kalman-rmse") != std::string::npos);
    REQUIRE(report.find("\"failing_gates\": []") != std::string::npos);
}

TEST_CASE("compare fails the adjoint gate at an absurd step size") {
    TempDir tmp;
    const auto out = (tmp.path / "o").string();
    const auto cfg = tmp.write_config(
        "model = nonlinear-tanh\nn_steps = 2\nseeds = 1\nwith_ks = false\n"
        "with_fk_check = false\nwith_kalman_bucy = false\nout_dir = " + out + "\n");
    const auto r = run_cli("compare --config " + cfg.string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 4);
    REQUIRE(r.output.find("adjoint-drift") != std::string::npos);
}

TEST_CASE("trivial-weights gate activates for decoupled observations") {
    TempDir tmp;
    const auto out = (tmp.path / "o").string();
    const auto cfg = tmp.write_config(
        "model = heat-gauss\nn_steps = 60\nseeds = 1\nks_particles = 300\nphi = id\n"
        "with_fk_check = false\nout_dir = " + out + "\n");
    const auto r = run_cli("compare --config " + cfg.string());
    CAPTURE(r.output);
    REQUIRE(r.exit_code == 0);
    const auto report = slurp(tmp.path / "o" / "report.json");
    REQUIRE(report.find("trivial-weights") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
    REQUIRE(run_cli("--help").exit_code == 0);
    REQUIRE(run_cli("simulate --help").exit_code == 0);
}
