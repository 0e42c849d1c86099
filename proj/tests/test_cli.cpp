#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "superatom/config.hpp"
#include "superatom/experiments.hpp"
#include "superatom/grape.hpp"

using namespace superatom;

namespace {

struct RunResult {
    int status{-1};
    std::string out;
    std::string err;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    REQUIRE(out.good());
}

RunResult run_cli(const std::string& args) {
    const std::string command = std::string(SUPERATOM_CLI_PATH) + " " + args +
                                " > cli_stdout.txt 2> cli_stderr.txt";
    const int raw = std::system(command.c_str());
    RunResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp("cli_stdout.txt");
    r.err = slurp("cli_stderr.txt");
    return r;
}

std::map<std::string, std::string> read_summary(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos)
            kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

double num(const std::map<std::string, std::string>& kv, const std::string& key) {
    REQUIRE(kv.count(key) == 1);
    return std::stod(kv.at(key));
}

LeakageTables truncated_bundled(int n_max) {
    const LeakageTables& full = bundled_tables();
    REQUIRE(n_max < full.n_max);
    LeakageTables t;
    t.n_max = n_max;
    t.beta = full.beta.topLeftCorner(n_max + 1, n_max);
    t.delta_s_raw = full.delta_s_raw.head(n_max);
    t.gamma_s_raw = full.gamma_s_raw.head(n_max);
    return t;
}

} // namespace

TEST_CASE("simulate reproduces the baseline point and writes artifacts") {
    spit("cli_default.json", "{}");
    const RunResult r = run_cli("simulate --config cli_default.json --out cli_sim");
    REQUIRE(r.status == 0);

    const auto kv = read_summary("cli_sim");
    CHECK(kv.at("command") == "simulate");
    CHECK(kv.at("seed") == "0");
    CHECK(kv.at("pulse") == "sine_squared");
    CHECK(num(kv, "A_2pi_MHz") == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(num(kv, "P_R_0") == doctest::Approx(0.842979549).epsilon(1e-5));
    CHECK(num(kv, "loss") == doctest::Approx(1.0 - 0.842979549).epsilon(1e-5));

    std::ifstream traj(kv.at("trajectory"));
    REQUIRE(traj.good());
    std::string header;
    std::getline(traj, header);
    CHECK(header.rfind("# t G R_0", 0) == 0);
    int rows = 0;
    for (std::string line; std::getline(traj, line);)
        ++rows;
    CHECK(rows == 100);
}

TEST_CASE("config echo re-parses to an identical run") {
    spit("cli_default.json", "{}");
    REQUIRE(run_cli("simulate --config cli_default.json --out cli_echo_a").status == 0);
    const auto kv = read_summary("cli_echo_a");
    REQUIRE(kv.count("config") == 1);
    spit("cli_echo.json", kv.at("config"));
    REQUIRE(run_cli("simulate --config cli_echo.json --out cli_echo_a").status == 0);
    const std::string second = slurp("cli_echo_a");
    CHECK(second.find("P_R_0=") != std::string::npos);
    const auto kv2 = read_summary("cli_echo_a");
    CHECK(kv2.at("config") == kv.at("config"));
    CHECK(kv2.at("loss") == kv.at("loss"));
}

TEST_CASE("config validation failures exit 1 and name the offender") {
    spit("cli_bad_sigma.json", R"({"physical": {"sigma_um": 0}})");
    RunResult r = run_cli("simulate --config cli_bad_sigma.json --out cli_x");
    CHECK(r.status == 1);
    CHECK(r.err.find("sigma_um") != std::string::npos);

    spit("cli_bad_key.json", R"({"physical": {"sigmaum": 4.6}})");
    r = run_cli("simulate --config cli_bad_key.json --out cli_x");
    CHECK(r.status == 1);
    CHECK(r.err.find("sigmaum") != std::string::npos);

    spit("cli_bad_json.json", "{\n\"physical\": {\"T_us\": 0.25,}\n}");
    r = run_cli("simulate --config cli_bad_json.json --out cli_x");
    CHECK(r.status == 1);
    CHECK(r.err.find("line") != std::string::npos);

    spit("cli_bad_shape.json", R"({"pulse": {"shape": "sine_squared"}})");
    r = run_cli("optimize --config cli_bad_shape.json --out cli_x");
    CHECK(r.status == 1);
    CHECK(r.err.find("pulse.shape") != std::string::npos);
}

TEST_CASE("I/O failures exit 3 and step exhaustion exits 2") {
    RunResult r = run_cli("simulate --config cli_no_such_config.json --out cli_x");
    CHECK(r.status == 3);

    spit("cli_default.json", "{}");
    r = run_cli("simulate --config cli_default.json --out cli-no-such-dir/out");
    CHECK(r.status == 3);

    spit("cli_stiff.json", R"({"integrator": {"max_steps": 10}})");
    r = run_cli("simulate --config cli_stiff.json --out cli_x");
    CHECK(r.status == 2);
}

TEST_CASE("convergence needs a second table and vanishes against itself") {
    spit("cli_default.json", "{}");
    RunResult r = run_cli("convergence --config cli_default.json --out cli_conv");
    CHECK(r.status == 1);

    save_tables("cli_tables_n7.txt", truncated_bundled(7));
    spit("cli_conv.json",
         R"({"convergence": {"tables": ["cli_tables_n7.txt"], "amplitude_scales": [0.8, 1.0]}})");
    r = run_cli("convergence --config cli_conv.json --out cli_conv");
    REQUIRE(r.status == 0);

    const auto kv = read_summary("cli_conv");
    CHECK(num(kv, "curves") == 2);
    CHECK(kv.at("mean_difference_n8") == "0");
    CHECK(num(kv, "mean_difference_n7") > 0.0);

    std::ifstream data(kv.at("table"));
    REQUIRE(data.good());
    int rows = 0;
    for (std::string line; std::getline(data, line);)
        ++rows;
    CHECK(rows == 1 + 2 * 2);
}

TEST_CASE("grape emits feasible controls and a piecewise replay matches") {
    const std::string cfg_text =
        R"({"optimizer": {"grape": {"n_segments": 6, "max_iterations": 4}}})";
    spit("cli_grape.json", cfg_text);
    const RunResult r = run_cli("grape --config cli_grape.json --out cli_gr");
    REQUIRE(r.status == 0);
    const auto kv = read_summary("cli_gr");
    CHECK(num(kv, "loss") < 1.0);

    const RunConfig cfg = parse_config(cfg_text);
    const GrapeProblem problem = grape_problem(cfg);
    const PiecewiseControls controls =
        piecewise_from_samples(load_controls(kv.at("controls")), cfg.T_us);
    REQUIRE(controls.omega_x.size() == 6);
    CHECK(controls.omega_x.front() == 0.0);
    CHECK(controls.omega_x.back() == 0.0);
    CHECK(controls.omega_y.front() == 0.0);
    CHECK(controls.omega_y.back() == 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(controls.omega_x[i] >= problem.x.lower - 1e-9);
        CHECK(controls.omega_x[i] <= problem.x.upper + 1e-9);
        CHECK(controls.omega_z[i] >= problem.z.lower - 1e-9);
        CHECK(controls.omega_z[i] <= problem.z.upper + 1e-9);
        if (i + 1 < 6) {
            CHECK(std::abs(controls.omega_x[i + 1] - controls.omega_x[i]) <=
                  problem.slew_limit + 1e-9);
            CHECK(std::abs(controls.omega_y[i + 1] - controls.omega_y[i]) <=
                  problem.slew_limit + 1e-9);
            CHECK(std::abs(controls.omega_z[i + 1] - controls.omega_z[i]) <=
                  problem.slew_limit + 1e-9);
        }
    }

    spit("cli_replay.json",
         R"({"pulse": {"shape": "piecewise_constant", "controls_file": "cli_gr.controls"}})");
    REQUIRE(run_cli("simulate --config cli_replay.json --out cli_replay").status == 0);
    const auto replay = read_summary("cli_replay");
    for (const auto& [key, value] : kv) {
        if (key.rfind("P_", 0) != 0)
            continue;
        CHECK(std::abs(std::stod(replay.at(key)) - std::stod(value)) <= 1e-6);
    }
}

TEST_CASE("a 1x1 sweep equals the simulate plus optimize composition") {
    const std::string cfg_text =
        R"({"optimizer": {"de": {"population": 6, "max_generations": 2},
                          "local": {"max_iterations": 4}}})";
    spit("cli_sweep.json", cfg_text);
    REQUIRE(run_cli("sweep --config cli_sweep.json --out cli_sw").status == 0);
    const auto sweep_kv = read_summary("cli_sw");
    CHECK(num(sweep_kv, "cells") == 1);
    CHECK(num(sweep_kv, "failed") == 0);

    std::ifstream table(sweep_kv.at("table"));
    REQUIRE(table.good());
    std::string header, baseline_row, drag_row;
    REQUIRE(std::getline(table, header));
    REQUIRE(std::getline(table, baseline_row));
    REQUIRE(std::getline(table, drag_row));

    const auto fields = [](const std::string& line) {
        std::istringstream in(line);
        std::vector<std::string> out;
        for (std::string f; in >> f;)
            out.push_back(f);
        return out;
    };
    const auto base_fields = fields(baseline_row);
    const auto drag_fields = fields(drag_row);
    REQUIRE(base_fields.size() == 30);
    REQUIRE(drag_fields.size() == 30);

    REQUIRE(run_cli("simulate --config cli_sweep.json --out cli_sw_sim").status == 0);
    const auto sim = read_summary("cli_sw_sim");
    CHECK(std::stod(base_fields[4]) == num(sim, "P_R_0"));
    CHECK(std::stod(base_fields[3]) == num(sim, "P_G"));
    CHECK(std::stod(base_fields[22]) == num(sim, "P_M"));

    spit("cli_opt.json",
         R"({"pulse": {"shape": "non_perturbative_drag"},
             "optimizer": {"de": {"population": 6, "max_generations": 2},
                           "local": {"max_iterations": 4}}})");
    const std::uint64_t seed = cell_seed(0, 0, 0);
    REQUIRE(run_cli("optimize --config cli_opt.json --out cli_sw_opt --seed " +
                    std::to_string(seed))
                .status == 0);
    const auto opt = read_summary("cli_sw_opt");
    CHECK(opt.at("seed") == std::to_string(seed));
    CHECK(std::stod(drag_fields[4]) == num(opt, "P_R_0"));
    CHECK(std::stod(drag_fields[27]) == num(opt, "A_2pi_MHz"));
    CHECK(std::stod(drag_fields[28]) == num(opt, "delta_d_2pi_MHz"));
    CHECK(std::stod(drag_fields[29]) == num(opt, "alpha"));

    CHECK(num(opt, "P_R_0") >= num(sim, "P_R_0") - 1e-6);
}

TEST_CASE("seed and threads overrides are honored and deterministic") {
    spit("cli_opt2.json",
         R"({"pulse": {"shape": "detuned_sine_squared"},
             "optimizer": {"de": {"population": 5, "max_generations": 2},
                           "local": {"max_iterations": 2}}})");
    REQUIRE(run_cli("optimize --config cli_opt2.json --out cli_seed_a --seed 5").status == 0);
    REQUIRE(run_cli("optimize --config cli_opt2.json --out cli_seed_b --seed 5").status == 0);
    const std::string a = slurp("cli_seed_a");
    const std::string b = slurp("cli_seed_b");
    CHECK(a == b);
    const auto kv = read_summary("cli_seed_a");
    CHECK(kv.at("seed") == "5");
    CHECK(kv.at("config").find("\"seed\":5") != std::string::npos);

    spit("cli_sweep_row.json",
         R"({"sweep": {"T_values_us": [0.2, 0.25], "kinds": ["sine_squared"]}})");
    REQUIRE(run_cli("sweep --config cli_sweep_row.json --out cli_tw_1").status == 0);
    REQUIRE(
        run_cli("sweep --config cli_sweep_row.json --out cli_tw_2 --threads 2").status == 0);
    CHECK(slurp("cli_tw_1.sweep") == slurp("cli_tw_2.sweep"));
}

TEST_CASE("dephasing-free study runs end to end") {
    spit("cli_df.json",
         R"({"optimizer": {"de": {"population": 4, "max_generations": 1},
                           "local": {"max_iterations": 1}}})");
    const RunResult r = run_cli("dephasing-free --config cli_df.json --out cli_df");
    REQUIRE(r.status == 0);
    const auto kv = read_summary("cli_df");
    CHECK(kv.at("pulse") == "multi_level_drag");
    CHECK(num(kv, "baseline_P_R_0") == doctest::Approx(0.892251288).epsilon(1e-5));
    CHECK(kv.at("baseline_P_M") == "0");
    CHECK(kv.at("optimized_P_M") == "0");
    CHECK(num(kv, "optimized_P_R_0") >= num(kv, "baseline_P_R_0") - 1e-9);
    CHECK(num(kv, "restored_P_R_0") < num(kv, "optimized_P_R_0"));
}

TEST_CASE("the dephasing-free flag empties the sinks in a plain simulation") {
    spit("cli_default.json", "{}");
    const RunResult r =
        run_cli("simulate --config cli_default.json --out cli_df_sim --dephasing-free");
    REQUIRE(r.status == 0);
    const auto kv = read_summary("cli_df_sim");
    CHECK(kv.at("P_M") == "0");
    CHECK(kv.at("P_M_th") == "0");
    CHECK(kv.at("config").find("\"dephasing_free\":true") != std::string::npos);
}
