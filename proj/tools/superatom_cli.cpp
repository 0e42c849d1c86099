// superatom_cli - config-driven front end for the simulation and pulse toolkit
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "superatom/config.hpp"
#include "superatom/experiments.hpp"
#include "superatom/grape.hpp"
#include "superatom/integrator.hpp"
#include "superatom/model.hpp"
#include "superatom/optimizer.hpp"

namespace {

using namespace superatom;

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out << std::setprecision(17);
    return out;
}

void write_header(std::ostream& out, const char* command, const RunConfig& cfg) {
    out << "command=" << command << '\n';
    out << "seed=" << cfg.seed << '\n';
}

void write_footer(std::ostream& out, const RunConfig& cfg) {
    out << "config=" << serialize_config(cfg) << '\n';
}

void write_populations(std::ostream& out, const std::string& prefix,
                       const std::map<std::string, double>& populations) {
    for (const auto& [label, value] : populations)
        out << prefix << label << '=' << value << '\n';
}

void write_pulse(std::ostream& out, const PulseParams& pulse) {
    out << "pulse=" << to_string(pulse.shape) << '\n';
    out << "A_2pi_MHz=" << pulse.A / two_pi << '\n';
    out << "delta_d_2pi_MHz=" << pulse.delta_d / two_pi << '\n';
    out << "alpha=" << pulse.alpha << '\n';
    out << "alpha1=" << pulse.alpha1 << '\n';
    out << "alpha2=" << pulse.alpha2 << '\n';
    out << "beta_leak=" << pulse.beta_leak << '\n';
    out << "delta_leak_2pi_MHz=" << pulse.delta_leak / two_pi << '\n';
    out << "delta_leak2_2pi_MHz=" << pulse.delta_leak2 / two_pi << '\n';
}

// a zero delta_leak on a DRAG shape requests automatic targeting of the
// dominant leakage channel(s); explicit values pass through untouched
PulseParams resolve_pulse(const RunConfig& cfg, const SuperatomModel& model) {
    PulseParams p = pulse_params(cfg);
    const bool drag = p.shape == PulseShape::PerturbativeDrag ||
                      p.shape == PulseShape::NonPerturbativeDrag ||
                      p.shape == PulseShape::MultiLevelDrag;
    if (!drag || p.delta_leak != 0.0)
        return p;
    PulseParams proto = leak_targeted_prototype(p.shape, model);
    proto.A = p.A;
    proto.delta_d = p.delta_d;
    proto.alpha = p.alpha;
    proto.alpha1 = p.alpha1;
    proto.alpha2 = p.alpha2;
    proto.phase_modulated = p.phase_modulated;
    return proto;
}

int cmd_simulate(const RunConfig& cfg, const std::string& out_path) {
    const LeakageTables tables = resolved_tables(cfg);
    const SuperatomModel model = build_model(physical_params(cfg), tables, cfg.dephasing_free);
    Trajectory traj;
    PulseParams pulse;
    if (pulse_shape(cfg) == PulseShape::PiecewiseConstant) {
        if (cfg.controls_file.empty())
            throw ConfigError(
                "config key 'pulse.controls_file' is required for shape piecewise_constant");
        traj = evolve(model, load_controls(cfg.controls_file), cfg.T_us, integrator_config(cfg));
        pulse.shape = PulseShape::PiecewiseConstant;
    } else {
        pulse = resolve_pulse(cfg, model);
        traj = evolve(model, pulse, cfg.T_us, integrator_config(cfg));
    }
    save_trajectory(out_path + ".traj", traj);

    std::ofstream out = open_out(out_path);
    write_header(out, "simulate", cfg);
    write_pulse(out, pulse);
    out << "loss=" << loss(traj) << '\n';
    write_populations(out, "P_", traj.final_populations);
    out << "trajectory=" << out_path << ".traj" << '\n';
    write_footer(out, cfg);
    return 0;
}

int cmd_optimize(const RunConfig& cfg, const std::string& out_path) {
    const PulseShape shape = pulse_shape(cfg);
    if (shape == PulseShape::SineSquared || shape == PulseShape::PiecewiseConstant)
        throw ConfigError("config key 'pulse.shape' (" + cfg.shape +
                          ") has no optimizable parametrization");
    const LeakageTables tables = resolved_tables(cfg);
    const SuperatomModel model = build_model(physical_params(cfg), tables, cfg.dephasing_free);
    const PulseParams proto = resolve_pulse(cfg, model);
    DeConfig de = de_config(cfg);
    de.initial_guess = Eigen::VectorXd::Zero(parameter_count(shape));
    de.initial_guess[0] = proto.A;
    de.initial_guess[1] = proto.delta_d;
    if (de.initial_guess.size() > 2)
        de.initial_guess[2] = proto.alpha;
    if (de.initial_guess.size() > 4) {
        de.initial_guess[3] = proto.alpha1;
        de.initial_guess[4] = proto.alpha2;
    }
    const OptimizationResult result =
        optimize_parametrized(proto, model, optimizer_bounds(cfg), de, local_config(cfg),
                              cfg.seed);

    std::ofstream out = open_out(out_path);
    write_header(out, "optimize", cfg);
    write_pulse(out, result.pulse);
    out << "loss=" << result.loss << '\n';
    out << "evaluations=" << result.evaluations << '\n';
    out << "converged=" << (result.converged ? 1 : 0) << '\n';
    write_populations(out, "P_", result.final_populations);
    write_footer(out, cfg);
    return 0;
}

int cmd_grape(const RunConfig& cfg, const std::string& out_path) {
    const LeakageTables tables = resolved_tables(cfg);
    const SuperatomModel model = build_model(physical_params(cfg), tables, cfg.dephasing_free);
    GrapeProblem problem = grape_problem(cfg);
    if (!cfg.grape_initial_controls_file.empty())
        problem.initial =
            piecewise_from_samples(load_controls(cfg.grape_initial_controls_file), cfg.T_us);
    const OptimizationResult result = grape_optimize(problem, model, grape_config(cfg));
    save_controls(out_path + ".controls", piecewise_to_samples(result.controls, cfg.T_us));

    std::ofstream out = open_out(out_path);
    write_header(out, "grape", cfg);
    out << "n_segments=" << cfg.grape_n_segments << '\n';
    out << "constrained=" << (cfg.grape_constrained ? 1 : 0) << '\n';
    out << "loss=" << result.loss << '\n';
    out << "evaluations=" << result.evaluations << '\n';
    out << "converged=" << (result.converged ? 1 : 0) << '\n';
    write_populations(out, "P_", result.final_populations);
    out << "controls=" << out_path << ".controls" << '\n';
    write_footer(out, cfg);
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& out_path) {
    const LeakageTables tables = resolved_tables(cfg);
    const SweepSpec spec = sweep_spec(cfg);
    const std::vector<SweepCell> cells = run_sweep(spec, tables);
    save_sweep(out_path + ".sweep", spec, cells);

    std::size_t failed = 0;
    for (const auto& cell : cells)
        failed += cell.failed ? 1 : 0;

    std::ofstream out = open_out(out_path);
    write_header(out, "sweep", cfg);
    out << "cells=" << cells.size() << '\n';
    out << "failed=" << failed << '\n';
    out << "table=" << out_path << ".sweep" << '\n';
    write_footer(out, cfg);
    return 0;
}

int cmd_convergence(const RunConfig& cfg, const std::string& out_path) {
    std::vector<LeakageTables> tables;
    tables.push_back(resolved_tables(cfg));
    for (const std::string& path : cfg.convergence_tables)
        tables.push_back(load_tables(path));
    const std::vector<ConvergenceCurve> curves =
        convergence_scan(tables, cfg.amplitude_scales, physical_params(cfg),
                         integrator_config(cfg));

    std::ofstream data = open_out(out_path + ".conv");
    data << "# n_max scale total_rydberg\n";
    for (const auto& curve : curves)
        for (std::size_t i = 0; i < curve.scales.size(); ++i)
            data << curve.n_max << ' ' << curve.scales[i] << ' ' << curve.total_rydberg[i]
                 << '\n';

    std::ofstream out = open_out(out_path);
    write_header(out, "convergence", cfg);
    out << "curves=" << curves.size() << '\n';
    for (const auto& curve : curves)
        out << "mean_difference_n" << curve.n_max << '=' << curve.mean_difference << '\n';
    out << "table=" << out_path << ".conv" << '\n';
    write_footer(out, cfg);
    return 0;
}

int cmd_dephasing_free(const RunConfig& cfg, const std::string& out_path) {
    const LeakageTables tables = resolved_tables(cfg);
    const DephasingFreeStudy study = dephasing_free_study(
        cfg.T_us, cfg.sigma_um, tables, de_config(cfg), local_config(cfg), cfg.seed);

    std::ofstream out = open_out(out_path);
    write_header(out, "dephasing-free", cfg);
    write_pulse(out, study.result.pulse);
    out << "loss=" << study.result.loss << '\n';
    out << "converged=" << (study.result.converged ? 1 : 0) << '\n';
    write_populations(out, "baseline_P_", study.baseline);
    write_populations(out, "optimized_P_", study.optimized);
    write_populations(out, "restored_P_", study.restored);
    write_footer(out, cfg);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"collective Rydberg excitation: simulation and pulse optimization"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    int threads = 1;
    bool dephasing_free = false;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")->required();
        cmd->add_option("--out", out_path, "summary output path; artifacts add suffixes")
            ->required();
        cmd->add_option("--seed", seed, "override optimizer.seed");
        cmd->add_option("--threads", threads, "override sweep.threads");
        cmd->add_flag("--dephasing-free", dephasing_free, "override physical.dephasing_free");
        return cmd;
    };
    add_common(app.add_subcommand("simulate", "integrate the configured pulse"));
    add_common(app.add_subcommand("optimize", "two-stage parametrized pulse optimization"));
    add_common(app.add_subcommand("grape", "piecewise-constant control optimization"));
    add_common(app.add_subcommand("sweep", "grid sweep over T and sigma"));
    add_common(app.add_subcommand("convergence", "basis-size convergence scan"));
    add_common(app.add_subcommand("dephasing-free", "dephasing-free optimization study"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    CLI::App* active = app.get_subcommands().front();
    const std::string command = active->get_name();

    try {
        RunConfig cfg = load_config(config_path);
        if (active->count("--seed"))
            cfg.seed = seed;
        if (active->count("--threads"))
            cfg.threads = threads;
        if (dephasing_free)
            cfg.dephasing_free = true;

        if (command == "simulate")
            return cmd_simulate(cfg, out_path);
        if (command == "optimize")
            return cmd_optimize(cfg, out_path);
        if (command == "grape")
            return cmd_grape(cfg, out_path);
        if (command == "sweep")
            return cmd_sweep(cfg, out_path);
        if (command == "convergence")
            return cmd_convergence(cfg, out_path);
        return cmd_dephasing_free(cfg, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const IntegrationError& e) {
        std::cerr << "integration failed: " << e.what() << '\n';
        return 2;
    } catch (const OptimizationError& e) {
        std::cerr << "optimization failed: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
