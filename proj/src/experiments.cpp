#include "superatom/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

#include "superatom/pulses.hpp"

namespace superatom {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

PulseParams baseline_pulse(double T) {
    PulseParams p;
    p.shape = PulseShape::SineSquared;
    p.A = pi_pulse_amplitude(T);
    return p;
}

PulseParams drag_prototype_for(const SuperatomModel& model, const std::string& dominant) {
    const auto pos = dominant.find('_');
    const int k = std::stoi(dominant.substr(pos + 1));
    PulseParams proto;
    proto.shape = PulseShape::NonPerturbativeDrag;
    proto.delta_leak = -model.h_drift(model.space.idx_S(k), model.space.idx_S(k)).real();
    proto.beta_leak = 2.0 * model.h_x(model.space.idx_R(0), model.space.idx_S(k)).real();
    return proto;
}

} // namespace

std::string dominant_leakage(const std::map<std::string, double>& final_populations) {
    int best = -1;
    double top = 0.0;
    for (int k = 0;; ++k) {
        const auto it = final_populations.find("S_" + std::to_string(k));
        if (it == final_populations.end())
            break;
        if (best < 0 || it->second > top) {
            best = k;
            top = it->second;
        }
    }
    if (best < 0)
        throw std::invalid_argument("populations carry no S_k entries");
    return "S_" + std::to_string(best);
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t t_index, std::size_t sigma_index) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (0x9E3779B97F4A7C15ull + t_index));
    h = splitmix64(h ^ (0xC2B2AE3D27D4EB4Full + sigma_index));
    return h;
}

std::vector<SweepCell> run_sweep(const SweepSpec& spec, const LeakageTables& tables) {
    if (spec.T_values.empty() || spec.sigma_values.empty())
        throw std::invalid_argument("sweep needs at least one T and one sigma");
    if (spec.kinds.empty())
        throw std::invalid_argument("sweep needs at least one pulse kind");
    for (PulseShape kind : spec.kinds) {
        if (kind != PulseShape::SineSquared && kind != PulseShape::NonPerturbativeDrag)
            throw std::invalid_argument("sweep supports sine_squared and non_perturbative_drag");
    }
    if (spec.threads < 1)
        throw std::invalid_argument("sweep needs at least one worker");
    validate_tables(tables);
    if (tables.n_max != spec.base.n_max)
        throw std::invalid_argument("tables n_max does not match the sweep model");

    const bool optimize = std::find(spec.kinds.begin(), spec.kinds.end(),
                                    PulseShape::NonPerturbativeDrag) != spec.kinds.end();
    const std::size_t nt = spec.T_values.size();
    const std::size_t ns = spec.sigma_values.size();
    std::vector<SweepCell> cells(nt * ns);

    const auto work = [&](std::size_t index) {
        const std::size_t ti = index / ns;
        const std::size_t si = index % ns;
        SweepCell& cell = cells[index];
        cell.T = spec.T_values[ti];
        cell.sigma = spec.sigma_values[si];
        cell.cell_seed = cell_seed(spec.seed, ti, si);
        try {
            PhysicalParams p = spec.base;
            p.T = cell.T;
            p.sigma = cell.sigma;
            const SuperatomModel model = build_model(p, tables, spec.dephasing_free);

            const Trajectory traj = evolve(model, baseline_pulse(cell.T), cell.T, spec.integrator);
            cell.baseline = traj.final_populations;
            cell.baseline_loss = loss(traj);
            cell.dominant = dominant_leakage(cell.baseline);

            if (optimize) {
                const PulseParams proto = drag_prototype_for(model, cell.dominant);
                const Bounds bounds = default_bounds(proto.shape, cell.T);
                DeConfig de = spec.de;
                de.integrator = spec.integrator;
                de.integrator.output_points = 2;
                de.initial_guess = Eigen::Vector3d(pi_pulse_amplitude(cell.T), 0.0, 0.0);
                LocalConfig local = spec.local;
                local.integrator = spec.integrator;
                local.integrator.output_points = 2;
                const OptimizationResult result =
                    optimize_parametrized(proto, model, bounds, de, local, cell.cell_seed);
                cell.optimized = result.final_populations;
                cell.optimized_loss = result.loss;
                cell.parameters = result.parameters;
            }
        } catch (const std::exception& e) {
            cell.failed = true;
            cell.error = e.what();
        }
    };

    const int workers = static_cast<int>(std::min<std::size_t>(spec.threads, cells.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
                    work(i);
            });
        }
        for (auto& t : pool)
            t.join();
    }
    return cells;
}

void write_sweep(std::ostream& out, const SweepSpec& spec, const std::vector<SweepCell>& cells) {
    const StateSpace space = make_state_space(spec.base.n_max);
    out << "# T sigma pulse";
    for (const auto& label : space.labels)
        out << ' ' << label;
    out << " dominant M_below_5p4 R0_above_89p8 S3_below_0p1 A_2pi_MHz delta_d_2pi_MHz alpha\n";
    out << std::setprecision(17);

    const auto emit = [&](const SweepCell& cell, const std::string& kind,
                          const std::map<std::string, double>& pops, bool with_params) {
        out << cell.T << ' ' << cell.sigma << ' ' << kind;
        for (const auto& label : space.labels)
            out << ' ' << pops.at(label);
        const double s3 = pops.count("S_3") ? pops.at("S_3") : 0.0;
        out << ' ' << cell.dominant;
        out << ' ' << (pops.at("M") < 0.054 ? 1 : 0);
        out << ' ' << (pops.at("R_0") > 0.898 ? 1 : 0);
        out << ' ' << (s3 < 0.001 ? 1 : 0);
        if (with_params && cell.parameters.size() == 3) {
            out << ' ' << cell.parameters[0] / two_pi << ' ' << cell.parameters[1] / two_pi
                << ' ' << cell.parameters[2];
        } else {
            out << " - - -";
        }
        out << '\n';
    };

    for (const auto& cell : cells) {
        if (cell.failed) {
            out << "# failed T=" << cell.T << " sigma=" << cell.sigma << ": " << cell.error
                << '\n';
            continue;
        }
        for (PulseShape kind : spec.kinds) {
            if (kind == PulseShape::SineSquared)
                emit(cell, to_string(kind), cell.baseline, false);
            else
                emit(cell, to_string(kind), cell.optimized, true);
        }
    }
}

void save_sweep(const std::string& path, const SweepSpec& spec,
                const std::vector<SweepCell>& cells) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    write_sweep(out, spec, cells);
    if (!out.good())
        throw std::runtime_error("failed while writing " + path);
}

std::vector<ConvergenceCurve> convergence_scan(const std::vector<LeakageTables>& tables,
                                               const std::vector<double>& amplitude_scales,
                                               const PhysicalParams& base,
                                               const IntegratorConfig& cfg) {
    if (tables.size() < 2)
        throw std::invalid_argument("convergence scan needs at least two tables");
    if (amplitude_scales.empty())
        throw std::invalid_argument("convergence scan needs at least one amplitude scale");
    std::set<int> seen;
    for (const auto& t : tables) {
        validate_tables(t);
        if (!seen.insert(t.n_max).second)
            throw std::invalid_argument("convergence scan tables must have distinct n_max");
    }

    std::vector<ConvergenceCurve> curves(tables.size());
    std::size_t ref = 0;
    for (std::size_t i = 1; i < tables.size(); ++i) {
        if (tables[i].n_max > tables[ref].n_max)
            ref = i;
    }

    for (std::size_t i = 0; i < tables.size(); ++i) {
        PhysicalParams p = base;
        p.n_max = tables[i].n_max;
        const SuperatomModel model = build_model(p, tables[i]);
        ConvergenceCurve& curve = curves[i];
        curve.n_max = tables[i].n_max;
        curve.scales = amplitude_scales;
        curve.total_rydberg.reserve(amplitude_scales.size());
        for (double scale : amplitude_scales) {
            PulseParams pulse = baseline_pulse(p.T);
            pulse.A *= scale;
            const Matrix rho = evolve_final(model, pulse, p.T, cfg);
            curve.total_rydberg.push_back(1.0 - rho(0, 0).real());
        }
    }

    for (std::size_t i = 0; i < curves.size(); ++i) {
        double acc = 0.0;
        for (std::size_t s = 0; s < amplitude_scales.size(); ++s)
            acc += std::abs(curves[i].total_rydberg[s] - curves[ref].total_rydberg[s]);
        curves[i].mean_difference = acc / double(amplitude_scales.size());
    }
    return curves;
}

std::map<std::string, double> high_n_scenarios(double c6, double T, double sigma,
                                               const LeakageTables& tables,
                                               IntegratorConfig cfg) {
    PhysicalParams p;
    p.n_max = tables.n_max;
    p.c6 = c6;
    p.T = T;
    p.sigma = sigma;
    const SuperatomModel model = build_model(p, tables);
    cfg.max_steps = std::max(cfg.max_steps, 5000000L);
    const Trajectory traj = evolve(model, baseline_pulse(T), T, cfg);
    return traj.final_populations;
}

DephasingFreeStudy dephasing_free_study(double T, double sigma, const LeakageTables& tables,
                                        const DeConfig& de, const LocalConfig& local,
                                        std::uint64_t seed) {
    PhysicalParams p;
    p.n_max = tables.n_max;
    p.T = T;
    p.sigma = sigma;
    const SuperatomModel free_model = build_model(p, tables, true);

    DephasingFreeStudy study;
    study.baseline = evolve(free_model, baseline_pulse(T), T, {}).final_populations;

    const PulseParams proto = leak_targeted_prototype(PulseShape::MultiLevelDrag, free_model);
    const Bounds bounds = default_bounds(proto.shape, T);
    DeConfig warm = de;
    warm.initial_guess = Eigen::VectorXd::Zero(5);
    warm.initial_guess[0] = pi_pulse_amplitude(T);
    study.result = optimize_parametrized(proto, free_model, bounds, warm, local, seed);
    study.optimized = study.result.final_populations;

    const SuperatomModel full_model = build_model(p, tables, false);
    study.restored = evolve(full_model, study.result.pulse, T, {}).final_populations;
    return study;
}

} // namespace superatom
