#include "superatom/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"

namespace superatom {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

std::size_t line_of(const std::string& text, std::size_t byte) {
    return 1 + std::size_t(std::count(text.begin(), text.begin() + std::min(byte, text.size()), '\n'));
}

const json& section_object(const json& root, const char* name) {
    const json& s = root.at(name);
    if (!s.is_object())
        fail(std::string("config section '") + name + "' must be an object");
    return s;
}

void expect_keys(const json& section, const std::string& prefix,
                 std::initializer_list<const char*> allowed) {
    for (const auto& item : section.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known)
            fail("unknown config key '" + prefix + item.key() + "'");
    }
}

template <typename T>
void take(const json& section, const std::string& prefix, const char* key, T& field) {
    if (!section.contains(key))
        return;
    try {
        field = section.at(key).get<T>();
    } catch (const json::exception&) {
        fail("config key '" + prefix + key + "' has the wrong type");
    }
}

void check(bool ok, const std::string& message) {
    if (!ok)
        fail(message);
}

void validate(const RunConfig& cfg) {
    check(cfg.n_max >= 1, "config key 'physical.n_max' must be at least 1");
    check(cfg.sigma_um > 0.0, "config key 'physical.sigma_um' must be positive");
    check(cfg.c6_2pi_MHz_um6 > 0.0, "config key 'physical.c6_2pi_MHz_um6' must be positive");
    check(cfg.delta_T_2pi_MHz >= 0.0, "config key 'physical.delta_T_2pi_MHz' must be >= 0");
    check(cfg.gamma_2pi_MHz >= 0.0, "config key 'physical.gamma_2pi_MHz' must be >= 0");
    check(cfg.T_us > 0.0, "config key 'physical.T_us' must be positive");
    try {
        pulse_shape_from_string(cfg.shape);
    } catch (const std::invalid_argument& e) {
        fail(std::string("config key 'pulse.shape': ") + e.what());
    }
    check(cfg.bounds_lower.size() == cfg.bounds_upper.size(),
          "config keys 'optimizer.bounds_lower' and 'optimizer.bounds_upper' must have the "
          "same length");
    for (const auto* b : {&cfg.grape_x_bounds_2pi_MHz, &cfg.grape_y_bounds_2pi_MHz,
                          &cfg.grape_z_bounds_2pi_MHz}) {
        check(b->empty() || b->size() == 2,
              "config keys 'optimizer.grape.{x,y,z}_bounds_2pi_MHz' must be [lower, upper]");
    }
    check(cfg.rel_tol > 0.0, "config key 'integrator.rel_tol' must be positive");
    check(cfg.abs_tol > 0.0, "config key 'integrator.abs_tol' must be positive");
    check(cfg.max_steps >= 1, "config key 'integrator.max_steps' must be at least 1");
    check(cfg.output_points >= 2, "config key 'integrator.output_points' must be at least 2");
    check(cfg.threads >= 1, "config key 'sweep.threads' must be at least 1");
    for (double t : cfg.sweep_T_values_us)
        check(t > 0.0, "config key 'sweep.T_values_us' entries must be positive");
    for (double s : cfg.sweep_sigma_values_um)
        check(s > 0.0, "config key 'sweep.sigma_values_um' entries must be positive");
    for (const std::string& kind : cfg.sweep_kinds) {
        try {
            pulse_shape_from_string(kind);
        } catch (const std::invalid_argument& e) {
            fail(std::string("config key 'sweep.kinds': ") + e.what());
        }
    }
}

} // namespace

RunConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail("config is not valid JSON (line " + std::to_string(line_of(json_text, e.byte)) +
             "): " + e.what());
    }
    if (!root.is_object())
        fail("config root must be a JSON object");
    expect_keys(root, "",
                {"physical", "pulse", "optimizer", "integrator", "sweep", "convergence",
                 "tables"});

    RunConfig cfg;
    bool a_given = false;
    bool sweep_t_given = false;
    bool sweep_sigma_given = false;

    if (root.contains("physical")) {
        const json& s = section_object(root, "physical");
        expect_keys(s, "physical.",
                    {"n_max", "sigma_um", "c6_2pi_MHz_um6", "delta_T_2pi_MHz", "gamma_2pi_MHz",
                     "T_us", "dephasing_free"});
        take(s, "physical.", "n_max", cfg.n_max);
        take(s, "physical.", "sigma_um", cfg.sigma_um);
        take(s, "physical.", "c6_2pi_MHz_um6", cfg.c6_2pi_MHz_um6);
        take(s, "physical.", "delta_T_2pi_MHz", cfg.delta_T_2pi_MHz);
        take(s, "physical.", "gamma_2pi_MHz", cfg.gamma_2pi_MHz);
        take(s, "physical.", "T_us", cfg.T_us);
        take(s, "physical.", "dephasing_free", cfg.dephasing_free);
    }

    if (root.contains("pulse")) {
        const json& s = section_object(root, "pulse");
        expect_keys(s, "pulse.",
                    {"shape", "A_2pi_MHz", "delta_d_2pi_MHz", "alpha", "alpha1", "alpha2",
                     "beta_leak", "delta_leak_2pi_MHz", "delta_leak2_2pi_MHz", "phase_modulated",
                     "controls_file"});
        take(s, "pulse.", "shape", cfg.shape);
        a_given = s.contains("A_2pi_MHz");
        take(s, "pulse.", "A_2pi_MHz", cfg.A_2pi_MHz);
        take(s, "pulse.", "delta_d_2pi_MHz", cfg.delta_d_2pi_MHz);
        take(s, "pulse.", "alpha", cfg.alpha);
        take(s, "pulse.", "alpha1", cfg.alpha1);
        take(s, "pulse.", "alpha2", cfg.alpha2);
        take(s, "pulse.", "beta_leak", cfg.beta_leak);
        take(s, "pulse.", "delta_leak_2pi_MHz", cfg.delta_leak_2pi_MHz);
        take(s, "pulse.", "delta_leak2_2pi_MHz", cfg.delta_leak2_2pi_MHz);
        take(s, "pulse.", "phase_modulated", cfg.phase_modulated);
        take(s, "pulse.", "controls_file", cfg.controls_file);
    }

    if (root.contains("optimizer")) {
        const json& s = section_object(root, "optimizer");
        expect_keys(s, "optimizer.",
                    {"seed", "bounds_lower", "bounds_upper", "de", "local", "grape"});
        take(s, "optimizer.", "seed", cfg.seed);
        take(s, "optimizer.", "bounds_lower", cfg.bounds_lower);
        take(s, "optimizer.", "bounds_upper", cfg.bounds_upper);
        if (s.contains("de")) {
            const json& de = section_object(s, "de");
            expect_keys(de, "optimizer.de.",
                        {"population", "max_generations", "crossover", "f_min", "f_max", "tol"});
            take(de, "optimizer.de.", "population", cfg.de_population);
            take(de, "optimizer.de.", "max_generations", cfg.de_max_generations);
            take(de, "optimizer.de.", "crossover", cfg.de_crossover);
            take(de, "optimizer.de.", "f_min", cfg.de_f_min);
            take(de, "optimizer.de.", "f_max", cfg.de_f_max);
            take(de, "optimizer.de.", "tol", cfg.de_tol);
        }
        if (s.contains("local")) {
            const json& local = section_object(s, "local");
            expect_keys(local, "optimizer.local.",
                        {"max_iterations", "tol", "fd_rel_step", "history"});
            take(local, "optimizer.local.", "max_iterations", cfg.local_max_iterations);
            take(local, "optimizer.local.", "tol", cfg.local_tol);
            take(local, "optimizer.local.", "fd_rel_step", cfg.local_fd_rel_step);
            take(local, "optimizer.local.", "history", cfg.local_history);
        }
        if (s.contains("grape")) {
            const json& grape = section_object(s, "grape");
            expect_keys(grape, "optimizer.grape.",
                        {"n_segments", "slew_limit_2pi_MHz", "constrained", "max_iterations",
                         "constraint_tol", "tol", "x_bounds_2pi_MHz", "y_bounds_2pi_MHz",
                         "z_bounds_2pi_MHz", "initial_controls_file"});
            take(grape, "optimizer.grape.", "n_segments", cfg.grape_n_segments);
            take(grape, "optimizer.grape.", "slew_limit_2pi_MHz", cfg.grape_slew_limit_2pi_MHz);
            take(grape, "optimizer.grape.", "constrained", cfg.grape_constrained);
            take(grape, "optimizer.grape.", "max_iterations", cfg.grape_max_iterations);
            take(grape, "optimizer.grape.", "constraint_tol", cfg.grape_constraint_tol);
            take(grape, "optimizer.grape.", "tol", cfg.grape_tol);
            take(grape, "optimizer.grape.", "x_bounds_2pi_MHz", cfg.grape_x_bounds_2pi_MHz);
            take(grape, "optimizer.grape.", "y_bounds_2pi_MHz", cfg.grape_y_bounds_2pi_MHz);
            take(grape, "optimizer.grape.", "z_bounds_2pi_MHz", cfg.grape_z_bounds_2pi_MHz);
            take(grape, "optimizer.grape.", "initial_controls_file",
                 cfg.grape_initial_controls_file);
        }
    }

    if (root.contains("integrator")) {
        const json& s = section_object(root, "integrator");
        expect_keys(s, "integrator.", {"rel_tol", "abs_tol", "max_steps", "output_points"});
        take(s, "integrator.", "rel_tol", cfg.rel_tol);
        take(s, "integrator.", "abs_tol", cfg.abs_tol);
        take(s, "integrator.", "max_steps", cfg.max_steps);
        take(s, "integrator.", "output_points", cfg.output_points);
    }

    if (root.contains("sweep")) {
        const json& s = section_object(root, "sweep");
        expect_keys(s, "sweep.", {"T_values_us", "sigma_values_um", "kinds", "threads"});
        sweep_t_given = s.contains("T_values_us");
        sweep_sigma_given = s.contains("sigma_values_um");
        take(s, "sweep.", "T_values_us", cfg.sweep_T_values_us);
        take(s, "sweep.", "sigma_values_um", cfg.sweep_sigma_values_um);
        take(s, "sweep.", "kinds", cfg.sweep_kinds);
        take(s, "sweep.", "threads", cfg.threads);
    }

    if (root.contains("convergence")) {
        const json& s = section_object(root, "convergence");
        expect_keys(s, "convergence.", {"tables", "amplitude_scales"});
        take(s, "convergence.", "tables", cfg.convergence_tables);
        take(s, "convergence.", "amplitude_scales", cfg.amplitude_scales);
    }

    take(root, "", "tables", cfg.tables_path);

    if (!a_given && cfg.T_us > 0.0)
        cfg.A_2pi_MHz = 1.0 / cfg.T_us;
    if (!sweep_t_given)
        cfg.sweep_T_values_us = {cfg.T_us};
    if (!sweep_sigma_given)
        cfg.sweep_sigma_values_um = {cfg.sigma_um};

    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string serialize_config(const RunConfig& cfg) {
    ordered_json j;
    ordered_json& physical = j["physical"];
    physical["n_max"] = cfg.n_max;
    physical["sigma_um"] = cfg.sigma_um;
    physical["c6_2pi_MHz_um6"] = cfg.c6_2pi_MHz_um6;
    physical["delta_T_2pi_MHz"] = cfg.delta_T_2pi_MHz;
    physical["gamma_2pi_MHz"] = cfg.gamma_2pi_MHz;
    physical["T_us"] = cfg.T_us;
    physical["dephasing_free"] = cfg.dephasing_free;

    ordered_json& pulse = j["pulse"];
    pulse["shape"] = cfg.shape;
    pulse["A_2pi_MHz"] = cfg.A_2pi_MHz;
    pulse["delta_d_2pi_MHz"] = cfg.delta_d_2pi_MHz;
    pulse["alpha"] = cfg.alpha;
    pulse["alpha1"] = cfg.alpha1;
    pulse["alpha2"] = cfg.alpha2;
    pulse["beta_leak"] = cfg.beta_leak;
    pulse["delta_leak_2pi_MHz"] = cfg.delta_leak_2pi_MHz;
    pulse["delta_leak2_2pi_MHz"] = cfg.delta_leak2_2pi_MHz;
    pulse["phase_modulated"] = cfg.phase_modulated;
    pulse["controls_file"] = cfg.controls_file;

    ordered_json& optimizer = j["optimizer"];
    optimizer["seed"] = cfg.seed;
    optimizer["bounds_lower"] = cfg.bounds_lower;
    optimizer["bounds_upper"] = cfg.bounds_upper;
    ordered_json& de = optimizer["de"];
    de["population"] = cfg.de_population;
    de["max_generations"] = cfg.de_max_generations;
    de["crossover"] = cfg.de_crossover;
    de["f_min"] = cfg.de_f_min;
    de["f_max"] = cfg.de_f_max;
    de["tol"] = cfg.de_tol;
    ordered_json& local = optimizer["local"];
    local["max_iterations"] = cfg.local_max_iterations;
    local["tol"] = cfg.local_tol;
    local["fd_rel_step"] = cfg.local_fd_rel_step;
    local["history"] = cfg.local_history;
    ordered_json& grape = optimizer["grape"];
    grape["n_segments"] = cfg.grape_n_segments;
    grape["slew_limit_2pi_MHz"] = cfg.grape_slew_limit_2pi_MHz;
    grape["constrained"] = cfg.grape_constrained;
    grape["max_iterations"] = cfg.grape_max_iterations;
    grape["constraint_tol"] = cfg.grape_constraint_tol;
    grape["tol"] = cfg.grape_tol;
    grape["x_bounds_2pi_MHz"] = cfg.grape_x_bounds_2pi_MHz;
    grape["y_bounds_2pi_MHz"] = cfg.grape_y_bounds_2pi_MHz;
    grape["z_bounds_2pi_MHz"] = cfg.grape_z_bounds_2pi_MHz;
    grape["initial_controls_file"] = cfg.grape_initial_controls_file;

    ordered_json& integrator = j["integrator"];
    integrator["rel_tol"] = cfg.rel_tol;
    integrator["abs_tol"] = cfg.abs_tol;
    integrator["max_steps"] = cfg.max_steps;
    integrator["output_points"] = cfg.output_points;

    ordered_json& sweep = j["sweep"];
    sweep["T_values_us"] = cfg.sweep_T_values_us;
    sweep["sigma_values_um"] = cfg.sweep_sigma_values_um;
    sweep["kinds"] = cfg.sweep_kinds;
    sweep["threads"] = cfg.threads;

    ordered_json& convergence = j["convergence"];
    convergence["tables"] = cfg.convergence_tables;
    convergence["amplitude_scales"] = cfg.amplitude_scales;

    j["tables"] = cfg.tables_path;
    return j.dump();
}

LeakageTables resolved_tables(const RunConfig& cfg) {
    if (cfg.tables_path.empty())
        return bundled_tables();
    return load_tables(cfg.tables_path);
}

PhysicalParams physical_params(const RunConfig& cfg) {
    PhysicalParams p;
    p.n_max = cfg.n_max;
    p.sigma = cfg.sigma_um;
    p.c6 = two_pi * cfg.c6_2pi_MHz_um6;
    p.delta_T = two_pi * cfg.delta_T_2pi_MHz;
    p.gamma = two_pi * cfg.gamma_2pi_MHz;
    p.T = cfg.T_us;
    return p;
}

IntegratorConfig integrator_config(const RunConfig& cfg) {
    IntegratorConfig c;
    c.rel_tol = cfg.rel_tol;
    c.abs_tol = cfg.abs_tol;
    c.max_steps = cfg.max_steps;
    c.output_points = cfg.output_points;
    return c;
}

PulseShape pulse_shape(const RunConfig& cfg) { return pulse_shape_from_string(cfg.shape); }

PulseParams pulse_params(const RunConfig& cfg) {
    PulseParams p;
    p.shape = pulse_shape(cfg);
    p.A = two_pi * cfg.A_2pi_MHz;
    p.delta_d = two_pi * cfg.delta_d_2pi_MHz;
    p.alpha = cfg.alpha;
    p.alpha1 = cfg.alpha1;
    p.alpha2 = cfg.alpha2;
    p.beta_leak = cfg.beta_leak;
    p.delta_leak = two_pi * cfg.delta_leak_2pi_MHz;
    p.delta_leak2 = two_pi * cfg.delta_leak2_2pi_MHz;
    p.phase_modulated = cfg.phase_modulated;
    return p;
}

Bounds optimizer_bounds(const RunConfig& cfg) {
    if (cfg.bounds_lower.empty())
        return default_bounds(pulse_shape(cfg), cfg.T_us);
    const auto n = static_cast<Eigen::Index>(cfg.bounds_lower.size());
    Bounds b;
    b.lower.resize(n);
    b.upper.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double unit = i < 2 ? two_pi : 1.0;
        b.lower[i] = unit * cfg.bounds_lower[std::size_t(i)];
        b.upper[i] = unit * cfg.bounds_upper[std::size_t(i)];
    }
    return b;
}

DeConfig de_config(const RunConfig& cfg) {
    DeConfig c;
    c.population = cfg.de_population;
    c.max_generations = cfg.de_max_generations;
    c.crossover = cfg.de_crossover;
    c.f_min = cfg.de_f_min;
    c.f_max = cfg.de_f_max;
    c.tol = cfg.de_tol;
    c.integrator = integrator_config(cfg);
    c.integrator.output_points = 2;
    c.threads = cfg.threads;
    return c;
}

LocalConfig local_config(const RunConfig& cfg) {
    LocalConfig c;
    c.max_iterations = cfg.local_max_iterations;
    c.tol = cfg.local_tol;
    c.fd_rel_step = cfg.local_fd_rel_step;
    c.history = cfg.local_history;
    c.integrator = integrator_config(cfg);
    c.integrator.output_points = 2;
    return c;
}

GrapeProblem grape_problem(const RunConfig& cfg) {
    GrapeProblem p = default_grape_problem(cfg.T_us, cfg.grape_n_segments);
    p.slew_limit = two_pi * cfg.grape_slew_limit_2pi_MHz;
    p.constrained = cfg.grape_constrained;
    const auto apply = [](const std::vector<double>& user, ChannelBounds& channel) {
        if (user.size() == 2) {
            channel.lower = two_pi * user[0];
            channel.upper = two_pi * user[1];
        }
    };
    apply(cfg.grape_x_bounds_2pi_MHz, p.x);
    apply(cfg.grape_y_bounds_2pi_MHz, p.y);
    apply(cfg.grape_z_bounds_2pi_MHz, p.z);
    return p;
}

GrapeConfig grape_config(const RunConfig& cfg) {
    GrapeConfig c;
    c.max_iterations = cfg.grape_max_iterations;
    c.constraint_tol = cfg.grape_constraint_tol;
    c.tol = cfg.grape_tol;
    c.integrator = integrator_config(cfg);
    c.integrator.output_points = 2;
    c.seed = cfg.seed;
    return c;
}

SweepSpec sweep_spec(const RunConfig& cfg) {
    SweepSpec spec;
    spec.T_values = cfg.sweep_T_values_us;
    spec.sigma_values = cfg.sweep_sigma_values_um;
    spec.kinds.clear();
    for (const std::string& kind : cfg.sweep_kinds)
        spec.kinds.push_back(pulse_shape_from_string(kind));
    spec.base = physical_params(cfg);
    spec.dephasing_free = cfg.dephasing_free;
    spec.seed = cfg.seed;
    spec.threads = cfg.threads;
    spec.de = de_config(cfg);
    spec.de.threads = 1;  // the sweep parallelizes over cells, not inside them
    spec.local = local_config(cfg);
    spec.integrator = integrator_config(cfg);
    return spec;
}

} // namespace superatom
