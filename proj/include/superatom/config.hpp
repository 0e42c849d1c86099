// config.hpp - Run configuration: JSON ingestion, defaults, unit conversion
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "superatom/experiments.hpp"
#include "superatom/grape.hpp"
#include "superatom/model.hpp"
#include "superatom/optimizer.hpp"
#include "superatom/propagator.hpp"
#include "superatom/pulses.hpp"

namespace superatom {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mirrors the config file: user-facing frequencies stay in 2pi*MHz here and
// are converted to rad/us exactly once, in the *_params/*_config accessors.
// parse_config fills every default, so a serialized RunConfig re-parses to an
// identical run.
struct RunConfig {
    // [physical]
    int n_max{8};
    double sigma_um{4.6};
    double c6_2pi_MHz_um6{1.54e8};
    double delta_T_2pi_MHz{0.08};
    double gamma_2pi_MHz{0.04};
    double T_us{0.25};
    bool dephasing_free{false};

    // [pulse]; A_2pi_MHz defaults to the pi-pulse amplitude 1/T_us; a zero
    // delta_leak requests automatic leakage targeting for the DRAG shapes
    std::string shape{"sine_squared"};
    double A_2pi_MHz{0.0};
    double delta_d_2pi_MHz{0.0};
    double alpha{0.0};
    double alpha1{0.0};
    double alpha2{0.0};
    double beta_leak{0.0};
    double delta_leak_2pi_MHz{0.0};
    double delta_leak2_2pi_MHz{0.0};
    bool phase_modulated{false};
    std::string controls_file;

    // [optimizer]; bounds entries are per parameter in its own user-facing
    // unit (2pi*MHz for the two leading frequency entries, plain numbers for
    // the alphas); empty bounds select the documented default box
    std::uint64_t seed{0};
    std::vector<double> bounds_lower;
    std::vector<double> bounds_upper;
    int de_population{0};
    int de_max_generations{200};
    double de_crossover{0.7};
    double de_f_min{0.5};
    double de_f_max{1.0};
    double de_tol{0.01};
    int local_max_iterations{200};
    double local_tol{1e-9};
    double local_fd_rel_step{1e-6};
    int local_history{10};
    int grape_n_segments{50};
    double grape_slew_limit_2pi_MHz{0.5};
    bool grape_constrained{true};
    int grape_max_iterations{500};
    double grape_constraint_tol{1e-8};
    double grape_tol{1e-9};
    std::vector<double> grape_x_bounds_2pi_MHz;   // [lower, upper]; empty = default
    std::vector<double> grape_y_bounds_2pi_MHz;
    std::vector<double> grape_z_bounds_2pi_MHz;
    std::string grape_initial_controls_file;

    // [integrator]
    double rel_tol{1e-8};
    double abs_tol{1e-10};
    long max_steps{50000};
    int output_points{100};

    // [sweep]; grids default to the single configured point
    std::vector<double> sweep_T_values_us;
    std::vector<double> sweep_sigma_values_um;
    std::vector<std::string> sweep_kinds{"sine_squared", "non_perturbative_drag"};
    int threads{1};

    // [convergence]; extra table files scanned against the base table
    std::vector<std::string> convergence_tables;
    std::vector<double> amplitude_scales{0.5, 0.75, 1.0, 1.25, 1.5};

    // optional tables file; empty selects the bundled n_max = 8 table
    std::string tables_path;
};

// rejects unknown keys by name; validates with messages naming the key
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// canonical single-line JSON carrying every resolved field
std::string serialize_config(const RunConfig& cfg);

LeakageTables resolved_tables(const RunConfig& cfg);

PhysicalParams physical_params(const RunConfig& cfg);
IntegratorConfig integrator_config(const RunConfig& cfg);
PulseShape pulse_shape(const RunConfig& cfg);
PulseParams pulse_params(const RunConfig& cfg);
Bounds optimizer_bounds(const RunConfig& cfg);
DeConfig de_config(const RunConfig& cfg);
LocalConfig local_config(const RunConfig& cfg);
GrapeProblem grape_problem(const RunConfig& cfg);
GrapeConfig grape_config(const RunConfig& cfg);
SweepSpec sweep_spec(const RunConfig& cfg);

} // namespace superatom
