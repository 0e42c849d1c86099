// pulses.hpp - Analytic control-pulse family, piecewise-constant controls, smoothing
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace superatom {

enum class PulseShape {
    SineSquared,
    DetunedSineSquared,
    PerturbativeDrag,
    NonPerturbativeDrag,
    MultiLevelDrag,
    PiecewiseConstant,
};

struct PiecewiseControls {
    std::vector<double> omega_x;  // one value per uniform segment of [0, T]
    std::vector<double> omega_y;
    std::vector<double> omega_z;
};

struct PulseParams {
    PulseShape shape{PulseShape::SineSquared};
    double A{0.0};            // primary amplitude, rad/us
    double delta_d{0.0};      // constant detuning, rad/us
    double alpha{0.0};        // first-order counterdiabatic coefficient
    double alpha1{0.0};       // second-channel coefficient (multi-level)
    double alpha2{0.0};       // in-phase correction coefficient (multi-level)
    double beta_leak{0.0};    // coupling of R_0 to the targeted leakage state
    double delta_leak{0.0};   // leakage detuning, rad/us
    double delta_leak2{0.0};  // second leakage detuning, rad/us (multi-level)
    // detuning applied as an accumulated phase on the complex drive
    // instead of the diagonal detuning channel
    bool phase_modulated{false};
    PiecewiseControls segments;
};

struct ControlValue {
    double x{0.0};
    double y{0.0};
    double z{0.0};
};

struct ControlSamples {
    Eigen::VectorXd grid;     // strictly increasing times in [0, T], us
    Eigen::VectorXd omega_x;  // rad/us
    Eigen::VectorXd omega_y;
    Eigen::VectorXd omega_z;
};

double pi_pulse_amplitude(double T);

const char* to_string(PulseShape shape);
PulseShape pulse_shape_from_string(const std::string& name);

void validate_pulse(const PulseParams& p, double T);

// closed-form channel values at time t; zero-order hold for PiecewiseConstant
ControlValue eval_pulse(const PulseParams& p, double T, double t);

ControlSamples sample_pulse(const PulseParams& p, double T, const Eigen::VectorXd& grid);

ControlSamples savitzky_golay(const ControlSamples& samples, int window, int order);

void write_controls(std::ostream& out, const ControlSamples& samples);
ControlSamples read_controls(std::istream& in);
void save_controls(const std::string& path, const ControlSamples& samples);
ControlSamples load_controls(const std::string& path);

// segment-start sample rows <-> uniform piecewise-constant controls on [0, T]
ControlSamples piecewise_to_samples(const PiecewiseControls& controls, double T);
PiecewiseControls piecewise_from_samples(const ControlSamples& samples, double T);

} // namespace superatom
