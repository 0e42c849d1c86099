// pulses.cpp - Pulse evaluation, Savitzky-Golay smoothing, control file I/O

#include "superatom/pulses.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace superatom {

namespace {

constexpr double pi = std::numbers::pi;

double primary(double A, double T, double t) {
    const double s = std::sin(pi * t / T);
    return A * s * s;
}

double primary_dot(double A, double T, double t) {
    return A * pi / T * std::sin(2.0 * pi * t / T);
}

double primary_ddot(double A, double T, double t) {
    const double w = pi / T;
    return 2.0 * A * w * w * std::cos(2.0 * pi * t / T);
}

// shared sign convention for every counterdiabatic channel: Omega_y = -c * dOmega_I/dt
double counterdiabatic(double coefficient, double primary_dot_value) {
    return -coefficient * primary_dot_value;
}

void check_uniform_grid(const Eigen::VectorXd& grid) {
    if (grid.size() < 2) throw std::invalid_argument("savitzky_golay: need at least two samples");
    const double h = grid[1] - grid[0];
    for (Eigen::Index i = 1; i + 1 < grid.size(); ++i) {
        if (std::abs((grid[i + 1] - grid[i]) - h) > 1e-9 * std::max(1.0, std::abs(h))) {
            throw std::invalid_argument("savitzky_golay: grid spacing is not uniform");
        }
    }
}

} // namespace

double pi_pulse_amplitude(double T) {
    if (!(T > 0.0)) throw std::invalid_argument("pi_pulse_amplitude: T must be > 0");
    return 2.0 * pi / T;
}

const char* to_string(PulseShape shape) {
    switch (shape) {
        case PulseShape::SineSquared: return "sine_squared";
        case PulseShape::DetunedSineSquared: return "detuned_sine_squared";
        case PulseShape::PerturbativeDrag: return "perturbative_drag";
        case PulseShape::NonPerturbativeDrag: return "non_perturbative_drag";
        case PulseShape::MultiLevelDrag: return "multi_level_drag";
        case PulseShape::PiecewiseConstant: return "piecewise_constant";
    }
    throw std::invalid_argument("unhandled pulse shape");
}

PulseShape pulse_shape_from_string(const std::string& name) {
    for (PulseShape shape :
         {PulseShape::SineSquared, PulseShape::DetunedSineSquared, PulseShape::PerturbativeDrag,
          PulseShape::NonPerturbativeDrag, PulseShape::MultiLevelDrag,
          PulseShape::PiecewiseConstant}) {
        if (name == to_string(shape))
            return shape;
    }
    throw std::invalid_argument("unknown pulse shape '" + name + "'");
}

void validate_pulse(const PulseParams& p, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("pulse: T must be > 0");
    const bool drag = p.shape == PulseShape::PerturbativeDrag ||
                      p.shape == PulseShape::NonPerturbativeDrag ||
                      p.shape == PulseShape::MultiLevelDrag;
    if (drag && p.delta_leak == 0.0) {
        throw std::invalid_argument("pulse: delta_leak must be nonzero for DRAG shapes");
    }
    if (p.shape == PulseShape::NonPerturbativeDrag && p.beta_leak == 0.0) {
        throw std::invalid_argument("pulse: beta_leak must be nonzero for NonPerturbativeDrag");
    }
    if (p.shape == PulseShape::MultiLevelDrag && p.delta_leak2 == 0.0) {
        throw std::invalid_argument("pulse: delta_leak2 must be nonzero for MultiLevelDrag");
    }
    if (p.shape == PulseShape::PiecewiseConstant) {
        const auto& s = p.segments;
        if (s.omega_x.empty() || s.omega_x.size() != s.omega_y.size() ||
            s.omega_x.size() != s.omega_z.size()) {
            throw std::invalid_argument("pulse: piecewise segments must be nonempty, equal-length");
        }
        if (p.phase_modulated) {
            throw std::invalid_argument("pulse: phase modulation applies to analytic shapes only");
        }
    }
}

ControlValue eval_pulse(const PulseParams& p, double T, double t) {
    ControlValue v;
    switch (p.shape) {
        case PulseShape::SineSquared:
            v.x = primary(p.A, T, t);
            break;
        case PulseShape::DetunedSineSquared:
            v.x = primary(p.A, T, t);
            v.z = p.delta_d;
            break;
        case PulseShape::PerturbativeDrag:
            v.x = primary(p.A, T, t);
            v.y = counterdiabatic(p.alpha / p.delta_leak, primary_dot(p.A, T, t));
            v.z = p.delta_d;
            break;
        case PulseShape::NonPerturbativeDrag: {
            v.x = primary(p.A, T, t);
            const double r = p.beta_leak * primary(p.A, T, t) / p.delta_leak;
            v.y = counterdiabatic(p.alpha / p.delta_leak / (1.0 + r * r),
                                  primary_dot(p.A, T, t));
            v.z = p.delta_d;
            break;
        }
        case PulseShape::MultiLevelDrag:
            v.x = primary(p.A, T, t) +
                  p.alpha2 * primary_ddot(p.A, T, t) / (p.delta_leak * p.delta_leak2);
            v.y = counterdiabatic(p.alpha / p.delta_leak + p.alpha1 / p.delta_leak2,
                                  primary_dot(p.A, T, t));
            v.z = p.delta_d;
            break;
        case PulseShape::PiecewiseConstant: {
            const auto n = static_cast<Eigen::Index>(p.segments.omega_x.size());
            auto i = static_cast<Eigen::Index>(std::floor(t / T * double(n)));
            if (i < 0) i = 0;
            if (i >= n) i = n - 1;
            v.x = p.segments.omega_x[i];
            v.y = p.segments.omega_y[i];
            v.z = p.segments.omega_z[i];
            return v;
        }
    }
    if (p.phase_modulated) {
        const double c = std::cos(p.delta_d * t);
        const double s = std::sin(p.delta_d * t);
        const double x = v.x * c - v.y * s;
        v.y = v.x * s + v.y * c;
        v.x = x;
        v.z = 0.0;
    }
    return v;
}

ControlSamples sample_pulse(const PulseParams& p, double T, const Eigen::VectorXd& grid) {
    validate_pulse(p, T);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        if (grid[i] < 0.0 || grid[i] > T) {
            throw std::invalid_argument("sample_pulse: grid point outside [0, T]");
        }
        if (i > 0 && grid[i] <= grid[i - 1]) {
            throw std::invalid_argument("sample_pulse: grid must be strictly increasing");
        }
    }
    ControlSamples s;
    s.grid = grid;
    s.omega_x.resize(grid.size());
    s.omega_y.resize(grid.size());
    s.omega_z.resize(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const ControlValue v = eval_pulse(p, T, grid[i]);
        s.omega_x[i] = v.x;
        s.omega_y[i] = v.y;
        s.omega_z[i] = v.z;
    }
    return s;
}

ControlSamples savitzky_golay(const ControlSamples& samples, int window, int order) {
    if (window % 2 == 0 || window <= order || order < 0) {
        throw std::invalid_argument("savitzky_golay: window must be odd and > order");
    }
    const auto n = samples.grid.size();
    if (window >= n) throw std::invalid_argument("savitzky_golay: window exceeds sample count");
    check_uniform_grid(samples.grid);

    const int half = window / 2;
    Eigen::MatrixXd vandermonde(window, order + 1);
    for (int i = 0; i < window; ++i) {
        double power = 1.0;
        for (int m = 0; m <= order; ++m) {
            vandermonde(i, m) = power;
            power *= double(i - half);
        }
    }
    // fit(m, :) maps a window of samples to the m-th polynomial coefficient
    const Eigen::MatrixXd fit =
        (vandermonde.transpose() * vandermonde).ldlt().solve(vandermonde.transpose());

    auto value_at = [&](const Eigen::VectorXd& window_values, double offset) {
        const Eigen::VectorXd coeffs = fit * window_values;
        double out = 0.0;
        double power = 1.0;
        for (int m = 0; m <= order; ++m) {
            out += coeffs[m] * power;
            power *= offset;
        }
        return out;
    };

    ControlSamples out = samples;
    for (Eigen::VectorXd* channel : {&out.omega_x, &out.omega_y, &out.omega_z}) {
        const Eigen::VectorXd original = *channel;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (i < half) {
                (*channel)[i] = value_at(original.segment(0, window), double(i - half));
            } else if (i >= n - half) {
                (*channel)[i] = value_at(original.segment(n - window, window),
                                         double(i - (n - 1 - half)));
            } else {
                (*channel)[i] = value_at(original.segment(i - half, window), 0.0);
            }
        }
    }
    return out;
}

void write_controls(std::ostream& out, const ControlSamples& samples) {
    out.precision(17);
    out << "# t omega_x omega_y omega_z\n";
    for (Eigen::Index i = 0; i < samples.grid.size(); ++i) {
        out << samples.grid[i] << ' ' << samples.omega_x[i] << ' ' << samples.omega_y[i] << ' '
            << samples.omega_z[i] << '\n';
    }
}

ControlSamples read_controls(std::istream& in) {
    std::vector<double> t, x, y, z;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        std::istringstream ss(line);
        double ti, xi, yi, zi;
        if (!(ss >> ti >> xi >> yi >> zi)) {
            throw std::invalid_argument("controls parse error: expected 4 columns in '" + line + "'");
        }
        t.push_back(ti);
        x.push_back(xi);
        y.push_back(yi);
        z.push_back(zi);
    }
    if (t.empty()) throw std::invalid_argument("controls parse error: no sample rows");
    ControlSamples s;
    const auto n = static_cast<Eigen::Index>(t.size());
    s.grid = Eigen::Map<Eigen::VectorXd>(t.data(), n);
    s.omega_x = Eigen::Map<Eigen::VectorXd>(x.data(), n);
    s.omega_y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
    s.omega_z = Eigen::Map<Eigen::VectorXd>(z.data(), n);
    for (Eigen::Index i = 1; i < n; ++i) {
        if (s.grid[i] <= s.grid[i - 1]) {
            throw std::invalid_argument("controls parse error: times must be strictly increasing");
        }
    }
    return s;
}

void save_controls(const std::string& path, const ControlSamples& samples) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open control file for writing: " + path);
    write_controls(out, samples);
}

ControlSamples load_controls(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open control file: " + path);
    return read_controls(in);
}

ControlSamples piecewise_to_samples(const PiecewiseControls& controls, double T) {
    const auto n = static_cast<Eigen::Index>(controls.omega_x.size());
    if (n == 0 || controls.omega_y.size() != controls.omega_x.size() ||
        controls.omega_z.size() != controls.omega_x.size()) {
        throw std::invalid_argument("piecewise_to_samples: segments must be nonempty, equal-length");
    }
    if (!(T > 0.0)) throw std::invalid_argument("piecewise_to_samples: T must be > 0");
    ControlSamples s;
    s.grid.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) s.grid[i] = double(i) * T / double(n);
    s.omega_x = Eigen::Map<const Eigen::VectorXd>(controls.omega_x.data(), n);
    s.omega_y = Eigen::Map<const Eigen::VectorXd>(controls.omega_y.data(), n);
    s.omega_z = Eigen::Map<const Eigen::VectorXd>(controls.omega_z.data(), n);
    return s;
}

PiecewiseControls piecewise_from_samples(const ControlSamples& samples, double T) {
    const auto n = samples.grid.size();
    if (n == 0) throw std::invalid_argument("piecewise_from_samples: no samples");
    if (!(T > 0.0)) throw std::invalid_argument("piecewise_from_samples: T must be > 0");
    const double dt = T / double(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(samples.grid[i] - double(i) * dt) > 1e-9 * std::max(1.0, T)) {
            throw std::invalid_argument(
                "piecewise_from_samples: rows must sit on uniform segment starts");
        }
    }
    PiecewiseControls c;
    c.omega_x.assign(samples.omega_x.data(), samples.omega_x.data() + n);
    c.omega_y.assign(samples.omega_y.data(), samples.omega_y.data() + n);
    c.omega_z.assign(samples.omega_z.data(), samples.omega_z.data() + n);
    return c;
}

} // namespace superatom
