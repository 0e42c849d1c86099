// propagator.hpp - Lindblad time evolution and trajectory reporting
#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "superatom/integrator.hpp"
#include "superatom/model.hpp"
#include "superatom/pulses.hpp"

namespace superatom {

struct IntegratorConfig {
    double rel_tol{1e-8};
    double abs_tol{1e-10};
    long max_steps{50000};
    int output_points{100};
};

struct Trajectory {
    Eigen::VectorXd times;                       // us
    std::vector<Matrix> rho;                     // one snapshot per output time
    Eigen::MatrixXd populations;                 // output_points x dim
    std::vector<std::string> labels;
    std::map<std::string, double> final_populations;
};

// integrates d rho/dt = -i[H(t), rho] + dissipators from |G><G| over [0, T]
Trajectory evolve(const SuperatomModel& model, const PulseParams& pulse, double T,
                  const IntegratorConfig& cfg = {});

// piecewise-constant controls given as segment-start sample rows
Trajectory evolve(const SuperatomModel& model, const ControlSamples& controls, double T,
                  const IntegratorConfig& cfg = {});

// final density matrix only; skips snapshot storage for optimization inner loops
Matrix evolve_final(const SuperatomModel& model, const PulseParams& pulse, double T,
                    const IntegratorConfig& cfg = {});

double total_rydberg_population(const Trajectory& traj);

void write_trajectory(std::ostream& out, const Trajectory& traj);
void save_trajectory(const std::string& path, const Trajectory& traj);

} // namespace superatom
