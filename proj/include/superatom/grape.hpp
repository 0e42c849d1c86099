// grape.hpp - Piecewise-constant pulse optimization with adjoint gradients
#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "superatom/model.hpp"
#include "superatom/optimizer.hpp"
#include "superatom/propagator.hpp"
#include "superatom/pulses.hpp"

namespace superatom {

struct ChannelBounds {
    double lower{0.0};
    double upper{0.0};
};

struct GrapeProblem {
    int n_segments{50};
    double slew_limit{two_pi * 0.5};   // max |u[i+1] - u[i]| per channel, rad/us
    ChannelBounds x;
    ChannelBounds y;
    ChannelBounds z;
    bool constrained{true};            // slew limits plus zero first/last x,y segments
    PiecewiseControls initial;         // empty: sampled pi pulse (constrained) or seeded random draw
};

GrapeProblem default_grape_problem(double T, int n_segments = 50);

struct GrapeConfig {
    int max_iterations{500};
    double constraint_tol{1e-8};
    double tol{1e-9};
    IntegratorConfig integrator{1e-8, 1e-10, 50000, 2};
    std::uint64_t seed{0};
};

// flattened layout: [omega_x[0..n) | omega_y[0..n) | omega_z[0..n)]
Eigen::VectorXd flatten_controls(const PiecewiseControls& controls);
PiecewiseControls unflatten_controls(const Eigen::VectorXd& u, int n_segments);

double grape_loss(const SuperatomModel& model, const PiecewiseControls& controls, double T,
                  const IntegratorConfig& cfg = {});

// d loss / d u via one forward pass with checkpoints, one backward adjoint
// pass, and a sensitivity sweep over each segment
Eigen::VectorXd grape_gradient(const SuperatomModel& model, const PiecewiseControls& controls,
                               double T, const IntegratorConfig& cfg = {});

// nearest point in the feasible set (bounds, endpoint zeros, slew limits)
PiecewiseControls project_feasible(const GrapeProblem& problem, const PiecewiseControls& controls);

OptimizationResult grape_optimize(const GrapeProblem& problem, const SuperatomModel& model,
                                  const GrapeConfig& cfg = {});

} // namespace superatom
