// optimizer.hpp - Loss function and two-stage parameter optimization
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "superatom/model.hpp"
#include "superatom/propagator.hpp"
#include "superatom/pulses.hpp"

namespace superatom {

struct Bounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

// parameter layout per shape: DetunedSineSquared (A, delta_d),
// PerturbativeDrag / NonPerturbativeDrag (A, delta_d, alpha),
// MultiLevelDrag (A, delta_d, alpha, alpha1, alpha2)
int parameter_count(PulseShape shape);
Bounds default_bounds(PulseShape shape, double T);

struct DeConfig {
    int population{0};        // 0 selects 15 * dimension
    int max_generations{200};
    double crossover{0.7};
    double f_min{0.5};        // per-generation mutation factor dithered in [f_min, f_max]
    double f_max{1.0};
    double tol{0.01};         // stop when std(losses) <= tol * |mean(losses)|
    Eigen::VectorXd initial_guess; // if sized, replaces the first population member
    IntegratorConfig integrator{1e-8, 1e-10, 50000, 2};
    // population evaluations per generation run on this many workers; the
    // generation update stays a serial barrier, so results do not depend on it
    int threads{1};
};

struct LocalConfig {
    int max_iterations{200};
    double tol{1e-9};
    double fd_rel_step{1e-6};
    int history{10};          // quasi-Newton memory
    IntegratorConfig integrator{1e-8, 1e-10, 50000, 2};
};

struct OptimizationResult {
    Eigen::VectorXd parameters;
    PulseParams pulse;                 // complete pulse at the returned parameters
    PiecewiseControls controls;        // populated by the piecewise-control optimizer
    double loss{1.0};
    std::map<std::string, double> final_populations;
    long evaluations{0};
    std::uint64_t seed{0};
    bool converged{false};
};

class OptimizationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

double loss(const Trajectory& traj);
double loss(const SuperatomModel& model, const PulseParams& pulse, double T,
            const IntegratorConfig& cfg = {});

// fixed pulse fields (leak targets, detunings) derived from the dominant
// leakage channels of the baseline pi pulse
PulseParams leak_targeted_prototype(PulseShape shape, const SuperatomModel& model);

OptimizationResult optimize_parametrized(PulseShape shape, const SuperatomModel& model,
                                         const Bounds& bounds, const DeConfig& global_cfg,
                                         const LocalConfig& local_cfg, std::uint64_t seed);

// as above with explicit fixed fields instead of automatic leak targeting
OptimizationResult optimize_parametrized(const PulseParams& prototype, const SuperatomModel& model,
                                         const Bounds& bounds, const DeConfig& global_cfg,
                                         const LocalConfig& local_cfg, std::uint64_t seed);

using Objective = std::function<double(const Eigen::VectorXd&)>;

Eigen::VectorXd finite_diff_gradient(const Objective& objective, const Eigen::VectorXd& point,
                                     double rel_step = 1e-6);

struct ScalarResult {
    Eigen::VectorXd x;
    double value{0.0};
    long evaluations{0};
    long iterations{0};
    bool converged{false};
};

ScalarResult differential_evolution(const Objective& objective, const Bounds& bounds,
                                    const DeConfig& cfg, std::uint64_t seed);

// projected quasi-Newton refinement within box bounds; gradient may be empty,
// in which case central finite differences with cfg.fd_rel_step are used
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
ScalarResult projected_lbfgs(const Objective& objective, const Gradient& gradient,
                             const Eigen::VectorXd& x0, const Bounds& bounds,
                             const LocalConfig& cfg);

} // namespace superatom
