// integrator.hpp - Adaptive embedded Runge-Kutta stepper with dense output
#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace superatom {

struct StepperConfig {
    double rel_tol{1e-8};
    double abs_tol{1e-10};
    long max_steps{50000};
    double initial_step{0.0};  // 0 selects the step automatically
};

struct IntegrateStats {
    long accepted{0};
    long rejected{0};
    long rhs_evaluations{0};
};

class IntegrationError : public std::runtime_error {
  public:
    IntegrationError(const std::string& what, double reached)
        : std::runtime_error(what), reached_(reached) {}
    double reached_time() const { return reached_; }

  private:
    double reached_;
};

using RhsFunction = std::function<void(double, const Eigen::VectorXcd&, Eigen::VectorXcd&)>;
using DenseObserver = std::function<void(Eigen::Index, double, const Eigen::VectorXcd&)>;

// Dormand-Prince 5(4) from t0 to t1; `state` holds y(t0) on entry, y(t1) on exit.
// Dense output by cubic Hermite interpolation at the sorted `output_times`
// (all within [t0, t1]); `observer` receives (index, time, state).
IntegrateStats integrate_adaptive(const RhsFunction& rhs, Eigen::VectorXcd& state, double t0,
                                  double t1, const StepperConfig& cfg,
                                  const Eigen::VectorXd& output_times = {},
                                  const DenseObserver& observer = {});

} // namespace superatom
