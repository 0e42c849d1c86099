// integrator.cpp - Dormand-Prince 5(4) with FSAL and cubic Hermite dense output

#include "superatom/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace superatom {

namespace {

// Dormand & Prince (1980) coefficients
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// fifth-order minus embedded fourth-order weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const Eigen::VectorXcd& err, const Eigen::VectorXcd& y0,
                  const Eigen::VectorXcd& y1, double rel_tol, double abs_tol) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double scale = abs_tol + rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = std::abs(err[i]) / scale;
        acc += r * r;
    }
    return std::sqrt(acc / double(err.size()));
}

double initial_step_guess(const RhsFunction& rhs, const Eigen::VectorXcd& y0,
                          const Eigen::VectorXcd& f0, double t0, double span, double rel_tol,
                          double abs_tol, IntegrateStats& stats) {
    auto weighted = [&](const Eigen::VectorXcd& v, const Eigen::VectorXcd& ref) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double scale = abs_tol + rel_tol * std::abs(ref[i]);
            const double r = std::abs(v[i]) / scale;
            acc += r * r;
        }
        return std::sqrt(acc / double(v.size()));
    };
    const double d0 = weighted(y0, y0);
    const double d1 = weighted(f0, y0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    Eigen::VectorXcd y1 = y0 + h0 * f0;
    Eigen::VectorXcd f1(y0.size());
    rhs(t0 + h0, y1, f1);
    ++stats.rhs_evaluations;
    const double d2 = weighted(f1 - f0, y0) / h0;
    double h1;
    if (std::max(d1, d2) <= 1e-15) {
        h1 = std::max(1e-6, h0 * 1e-3);
    } else {
        h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
    }
    return std::min({100.0 * h0, h1, span});
}

} // namespace

IntegrateStats integrate_adaptive(const RhsFunction& rhs, Eigen::VectorXcd& state, double t0,
                                  double t1, const StepperConfig& cfg,
                                  const Eigen::VectorXd& output_times,
                                  const DenseObserver& observer) {
    if (!(t1 >= t0)) throw std::invalid_argument("integrate_adaptive: t1 must be >= t0");
    if (cfg.rel_tol <= 0.0 || cfg.abs_tol <= 0.0) {
        throw std::invalid_argument("integrate_adaptive: tolerances must be positive");
    }
    for (Eigen::Index i = 0; i < output_times.size(); ++i) {
        if (output_times[i] < t0 || output_times[i] > t1 ||
            (i > 0 && output_times[i] < output_times[i - 1])) {
            throw std::invalid_argument("integrate_adaptive: output times must be sorted in [t0, t1]");
        }
    }

    IntegrateStats stats;
    const Eigen::Index n = state.size();
    Eigen::Index next_output = 0;
    auto emit_at_node = [&](double t, const Eigen::VectorXcd& y) {
        while (next_output < output_times.size() && output_times[next_output] <= t) {
            if (observer) observer(next_output, output_times[next_output], y);
            ++next_output;
        }
    };
    emit_at_node(t0, state);
    if (t1 == t0) return stats;

    Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    rhs(t0, state, k1);
    ++stats.rhs_evaluations;

    double t = t0;
    double h = cfg.initial_step > 0.0
                   ? std::min(cfg.initial_step, t1 - t0)
                   : initial_step_guess(rhs, state, k1, t0, t1 - t0, cfg.rel_tol, cfg.abs_tol, stats);
    const double h_min_factor = 16.0 * std::numeric_limits<double>::epsilon();

    for (long step = 0; step < cfg.max_steps; ++step) {
        const double h_floor = h_min_factor * std::max(std::abs(t), std::abs(t1));
        bool last = false;
        if (h >= t1 - t) {
            h = t1 - t;
            last = true;
        } else if (h <= h_floor) {
            throw IntegrationError("integrate_adaptive: step size underflow (tolerance not achievable)", t);
        }

        ytmp = state + h * (a21 * k1);
        rhs(t + c2 * h, ytmp, k2);
        ytmp = state + h * (a31 * k1 + a32 * k2);
        rhs(t + c3 * h, ytmp, k3);
        ytmp = state + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(t + c4 * h, ytmp, k4);
        ytmp = state + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(t + c5 * h, ytmp, k5);
        ytmp = state + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs(t + h, ytmp, k6);
        ynew = state + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs(t + h, ynew, k7);
        stats.rhs_evaluations += 6;

        err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double norm = error_norm(err, state, ynew, cfg.rel_tol, cfg.abs_tol);

        if (norm <= 1.0) {
            ++stats.accepted;
            // cubic Hermite dense output on [t, t+h] from (state, k1) and (ynew, k7)
            while (next_output < output_times.size() && output_times[next_output] <= t + h) {
                const double s = output_times[next_output];
                const double theta = (s - t) / h;
                const double t2 = theta * theta;
                const double t3 = t2 * theta;
                const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                const double h10 = t3 - 2.0 * t2 + theta;
                const double h01 = -2.0 * t3 + 3.0 * t2;
                const double h11 = t3 - t2;
                ytmp = h00 * state + (h10 * h) * k1 + h01 * ynew + (h11 * h) * k7;
                if (observer) observer(next_output, s, ytmp);
                ++next_output;
            }
            t = last ? t1 : t + h;
            state.swap(ynew);
            k1.swap(k7);
            if (last) {
                emit_at_node(t1, state);
                return stats;
            }
            const double factor =
                (norm == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
            h *= factor;
        } else {
            ++stats.rejected;
            h *= std::max(0.2, 0.9 * std::pow(norm, -0.2));
        }
    }
    throw IntegrationError("integrate_adaptive: maximum step count exhausted", t);
}

} // namespace superatom
