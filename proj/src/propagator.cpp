// propagator.cpp - Master-equation integration with snapshot validation

#include "superatom/propagator.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <stdexcept>

namespace superatom {

namespace {

constexpr std::complex<double> I{0.0, 1.0};

Eigen::VectorXd linspace(double a, double b, int n) {
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = a + (b - a) * double(i) / double(n - 1);
    out[n - 1] = b;  // (b-a)*i/(n-1) can round past b and leave the grid outside [a, b]
    return out;
}

void check_snapshot(const Matrix& rho, double t) {
    if (std::abs(rho.trace().real() - 1.0) > 1e-8 || std::abs(rho.trace().imag()) > 1e-8) {
        throw IntegrationError("evolve: trace deviates from 1 at t = " + std::to_string(t), t);
    }
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
        throw IntegrationError("evolve: snapshot not Hermitian at t = " + std::to_string(t), t);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-7) {
        throw IntegrationError("evolve: snapshot not positive semidefinite at t = " + std::to_string(t), t);
    }
}

struct LindbladRhs {
    const SuperatomModel* model;
    const PulseParams* pulse;
    double T;
    Matrix h;
    Matrix c;

    LindbladRhs(const SuperatomModel& m, const PulseParams& p, double duration)
        : model(&m), pulse(&p), T(duration), h(m.space.dim, m.space.dim),
          c(m.space.dim, m.space.dim) {}

    void operator()(double t, const Eigen::VectorXcd& yv, Eigen::VectorXcd& dyv) {
        apply(eval_pulse(*pulse, T, t), yv, dyv);
    }

    void apply(const ControlValue& u, const Eigen::VectorXcd& yv, Eigen::VectorXcd& dyv) {
        const int dim = model->space.dim;
        Eigen::Map<const Matrix> rho(yv.data(), dim, dim);
        Eigen::Map<Matrix> drho(dyv.data(), dim, dim);
        h = model->h_drift;
        if (u.x != 0.0) h += u.x * model->h_x;
        if (u.y != 0.0) h += u.y * model->h_y;
        if (u.z != 0.0) h += u.z * model->h_z;
        c.noalias() = h * rho;
        drho = -I * (c - c.adjoint());
        drho -= model->damping.cast<std::complex<double>>().cwiseProduct(rho);
        for (const auto& r : model->refills) drho(r.dst, r.dst) += r.rate * rho(r.src, r.src);
    }
};

// shared driver: integrates vec(rho) over [0, T], reporting at `grid` (may be empty)
Eigen::VectorXcd integrate_rho(const SuperatomModel& model, const PulseParams& pulse, double T,
                               const IntegratorConfig& cfg, const Eigen::VectorXd& grid,
                               const DenseObserver& observer) {
    validate_pulse(pulse, T);
    if (cfg.max_steps < 1) throw std::invalid_argument("evolve: max_steps must be >= 1");
    const int dim = model.space.dim;
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(dim * dim);
    y[model.space.idx_G() * (dim + 1)] = 1.0;

    StepperConfig scfg;
    scfg.rel_tol = cfg.rel_tol;
    scfg.abs_tol = cfg.abs_tol;
    scfg.max_steps = cfg.max_steps;

    LindbladRhs rhs(model, pulse, T);
    if (pulse.shape != PulseShape::PiecewiseConstant) {
        integrate_adaptive([&rhs](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                               rhs(t, v, dv);
                           },
                           y, 0.0, T, scfg, grid, observer);
        return y;
    }

    // zero-order hold: restart the stepper at every segment boundary
    const auto n_seg = static_cast<Eigen::Index>(pulse.segments.omega_x.size());
    long budget = cfg.max_steps;
    Eigen::Index next = 0;
    for (Eigen::Index i = 0; i < n_seg; ++i) {
        const double t_a = double(i) * T / double(n_seg);
        const double t_b = (i + 1 == n_seg) ? T : double(i + 1) * T / double(n_seg);
        Eigen::Index count = 0;
        while (next + count < grid.size() && grid[next + count] <= t_b) ++count;
        if (i + 1 == n_seg) count = grid.size() - next;
        Eigen::VectorXd sub = grid.segment(next, count);
        const Eigen::Index base = next;
        next += count;

        ControlValue u;
        u.x = pulse.segments.omega_x[i];
        u.y = pulse.segments.omega_y[i];
        u.z = pulse.segments.omega_z[i];
        scfg.max_steps = std::max(budget, 0L);
        const IntegrateStats stats = integrate_adaptive(
            [&rhs, u](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
                rhs.apply(u, v, dv);
            },
            y, t_a, t_b, scfg, sub,
            [&](Eigen::Index k, double t, const Eigen::VectorXcd& v) {
                if (observer) observer(base + k, t, v);
            });
        budget -= stats.accepted + stats.rejected;
    }
    return y;
}

} // namespace

Trajectory evolve(const SuperatomModel& model, const PulseParams& pulse, double T,
                  const IntegratorConfig& cfg) {
    if (cfg.output_points < 2) throw std::invalid_argument("evolve: output_points must be >= 2");
    const int dim = model.space.dim;
    Trajectory traj;
    traj.labels = model.space.labels;
    traj.times = linspace(0.0, T, cfg.output_points);
    traj.rho.assign(cfg.output_points, Matrix());
    traj.populations.resize(cfg.output_points, dim);

    integrate_rho(model, pulse, T, cfg, traj.times,
                  [&](Eigen::Index k, double, const Eigen::VectorXcd& v) {
                      traj.rho[size_t(k)] = Eigen::Map<const Matrix>(v.data(), dim, dim);
                      traj.populations.row(k) = traj.rho[size_t(k)].diagonal().real().transpose();
                  });

    for (int k = 0; k < cfg.output_points; ++k) check_snapshot(traj.rho[size_t(k)], traj.times[k]);
    for (int s = 0; s < dim; ++s) {
        traj.final_populations[traj.labels[size_t(s)]] =
            traj.populations(cfg.output_points - 1, s);
    }
    return traj;
}

Trajectory evolve(const SuperatomModel& model, const ControlSamples& controls, double T,
                  const IntegratorConfig& cfg) {
    PulseParams p;
    p.shape = PulseShape::PiecewiseConstant;
    p.segments = piecewise_from_samples(controls, T);
    return evolve(model, p, T, cfg);
}

Matrix evolve_final(const SuperatomModel& model, const PulseParams& pulse, double T,
                    const IntegratorConfig& cfg) {
    const int dim = model.space.dim;
    const Eigen::VectorXcd y = integrate_rho(model, pulse, T, cfg, {}, {});
    Matrix rho = Eigen::Map<const Matrix>(y.data(), dim, dim);
    check_snapshot(rho, T);
    return rho;
}

double total_rydberg_population(const Trajectory& traj) {
    if (traj.populations.rows() == 0) throw std::invalid_argument("trajectory is empty");
    return 1.0 - traj.populations(traj.populations.rows() - 1, 0);
}

void write_trajectory(std::ostream& out, const Trajectory& traj) {
    out.precision(17);
    out << "# t";
    for (const auto& label : traj.labels) out << ' ' << label;
    out << '\n';
    for (Eigen::Index k = 0; k < traj.times.size(); ++k) {
        out << traj.times[k];
        for (Eigen::Index s = 0; s < traj.populations.cols(); ++s) {
            out << ' ' << traj.populations(k, s);
        }
        out << '\n';
    }
}

void save_trajectory(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trajectory file for writing: " + path);
    write_trajectory(out, traj);
}

} // namespace superatom
