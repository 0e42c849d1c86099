#include "superatom/grape.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <complex>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include "superatom/integrator.hpp"

namespace superatom {

namespace {

constexpr std::complex<double> I{0.0, 1.0};
constexpr double kInf = std::numeric_limits<double>::infinity();

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  private:
    std::mt19937_64 gen_;
};

void validate_problem(const GrapeProblem& p) {
    if (p.n_segments < 1)
        throw std::invalid_argument("grape: n_segments must be at least 1");
    for (const ChannelBounds* b : {&p.x, &p.y, &p.z}) {
        if (!(b->lower <= b->upper))
            throw std::invalid_argument("grape: channel bounds must satisfy lower <= upper");
    }
    if (p.constrained) {
        if (p.n_segments < 2)
            throw std::invalid_argument("grape: endpoint constraints need at least two segments");
        if (!(p.slew_limit >= 0.0))
            throw std::invalid_argument("grape: slew limit must be nonnegative");
        if (p.x.lower > 0.0 || p.x.upper < 0.0 || p.y.lower > 0.0 || p.y.upper < 0.0)
            throw std::invalid_argument("grape: zero endpoints fall outside the channel bounds");
    }
    const bool any = !p.initial.omega_x.empty() || !p.initial.omega_y.empty() ||
                     !p.initial.omega_z.empty();
    if (any) {
        const auto n = static_cast<std::size_t>(p.n_segments);
        if (p.initial.omega_x.size() != n || p.initial.omega_y.size() != n ||
            p.initial.omega_z.size() != n)
            throw std::invalid_argument("grape: initial guess does not match n_segments");
    }
}

PulseParams piecewise_pulse(const PiecewiseControls& controls) {
    PulseParams pulse;
    pulse.shape = PulseShape::PiecewiseConstant;
    pulse.segments = controls;
    return pulse;
}

Matrix segment_hamiltonian(const SuperatomModel& m, double ux, double uy, double uz) {
    Matrix h = m.h_drift;
    if (ux != 0.0)
        h += ux * m.h_x;
    if (uy != 0.0)
        h += uy * m.h_y;
    if (uz != 0.0)
        h += uz * m.h_z;
    return h;
}

// adjoint state in reversed time s = T - t: dlam/ds = i[H,lam] - damping o lam
// plus the transposed refill couplings
struct AdjointRhs {
    const SuperatomModel* model;
    Matrix h;
    Matrix c;

    explicit AdjointRhs(const SuperatomModel& m)
        : model(&m), h(m.space.dim, m.space.dim), c(m.space.dim, m.space.dim) {}

    void operator()(const Eigen::VectorXcd& yv, Eigen::VectorXcd& dyv) {
        const int dim = model->space.dim;
        Eigen::Map<const Matrix> lam(yv.data(), dim, dim);
        Eigen::Map<Matrix> dlam(dyv.data(), dim, dim);
        c.noalias() = h * lam;
        dlam = I * (c - c.adjoint());
        dlam -= model->damping.cast<std::complex<double>>().cwiseProduct(lam);
        for (const auto& r : model->refills)
            dlam(r.src, r.src) += r.rate * lam(r.dst, r.dst);
    }
};

// density matrix stacked with its three control sensitivities,
// [rho | pi_x | pi_y | pi_z], all evolving under the segment Lindbladian;
// each sensitivity picks up the source -i [h_c, rho]
struct SensitivityRhs {
    const SuperatomModel* model;
    Matrix h;
    Eigen::MatrixXcd c;
    Matrix src;

    explicit SensitivityRhs(const SuperatomModel& m)
        : model(&m), h(m.space.dim, m.space.dim), c(m.space.dim, 4 * m.space.dim),
          src(m.space.dim, m.space.dim) {}

    void operator()(const Eigen::VectorXcd& yv, Eigen::VectorXcd& dyv) {
        const int dim = model->space.dim;
        Eigen::Map<const Eigen::MatrixXcd> y(yv.data(), dim, 4 * dim);
        Eigen::Map<Eigen::MatrixXcd> dy(dyv.data(), dim, 4 * dim);
        c.noalias() = h * y;
        for (int b = 0; b < 4; ++b) {
            auto yb = y.middleCols(b * dim, dim);
            auto cb = c.middleCols(b * dim, dim);
            auto dyb = dy.middleCols(b * dim, dim);
            dyb = -I * (cb - cb.adjoint());
            dyb -= model->damping.cast<std::complex<double>>().cwiseProduct(yb);
            for (const auto& r : model->refills)
                dyb(r.dst, r.dst) += r.rate * yb(r.src, r.src);
        }
        auto rho = y.middleCols(0, dim);
        const Matrix* channels[3] = {&model->h_x, &model->h_y, &model->h_z};
        for (int ch = 0; ch < 3; ++ch) {
            src.noalias() = (*channels[ch]) * rho;
            dy.middleCols((1 + ch) * dim, dim) += -I * (src - src.adjoint());
        }
    }
};

StepperConfig stepper_from(const IntegratorConfig& cfg) {
    StepperConfig scfg;
    scfg.rel_tol = cfg.rel_tol;
    scfg.abs_tol = cfg.abs_tol;
    scfg.max_steps = cfg.max_steps;
    return scfg;
}

std::vector<Matrix> backward_checkpoints(const SuperatomModel& model,
                                         const PiecewiseControls& controls, double T,
                                         const IntegratorConfig& cfg) {
    const int dim = model.space.dim;
    const int n = static_cast<int>(controls.omega_x.size());
    std::vector<Matrix> lam_at(n + 1);
    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(dim * dim);
    y[model.space.idx_R(0) * (dim + 1)] = 1.0;
    lam_at[n] = Eigen::Map<const Matrix>(y.data(), dim, dim);

    AdjointRhs rhs(model);
    StepperConfig scfg = stepper_from(cfg);
    long budget = cfg.max_steps;
    for (int j = 0; j < n; ++j) {
        const int i = n - 1 - j;
        rhs.h = segment_hamiltonian(model, controls.omega_x[i], controls.omega_y[i],
                                    controls.omega_z[i]);
        const double s_a = double(j) * T / double(n);
        const double s_b = (j + 1 == n) ? T : double(j + 1) * T / double(n);
        scfg.max_steps = std::max(budget, 0L);
        const IntegrateStats stats = integrate_adaptive(
            [&rhs](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) { rhs(v, dv); }, y,
            s_a, s_b, scfg);
        budget -= stats.accepted + stats.rejected;
        lam_at[i] = Eigen::Map<const Matrix>(y.data(), dim, dim);
    }
    return lam_at;
}

double trace_product(const Matrix& a, const Matrix& b) {
    return a.cwiseProduct(b.transpose()).sum().real();
}

} // namespace

GrapeProblem default_grape_problem(double T, int n_segments) {
    if (!(T > 0.0))
        throw std::invalid_argument("grape: pulse duration must be positive");
    GrapeProblem p;
    p.n_segments = n_segments;
    const double amp = two_pi * 3.0 / T;
    const double det = two_pi * 5.0;
    p.x = {-amp, amp};
    p.y = {-amp, amp};
    p.z = {-det, det};
    return p;
}

Eigen::VectorXd flatten_controls(const PiecewiseControls& controls) {
    const auto n = static_cast<Eigen::Index>(controls.omega_x.size());
    if (controls.omega_y.size() != static_cast<std::size_t>(n) ||
        controls.omega_z.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("controls channels differ in length");
    Eigen::VectorXd u(3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        u[i] = controls.omega_x[i];
        u[n + i] = controls.omega_y[i];
        u[2 * n + i] = controls.omega_z[i];
    }
    return u;
}

PiecewiseControls unflatten_controls(const Eigen::VectorXd& u, int n_segments) {
    if (n_segments < 1 || u.size() != 3 * n_segments)
        throw std::invalid_argument("flattened controls do not match n_segments");
    PiecewiseControls c;
    c.omega_x.resize(n_segments);
    c.omega_y.resize(n_segments);
    c.omega_z.resize(n_segments);
    for (int i = 0; i < n_segments; ++i) {
        c.omega_x[i] = u[i];
        c.omega_y[i] = u[n_segments + i];
        c.omega_z[i] = u[2 * n_segments + i];
    }
    return c;
}

double grape_loss(const SuperatomModel& model, const PiecewiseControls& controls, double T,
                  const IntegratorConfig& cfg) {
    return loss(model, piecewise_pulse(controls), T, cfg);
}

Eigen::VectorXd grape_gradient(const SuperatomModel& model, const PiecewiseControls& controls,
                               double T, const IntegratorConfig& cfg) {
    const PulseParams pulse = piecewise_pulse(controls);
    validate_pulse(pulse, T);
    const int dim = model.space.dim;
    const int n = static_cast<int>(controls.omega_x.size());

    IntegratorConfig fwd = cfg;
    fwd.output_points = n + 1;
    const Trajectory traj = evolve(model, pulse, T, fwd);
    const std::vector<Matrix> lam_at = backward_checkpoints(model, controls, T, cfg);

    SensitivityRhs rhs(model);
    StepperConfig scfg = stepper_from(cfg);
    Eigen::VectorXcd y(4 * dim * dim);
    Eigen::VectorXd grad(3 * n);
    for (int i = 0; i < n; ++i) {
        rhs.h = segment_hamiltonian(model, controls.omega_x[i], controls.omega_y[i],
                                    controls.omega_z[i]);
        y.setZero();
        Eigen::Map<Matrix>(y.data(), dim, dim) = traj.rho[i];
        const double t_a = double(i) * T / double(n);
        const double t_b = (i + 1 == n) ? T : double(i + 1) * T / double(n);
        scfg.max_steps = cfg.max_steps;
        integrate_adaptive(
            [&rhs](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) { rhs(v, dv); }, y,
            t_a, t_b, scfg);
        for (int ch = 0; ch < 3; ++ch) {
            const Eigen::Map<const Matrix> pi(y.data() + (1 + ch) * dim * dim, dim, dim);
            grad[ch * n + i] = -trace_product(lam_at[i + 1], pi);
        }
    }
    return grad;
}

PiecewiseControls project_feasible(const GrapeProblem& problem, const PiecewiseControls& controls) {
    validate_problem(problem);
    const int n = problem.n_segments;
    Eigen::VectorXd u = flatten_controls(controls);
    if (u.size() != 3 * n)
        throw std::invalid_argument("controls do not match n_segments");

    Eigen::VectorXd lower(3 * n), upper(3 * n);
    for (int i = 0; i < n; ++i) {
        lower[i] = problem.x.lower;
        upper[i] = problem.x.upper;
        lower[n + i] = problem.y.lower;
        upper[n + i] = problem.y.upper;
        lower[2 * n + i] = problem.z.lower;
        upper[2 * n + i] = problem.z.upper;
    }
    if (problem.constrained) {
        for (int j : {0, n - 1, n, 2 * n - 1})
            lower[j] = upper[j] = 0.0;
    }

    if (!problem.constrained) {
        return unflatten_controls(u.cwiseMax(lower).cwiseMin(upper), n);
    }

    // Dykstra over the box (with frozen endpoints) and each slew pair
    struct Pair {
        int a;
        int b;
    };
    std::vector<Pair> pairs;
    pairs.reserve(3 * (n - 1));
    for (int ch = 0; ch < 3; ++ch)
        for (int i = 0; i + 1 < n; ++i)
            pairs.push_back({ch * n + i, ch * n + i + 1});

    Eigen::VectorXd box_corr = Eigen::VectorXd::Zero(3 * n);
    std::vector<std::array<double, 2>> pair_corr(pairs.size(), {0.0, 0.0});
    const double s = problem.slew_limit;

    for (int cycle = 0; cycle < 5000; ++cycle) {
        double change = 0.0;

        for (std::size_t k = 0; k < pairs.size(); ++k) {
            const double va = u[pairs[k].a] + pair_corr[k][0];
            const double vb = u[pairs[k].b] + pair_corr[k][1];
            double wa = va, wb = vb;
            const double d = vb - va;
            if (std::abs(d) > s) {
                const double shift = 0.5 * (std::abs(d) - s) * (d > 0.0 ? 1.0 : -1.0);
                wa = va + shift;
                wb = vb - shift;
            }
            pair_corr[k][0] = va - wa;
            pair_corr[k][1] = vb - wb;
            change = std::max({change, std::abs(wa - u[pairs[k].a]), std::abs(wb - u[pairs[k].b])});
            u[pairs[k].a] = wa;
            u[pairs[k].b] = wb;
        }

        Eigen::VectorXd v = u + box_corr;
        Eigen::VectorXd w = v.cwiseMax(lower).cwiseMin(upper);
        box_corr = v - w;
        change = std::max(change, (w - u).lpNorm<Eigen::Infinity>());
        u = w;

        if (change < 1e-13)
            break;
    }
    u = u.cwiseMax(lower).cwiseMin(upper);
    return unflatten_controls(u, n);
}

OptimizationResult grape_optimize(const GrapeProblem& problem, const SuperatomModel& model,
                                  const GrapeConfig& cfg) {
    validate_problem(problem);
    if (cfg.max_iterations < 0)
        throw std::invalid_argument("grape: max_iterations must be nonnegative");
    if (!(cfg.constraint_tol > 0.0))
        throw std::invalid_argument("grape: constraint_tol must be positive");

    const int n = problem.n_segments;
    const double T = model.params.T;

    // zero controls are a stationary point of the loss (the co-state and the
    // control response have disjoint support on |G><G|), so the constrained
    // default starts from the sampled pi pulse instead
    PiecewiseControls init = problem.initial;
    if (init.omega_x.empty()) {
        init.omega_x.assign(n, 0.0);
        init.omega_y.assign(n, 0.0);
        init.omega_z.assign(n, 0.0);
        if (problem.constrained) {
            const double amp = pi_pulse_amplitude(T);
            for (int i = 0; i < n; ++i) {
                const double s = std::sin(std::numbers::pi * (double(i) + 0.5) / double(n));
                init.omega_x[i] = amp * s * s;
            }
        } else {
            // random start at the pi-pulse scale; a draw over the full box
            // lands deep in the overdriven regime where descent stalls
            Rng rng(cfg.seed);
            const double amp = pi_pulse_amplitude(T);
            auto draw = [&](const ChannelBounds& b, double lo, double hi) {
                const double a = std::max(b.lower, lo);
                const double c = std::min(b.upper, hi);
                return a <= c ? rng.uniform(a, c) : rng.uniform(b.lower, b.upper);
            };
            for (int i = 0; i < n; ++i) {
                init.omega_x[i] = draw(problem.x, 0.0, amp);
                init.omega_y[i] = draw(problem.y, -0.5 * amp, 0.5 * amp);
                init.omega_z[i] = draw(problem.z, -0.5 * amp, 0.5 * amp);
            }
        }
    }

    Bounds box;
    box.lower = Eigen::VectorXd(3 * n);
    box.upper = Eigen::VectorXd(3 * n);
    for (int i = 0; i < n; ++i) {
        box.lower[i] = problem.x.lower;
        box.upper[i] = problem.x.upper;
        box.lower[n + i] = problem.y.lower;
        box.upper[n + i] = problem.y.upper;
        box.lower[2 * n + i] = problem.z.lower;
        box.upper[2 * n + i] = problem.z.upper;
    }
    if (problem.constrained) {
        for (int j : {0, n - 1, n, 2 * n - 1})
            box.lower[j] = box.upper[j] = 0.0;
    }

    long evals = 0;
    const Objective objective = [&](const Eigen::VectorXd& u) {
        ++evals;
        try {
            return grape_loss(model, unflatten_controls(u, n), T, cfg.integrator);
        } catch (const IntegrationError&) {
            return kInf;
        }
    };
    const Gradient gradient = [&](const Eigen::VectorXd& u) {
        ++evals;
        try {
            return Eigen::VectorXd(grape_gradient(model, unflatten_controls(u, n), T, cfg.integrator));
        } catch (const IntegrationError&) {
            return Eigen::VectorXd(
                Eigen::VectorXd::Constant(3 * n, std::numeric_limits<double>::quiet_NaN()));
        }
    };

    OptimizationResult out;
    out.seed = cfg.seed;

    Eigen::VectorXd best_u;
    double best_loss = kInf;
    bool converged = false;

    if (!problem.constrained) {
        const Eigen::VectorXd u0 =
            flatten_controls(init).cwiseMax(box.lower).cwiseMin(box.upper);
        LocalConfig inner;
        inner.max_iterations = cfg.max_iterations;
        inner.tol = cfg.tol;
        const ScalarResult res = projected_lbfgs(objective, gradient, u0, box, inner);
        best_u = res.x;
        best_loss = res.value;
        converged = res.converged;
    } else {
        struct Pair {
            int a;
            int b;
        };
        std::vector<Pair> pairs;
        pairs.reserve(3 * (n - 1));
        for (int ch = 0; ch < 3; ++ch)
            for (int i = 0; i + 1 < n; ++i)
                pairs.push_back({ch * n + i, ch * n + i + 1});
        const double s = problem.slew_limit;
        const auto m = static_cast<Eigen::Index>(2 * pairs.size());

        const auto constraint_values = [&](const Eigen::VectorXd& u) {
            Eigen::VectorXd g(m);
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                const double d = u[pairs[k].b] - u[pairs[k].a];
                g[2 * k] = d - s;
                g[2 * k + 1] = -d - s;
            }
            return g;
        };

        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
        double mu = 1.0;

        const auto augmented = [&](const Eigen::VectorXd& u) {
            double value = objective(u);
            if (!std::isfinite(value))
                return value;
            const Eigen::VectorXd g = constraint_values(u);
            for (Eigen::Index j = 0; j < m; ++j) {
                const double t = std::max(0.0, lambda[j] + mu * g[j]);
                value += (t * t - lambda[j] * lambda[j]) / (2.0 * mu);
            }
            return value;
        };
        const auto augmented_gradient = [&](const Eigen::VectorXd& u) {
            Eigen::VectorXd grad = gradient(u);
            if (!grad.allFinite())
                return grad;
            const Eigen::VectorXd g = constraint_values(u);
            for (std::size_t k = 0; k < pairs.size(); ++k) {
                const double w_fwd = std::max(0.0, lambda[2 * k] + mu * g[2 * k]);
                const double w_bwd = std::max(0.0, lambda[2 * k + 1] + mu * g[2 * k + 1]);
                grad[pairs[k].b] += w_fwd - w_bwd;
                grad[pairs[k].a] += w_bwd - w_fwd;
            }
            return grad;
        };

        const PiecewiseControls start = project_feasible(problem, init);
        Eigen::VectorXd u = flatten_controls(start);
        best_u = u;
        best_loss = objective(u);

        long used = 0;
        double v_prev = kInf;
        while (used < cfg.max_iterations) {
            LocalConfig inner;
            inner.max_iterations = static_cast<int>(std::min<long>(60, cfg.max_iterations - used));
            inner.tol = cfg.tol;
            const ScalarResult res = projected_lbfgs(augmented, augmented_gradient, u, box, inner);
            used += std::max<long>(res.iterations, 1);
            u = res.x;

            const Eigen::VectorXd g = constraint_values(u);
            const double violation = std::max(0.0, g.maxCoeff());

            const Eigen::VectorXd polished =
                flatten_controls(project_feasible(problem, unflatten_controls(u, n)));
            const double polished_loss = objective(polished);
            if (polished_loss <= best_loss) {
                best_u = polished;
                best_loss = polished_loss;
            }

            if (violation <= cfg.constraint_tol && res.converged) {
                converged = true;
                break;
            }
            for (Eigen::Index j = 0; j < m; ++j)
                lambda[j] = std::max(0.0, lambda[j] + mu * g[j]);
            if (violation > 0.25 * v_prev && violation > cfg.constraint_tol)
                mu = std::min(mu * 10.0, 1e12);
            v_prev = std::max(violation, 1e-300);
        }
    }

    out.parameters = best_u;
    out.controls = unflatten_controls(best_u, n);
    out.pulse = piecewise_pulse(out.controls);
    out.converged = converged;

    IntegratorConfig report = cfg.integrator;
    report.output_points = std::max(report.output_points, 2);
    const Trajectory traj = evolve(model, out.pulse, T, report);
    ++evals;
    out.loss = loss(traj);
    out.final_populations = traj.final_populations;
    out.evaluations = evals;
    return out;
}

} // namespace superatom
