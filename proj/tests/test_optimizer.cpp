#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "superatom/model.hpp"
#include "superatom/optimizer.hpp"
#include "superatom/tables.hpp"

using namespace superatom;

namespace {

LeakageTables toy_tables() {
    LeakageTables t;
    t.n_max = 2;
    t.beta.resize(3, 2);
    t.beta << 0.60, 0.30, 0.50, 0.20, 0.40, 0.10;
    t.delta_s_raw.resize(2);
    t.delta_s_raw << 5.0, 2.0;
    t.gamma_s_raw.resize(2);
    t.gamma_s_raw << 0.8, 0.3;
    return t;
}

SuperatomModel toy_model() {
    PhysicalParams p;
    p.n_max = 2;
    p.sigma = 1.0;
    p.c6 = 1.0;
    p.delta_T = 0.5;
    p.gamma = 0.2;
    p.T = 1.0;
    return build_model(p, toy_tables());
}

SuperatomModel experimental_model() {
    PhysicalParams p;
    p.T = 0.25;
    p.sigma = 4.6;
    return build_model(p, bundled_tables());
}

Bounds box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
    Bounds b;
    b.lower = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lo.size()));
    b.upper = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(hi.size()));
    Eigen::Index i = 0;
    for (double v : lo)
        b.lower[i++] = v;
    i = 0;
    for (double v : hi)
        b.upper[i++] = v;
    return b;
}

} // namespace

TEST_CASE("parameter counts per shape") {
    CHECK(parameter_count(PulseShape::DetunedSineSquared) == 2);
    CHECK(parameter_count(PulseShape::PerturbativeDrag) == 3);
    CHECK(parameter_count(PulseShape::NonPerturbativeDrag) == 3);
    CHECK(parameter_count(PulseShape::MultiLevelDrag) == 5);
    CHECK_THROWS_AS(parameter_count(PulseShape::SineSquared), std::invalid_argument);
    CHECK_THROWS_AS(parameter_count(PulseShape::PiecewiseConstant), std::invalid_argument);
}

TEST_CASE("default bounds follow the documented box") {
    const Bounds b = default_bounds(PulseShape::MultiLevelDrag, 0.25);
    REQUIRE(b.lower.size() == 5);
    const double amp = two_pi * 12.0;
    const double det = two_pi * 5.0;
    CHECK(b.lower[0] == doctest::Approx(-amp).epsilon(1e-15));
    CHECK(b.upper[0] == doctest::Approx(amp).epsilon(1e-15));
    CHECK(b.lower[1] == doctest::Approx(-det).epsilon(1e-15));
    CHECK(b.upper[1] == doctest::Approx(det).epsilon(1e-15));
    for (int i = 2; i < 5; ++i) {
        CHECK(b.lower[i] == doctest::Approx(-amp).epsilon(1e-15));
        CHECK(b.upper[i] == doctest::Approx(amp).epsilon(1e-15));
    }
    CHECK(default_bounds(PulseShape::DetunedSineSquared, 0.5).lower.size() == 2);
    CHECK_THROWS_AS(default_bounds(PulseShape::DetunedSineSquared, 0.0), std::invalid_argument);
}

TEST_CASE("loss against the baseline pulse") {
    const SuperatomModel model = experimental_model();
    PulseParams pulse;
    pulse.shape = PulseShape::SineSquared;
    pulse.A = pi_pulse_amplitude(0.25);
    const double l = loss(model, pulse, 0.25);
    CHECK(l == doctest::Approx(1.0 - 0.842979549).epsilon(1e-5));

    const Trajectory traj = evolve(model, pulse, 0.25);
    CHECK(loss(traj) == doctest::Approx(l).epsilon(1e-9));

    Trajectory empty;
    CHECK_THROWS_AS(loss(empty), std::invalid_argument);
}

TEST_CASE("finite difference gradient on smooth functions") {
    const Objective quad = [](const Eigen::VectorXd& x) {
        return 0.5 * x.squaredNorm() + 3.0 * x[0] - 2.0 * x[1];
    };
    Eigen::VectorXd p(2);
    p << 1.3, -0.7;
    const Eigen::VectorXd g = finite_diff_gradient(quad, p);
    CHECK(g[0] == doctest::Approx(p[0] + 3.0).epsilon(1e-8));
    CHECK(g[1] == doctest::Approx(p[1] - 2.0).epsilon(1e-8));

    const Objective wave = [](const Eigen::VectorXd& x) { return std::sin(x[0]) * std::cos(x[1]); };
    const Eigen::VectorXd gw = finite_diff_gradient(wave, p, 1e-7);
    CHECK(gw[0] == doctest::Approx(std::cos(p[0]) * std::cos(p[1])).epsilon(1e-6));
    CHECK(gw[1] == doctest::Approx(-std::sin(p[0]) * std::sin(p[1])).epsilon(1e-6));

    CHECK_THROWS_AS(finite_diff_gradient(quad, Eigen::VectorXd{}, 1e-6), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_gradient(quad, p, 0.0), std::invalid_argument);
}

TEST_CASE("differential evolution finds a shifted sphere minimum") {
    const Objective sphere = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd c(3);
        c << 0.8, -1.4, 2.3;
        return (x - c).squaredNorm();
    };
    DeConfig cfg;
    cfg.population = 24;
    cfg.max_generations = 150;
    cfg.tol = 0.0;
    const Bounds b = box({-4.0, -4.0, -4.0}, {4.0, 4.0, 4.0});
    const ScalarResult r = differential_evolution(sphere, b, cfg, 11u);
    CHECK(r.value < 1e-4);
    CHECK((r.x - (Eigen::VectorXd(3) << 0.8, -1.4, 2.3).finished()).norm() < 2e-2);
    CHECK(r.evaluations == 24 + 24 * 150);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.x[i] >= b.lower[i]);
        CHECK(r.x[i] <= b.upper[i]);
    }
}

TEST_CASE("differential evolution convergence and determinism") {
    const Objective rosenbrock = [](const Eigen::VectorXd& x) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    DeConfig cfg;
    cfg.population = 30;
    cfg.max_generations = 200;
    const Bounds b = box({-2.0, -2.0}, {2.0, 2.0});
    const ScalarResult r1 = differential_evolution(rosenbrock, b, cfg, 42u);
    const ScalarResult r2 = differential_evolution(rosenbrock, b, cfg, 42u);
    CHECK(r1.value == r2.value);
    CHECK(r1.x == r2.x);
    CHECK(r1.evaluations == r2.evaluations);
    CHECK(r1.value < 1e-2);

    const ScalarResult r3 = differential_evolution(rosenbrock, b, cfg, 43u);
    CHECK(r3.x != r1.x);

    cfg.threads = 3;
    const ScalarResult r4 = differential_evolution(rosenbrock, b, cfg, 42u);
    CHECK(r4.value == r1.value);
    CHECK(r4.x == r1.x);
    CHECK(r4.evaluations == r1.evaluations);
}

TEST_CASE("differential evolution rejects bad bounds") {
    const Objective f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    DeConfig cfg;
    CHECK_THROWS_AS(differential_evolution(f, Bounds{}, cfg, 1u), std::invalid_argument);
    Bounds inverted = box({1.0}, {-1.0});
    CHECK_THROWS_AS(differential_evolution(f, inverted, cfg, 1u), std::invalid_argument);
    Bounds ragged;
    ragged.lower = Eigen::VectorXd::Zero(2);
    ragged.upper = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(differential_evolution(f, ragged, cfg, 1u), std::invalid_argument);
}

TEST_CASE("projected quasi-Newton lands on the active bound") {
    Eigen::VectorXd c(2);
    c << 3.0, -0.5;
    const Objective f = [&](const Eigen::VectorXd& x) { return (x - c).squaredNorm(); };
    const Gradient g = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(2.0 * (x - c)); };
    const Bounds b = box({-1.0, -1.0}, {1.0, 1.0});
    LocalConfig cfg;

    Eigen::VectorXd x0(2);
    x0 << -0.9, 0.9;
    const ScalarResult with_grad = projected_lbfgs(f, g, x0, b, cfg);
    CHECK(with_grad.converged);
    CHECK(with_grad.x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(with_grad.x[1] == doctest::Approx(-0.5).epsilon(1e-7));

    const ScalarResult with_fd = projected_lbfgs(f, {}, x0, b, cfg);
    CHECK(with_fd.converged);
    CHECK(with_fd.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(with_fd.x[1] == doctest::Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("projected quasi-Newton handles hard starts") {
    const Objective f = [](const Eigen::VectorXd& x) { return std::numeric_limits<double>::quiet_NaN() + x[0]; };
    const Bounds b = box({-1.0}, {1.0});
    Eigen::VectorXd x0(1);
    x0 << 0.2;
    LocalConfig cfg;
    const ScalarResult r = projected_lbfgs(f, {}, x0, b, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.x[0] == 0.2);

    Eigen::VectorXd outside(1);
    outside << 7.0;
    const Objective q = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    const ScalarResult clipped = projected_lbfgs(q, {}, outside, b, cfg);
    CHECK(clipped.x[0] == doctest::Approx(0.0).epsilon(1e-8));

    CHECK_THROWS_AS(projected_lbfgs(q, {}, Eigen::VectorXd::Zero(2), b, cfg), std::invalid_argument);
}

TEST_CASE("leak targeting picks the dominant channels") {
    const SuperatomModel model = experimental_model();
    const LeakageTables tables = bundled_tables();
    const auto [shifts, rates] = scaled_shifts_and_rates(tables, model.params);

    const PulseParams pert = leak_targeted_prototype(PulseShape::PerturbativeDrag, model);
    CHECK(pert.shape == PulseShape::PerturbativeDrag);
    CHECK(pert.delta_leak == shifts[3]);
    CHECK(pert.delta_leak == doctest::Approx(-12.398589628).epsilon(1e-8));

    const PulseParams npert = leak_targeted_prototype(PulseShape::NonPerturbativeDrag, model);
    CHECK(npert.delta_leak == shifts[3]);
    CHECK(npert.beta_leak == tables.beta(0, 3));
    CHECK(npert.beta_leak == doctest::Approx(0.352).epsilon(1e-12));

    const PulseParams mld = leak_targeted_prototype(PulseShape::MultiLevelDrag, model);
    CHECK(mld.delta_leak == shifts[3]);
    CHECK(mld.delta_leak2 == shifts[4]);

    const PulseParams plain = leak_targeted_prototype(PulseShape::DetunedSineSquared, model);
    CHECK(plain.delta_leak == 0.0);
    CHECK(plain.beta_leak == 0.0);
}

TEST_CASE("two-stage optimization improves the toy model") {
    const SuperatomModel model = toy_model();
    const Bounds b = default_bounds(PulseShape::DetunedSineSquared, model.params.T);
    DeConfig de;
    de.population = 12;
    de.max_generations = 40;
    LocalConfig local;
    local.max_iterations = 40;

    const OptimizationResult r =
        optimize_parametrized(PulseShape::DetunedSineSquared, model, b, de, local, 5u);

    PulseParams baseline;
    baseline.shape = PulseShape::SineSquared;
    baseline.A = pi_pulse_amplitude(model.params.T);
    const double reference = loss(model, baseline, model.params.T);

    CHECK(r.loss < reference);
    CHECK(r.seed == 5u);
    CHECK(r.evaluations > 12);
    CHECK(r.pulse.shape == PulseShape::DetunedSineSquared);
    CHECK(r.pulse.A == r.parameters[0]);
    CHECK(r.pulse.delta_d == r.parameters[1]);
    for (int i = 0; i < 2; ++i) {
        CHECK(r.parameters[i] >= b.lower[i]);
        CHECK(r.parameters[i] <= b.upper[i]);
    }
    double total = 0.0;
    for (const auto& [label, value] : r.final_populations)
        total += value;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.loss == doctest::Approx(1.0 - r.final_populations.at("R_0")).epsilon(1e-12));
}

TEST_CASE("optimization is deterministic and stage two never hurts") {
    const SuperatomModel model = toy_model();
    const Bounds b = default_bounds(PulseShape::PerturbativeDrag, model.params.T);
    DeConfig de;
    de.population = 10;
    de.max_generations = 25;
    LocalConfig local;
    local.max_iterations = 30;

    const OptimizationResult a =
        optimize_parametrized(PulseShape::PerturbativeDrag, model, b, de, local, 123u);
    const OptimizationResult c =
        optimize_parametrized(PulseShape::PerturbativeDrag, model, b, de, local, 123u);
    CHECK(a.loss == c.loss);
    CHECK(a.parameters == c.parameters);
    CHECK(a.evaluations == c.evaluations);

    LocalConfig frozen;
    frozen.max_iterations = 0;
    const OptimizationResult stage1 =
        optimize_parametrized(PulseShape::PerturbativeDrag, model, b, de, frozen, 123u);
    CHECK(a.loss <= stage1.loss + 1e-12);
}

TEST_CASE("optimization rejects invalid inputs") {
    const SuperatomModel model = toy_model();
    DeConfig de;
    LocalConfig local;
    CHECK_THROWS_AS(
        optimize_parametrized(PulseShape::DetunedSineSquared, model, Bounds{}, de, local, 1u),
        std::invalid_argument);

    const Bounds wrong = default_bounds(PulseShape::MultiLevelDrag, model.params.T);
    CHECK_THROWS_AS(
        optimize_parametrized(PulseShape::DetunedSineSquared, model, wrong, de, local, 1u),
        std::invalid_argument);
}

TEST_CASE("optimization reports failure when nothing integrates") {
    const SuperatomModel model = toy_model();
    const Bounds b = default_bounds(PulseShape::DetunedSineSquared, model.params.T);
    DeConfig de;
    de.population = 4;
    de.max_generations = 2;
    de.integrator.max_steps = 1;
    LocalConfig local;
    local.max_iterations = 2;
    CHECK_THROWS_AS(optimize_parametrized(PulseShape::DetunedSineSquared, model, b, de, local, 9u),
                    OptimizationError);
}
