// model.cpp - Model assembly from physical parameters and coefficient tables

#include "superatom/model.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace superatom {

namespace {

constexpr std::complex<double> I{0.0, 1.0};

void validate_params(const PhysicalParams& p) {
    if (p.n_max < 1) throw std::invalid_argument("params: n_max must be >= 1");
    if (!(p.sigma > 0.0)) throw std::invalid_argument("params: sigma must be > 0");
    if (!(p.T > 0.0)) throw std::invalid_argument("params: T must be > 0");
    if (p.delta_T < 0.0) throw std::invalid_argument("params: delta_T must be >= 0");
    if (p.gamma < 0.0) throw std::invalid_argument("params: gamma must be >= 0");
    if (!std::isfinite(p.sigma) || !std::isfinite(p.c6) || !std::isfinite(p.delta_T) ||
        !std::isfinite(p.gamma) || !std::isfinite(p.T)) {
        throw std::invalid_argument("params: non-finite value");
    }
}

double double_factorial(int n) {
    double out = 1.0;
    for (int k = n; k >= 2; k -= 2) out *= k;
    return out;
}

} // namespace

double thermal_decay_factor(int n_max) {
    if (n_max < 1) throw std::invalid_argument("thermal_decay_factor: n_max must be >= 1");
    const double exponent = (n_max % 2 == 0) ? 0.5 : -0.5;
    return std::pow(2.0 / std::numbers::pi, exponent) *
           double_factorial(n_max) / double_factorial(n_max - 1);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
scaled_shifts_and_rates(const LeakageTables& tables, const PhysicalParams& params) {
    validate_tables(tables);
    if (tables.n_max != params.n_max) {
        throw std::invalid_argument("scaled_shifts_and_rates: table n_max does not match params");
    }
    if (!(params.sigma > 0.0)) {
        throw std::invalid_argument("scaled_shifts_and_rates: sigma must be > 0");
    }
    const double scale = params.c6 / std::pow(params.sigma, 6);
    Eigen::VectorXd delta_s = -scale * tables.delta_s_raw.array().abs().matrix();
    Eigen::VectorXd gamma_s = scale * tables.gamma_s_raw;
    return {delta_s, gamma_s};
}

StateSpace make_state_space(int n_max) {
    if (n_max < 1) throw std::invalid_argument("make_state_space: n_max must be >= 1");
    StateSpace space;
    space.n_max = n_max;
    space.dim = 2 * n_max + 4;
    space.labels.reserve(space.dim);
    space.labels.push_back("G");
    for (int j = 0; j <= n_max; ++j) space.labels.push_back("R_" + std::to_string(j));
    for (int k = 0; k < n_max; ++k) space.labels.push_back("S_" + std::to_string(k));
    space.labels.push_back("M_th");
    space.labels.push_back("M");
    return space;
}

SuperatomModel build_model(const PhysicalParams& params, const LeakageTables& tables,
                           bool dephasing_free) {
    validate_params(params);
    validate_tables(tables);
    if (tables.n_max != params.n_max) {
        throw std::invalid_argument("build_model: table n_max does not match params");
    }

    SuperatomModel m;
    m.params = params;
    m.space = make_state_space(params.n_max);
    m.dephasing_free = dephasing_free;
    const int n = params.n_max;
    const int dim = m.space.dim;
    const auto& sp = m.space;

    auto [delta_s, gamma_s] = scaled_shifts_and_rates(tables, params);

    Matrix K = Matrix::Zero(dim, dim);
    K(sp.idx_G(), sp.idx_R(0)) = 1.0;
    for (int j = 0; j <= n; ++j) {
        for (int k = 0; k < n; ++k) K(sp.idx_R(j), sp.idx_S(k)) = tables.beta(j, k);
    }
    m.h_x = 0.5 * (K + K.adjoint());
    m.h_y = 0.5 * I * (K - K.adjoint());

    m.h_drift = Matrix::Zero(dim, dim);
    for (int k = 0; k < n; ++k) m.h_drift(sp.idx_S(k), sp.idx_S(k)) = -delta_s[k];
    for (int j = 1; j <= n; ++j) {
        const double coupling = -std::sqrt(static_cast<double>(j)) * params.delta_T;
        m.h_drift(sp.idx_R(j - 1), sp.idx_R(j)) = coupling;
        m.h_drift(sp.idx_R(j), sp.idx_R(j - 1)) = coupling;
    }

    m.n_exc = Matrix::Zero(dim, dim);
    for (int j = 0; j <= n; ++j) m.n_exc(sp.idx_R(j), sp.idx_R(j)) = 1.0;
    for (int k = 0; k < n; ++k) m.n_exc(sp.idx_S(k), sp.idx_S(k)) = 2.0;
    m.h_z = -m.n_exc;

    if (!dephasing_free) {
        for (int k = 0; k < n; ++k) {
            JumpOp jump;
            jump.rate = 2.0 * gamma_s[k];
            jump.from = sp.idx_S(k);
            jump.to = sp.idx_M();
            jump.op = Matrix::Zero(dim, dim);
            jump.op(jump.to, jump.from) = 1.0;
            m.jumps.push_back(std::move(jump));
        }
        JumpOp thermal;
        thermal.rate = 2.0 * thermal_decay_factor(n) * params.delta_T;
        thermal.from = sp.idx_R(n);
        thermal.to = sp.idx_Mth();
        thermal.op = Matrix::Zero(dim, dim);
        thermal.op(thermal.to, thermal.from) = 1.0;
        m.jumps.push_back(std::move(thermal));
    }

    auto add_dephaser = [&](double rate, int state) {
        Dephaser d;
        d.rate = rate;
        d.state = state;
        d.op = Matrix::Zero(dim, dim);
        d.op(state, state) = 1.0;
        m.dephasers.push_back(std::move(d));
    };
    for (int j = 0; j <= n; ++j) add_dephaser(2.0 * params.gamma, sp.idx_R(j));
    for (int k = 0; k < n; ++k) add_dephaser(4.0 * params.gamma, sp.idx_S(k));

    m.damping = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& jump : m.jumps) {
        m.damping.row(jump.from).array() += 0.5 * jump.rate;
        m.damping.col(jump.from).array() += 0.5 * jump.rate;
        m.refills.push_back({jump.from, jump.to, jump.rate});
    }
    for (const auto& d : m.dephasers) {
        m.damping.row(d.state).array() += 0.5 * d.rate;
        m.damping.col(d.state).array() += 0.5 * d.rate;
        m.damping(d.state, d.state) -= d.rate;
    }
    return m;
}

Matrix lindblad_rhs(const SuperatomModel& model, const Matrix& hamiltonian, const Matrix& rho) {
    Matrix out = -I * (hamiltonian * rho - rho * hamiltonian);
    auto dissipate = [&](double rate, const Matrix& op) {
        const Matrix op_dag_op = op.adjoint() * op;
        out += rate * (op * rho * op.adjoint() -
                       0.5 * (op_dag_op * rho + rho * op_dag_op));
    };
    for (const auto& jump : model.jumps) dissipate(jump.rate, jump.op);
    for (const auto& d : model.dephasers) dissipate(d.rate, d.op);
    return out;
}

} // namespace superatom
