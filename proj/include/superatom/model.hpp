// model.hpp - Truncated collective state space, Hamiltonian generators, dissipators
#pragma once

#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "superatom/tables.hpp"

namespace superatom {

using Matrix = Eigen::MatrixXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct PhysicalParams {
    int n_max{8};                  // ladder truncation
    double sigma{4.6};             // ensemble RMS radius, um
    double c6{two_pi * 1.54e8};    // van der Waals coefficient, rad/us um^6
    double delta_T{two_pi * 0.08}; // thermal Doppler width, rad/us
    double gamma{two_pi * 0.04};   // common dephasing rate, rad/us
    double T{0.25};                // pulse duration, us
};

struct StateSpace {
    int n_max{0};
    int dim{0};                 // 2 n_max + 4
    std::vector<std::string> labels;  // [G, R_0..R_{n_max}, S_0..S_{n_max-1}, M_th, M]

    int idx_G() const { return 0; }
    int idx_R(int j) const { return 1 + j; }
    int idx_S(int k) const { return n_max + 2 + k; }
    int idx_Mth() const { return dim - 2; }
    int idx_M() const { return dim - 1; }
};

struct JumpOp {
    double rate{0.0};           // full Lindblad prefactor, rad/us
    int from{0};                // source state index
    int to{0};                  // target state index
    Matrix op;                  // |to><from|
};

struct Dephaser {
    double rate{0.0};           // full Lindblad prefactor, rad/us
    int state{0};
    Matrix op;                  // projector |state><state|
};

struct Refill {
    int src{0};
    int dst{0};
    double rate{0.0};
};

struct SuperatomModel {
    StateSpace space;
    PhysicalParams params;
    Matrix h_drift;             // ladder couplings and dressed-state shifts
    Matrix h_x;                 // (K + K^dag)/2
    Matrix h_y;                 // i (K - K^dag)/2
    Matrix h_z;                 // -n_exc
    Matrix n_exc;               // diagonal excitation-number operator
    std::vector<JumpOp> jumps;
    std::vector<Dephaser> dephasers;
    bool dephasing_free{false};
    Eigen::MatrixXd damping;    // elementwise decay rates, merged from all dissipators
    std::vector<Refill> refills;  // population transfer terms of the jump operators
};

// (2/pi)^{(-1)^n / 2} n!! / (n-1)!!, dimensionless; multiply by delta_T for the rate
double thermal_decay_factor(int n_max);

// delta_s[k] = -(c6/sigma^6) |raw_k|, gamma_s[k] = +(c6/sigma^6) raw_k, rad/us
std::pair<Eigen::VectorXd, Eigen::VectorXd>
scaled_shifts_and_rates(const LeakageTables& tables, const PhysicalParams& params);

StateSpace make_state_space(int n_max);

SuperatomModel build_model(const PhysicalParams& params, const LeakageTables& tables,
                           bool dephasing_free = false);

// Lindblad action assembled from the stored dissipators, for cross-checks
Matrix lindblad_rhs(const SuperatomModel& model, const Matrix& hamiltonian, const Matrix& rho);

} // namespace superatom
