// tables.hpp - Leakage-channel coefficient tables (couplings, shifts, decay rates)

#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Dense>

namespace superatom {

// Dimensionless coefficients describing the coupling of the singly-excited
// ladder R_0..R_{n_max} to the doubly-excited states S_0..S_{n_max-1} and the
// (raw) interaction-induced shifts and decay rates of the latter. Shifts and
// rates acquire physical units only after scaling by C6/sigma^6.
struct LeakageTables {
    int n_max{0};
    Eigen::MatrixXd beta;         // (n_max+1) x n_max, row j = couplings of R_j
    Eigen::VectorXd delta_s_raw;  // n_max signed coefficients
    Eigen::VectorXd gamma_s_raw;  // n_max nonnegative coefficients
};

// Built-in table for n_max = 8 (the only basis size shipped with the library).
const LeakageTables& bundled_tables();

// Shape and sign checks shared by the loaders and build_model.
void validate_tables(const LeakageTables& tables);

// Text format: line "n_max=<int>", line "delta_s_raw: v0 ... v_{n-1}",
// line "gamma_s_raw: v0 ... v_{n-1}", then n_max+1 rows of n_max beta values.
LeakageTables read_tables(std::istream& in);
LeakageTables load_tables(const std::string& path);
void write_tables(std::ostream& out, const LeakageTables& tables);
void save_tables(const std::string& path, const LeakageTables& tables);

} // namespace superatom
