// experiments.hpp - Sweeps, scenario studies, and convergence scans
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "superatom/model.hpp"
#include "superatom/optimizer.hpp"
#include "superatom/propagator.hpp"
#include "superatom/tables.hpp"

namespace superatom {

// argmax over the S_k populations, ties broken by lowest k
std::string dominant_leakage(const std::map<std::string, double>& final_populations);

struct SweepSpec {
    std::vector<double> T_values;
    std::vector<double> sigma_values;
    std::vector<PulseShape> kinds{PulseShape::SineSquared, PulseShape::NonPerturbativeDrag};
    PhysicalParams base;       // T and sigma overridden per cell
    bool dephasing_free{false};
    std::uint64_t seed{0};
    int threads{1};
    DeConfig de;
    LocalConfig local;
    IntegratorConfig integrator;
};

struct SweepCell {
    double T{0.0};
    double sigma{0.0};
    bool failed{false};
    std::string error;
    std::string dominant;
    std::map<std::string, double> baseline;    // sine-squared final populations
    std::map<std::string, double> optimized;   // optimized DRAG final populations
    Eigen::VectorXd parameters;                // optimized (A, delta_d, alpha)
    double baseline_loss{1.0};
    double optimized_loss{1.0};
    std::uint64_t cell_seed{0};
};

std::uint64_t cell_seed(std::uint64_t seed, std::size_t t_index, std::size_t sigma_index);

std::vector<SweepCell> run_sweep(const SweepSpec& spec, const LeakageTables& tables);

// one row per (cell, pulse kind): T, sigma, pulse, populations, dominant
// channel, threshold flags, optimized parameters
void write_sweep(std::ostream& out, const SweepSpec& spec, const std::vector<SweepCell>& cells);
void save_sweep(const std::string& path, const SweepSpec& spec,
                const std::vector<SweepCell>& cells);

struct ConvergenceCurve {
    int n_max{0};
    std::vector<double> scales;
    std::vector<double> total_rydberg;
    double mean_difference{0.0};   // vs the largest supplied basis
};

std::vector<ConvergenceCurve> convergence_scan(const std::vector<LeakageTables>& tables,
                                               const std::vector<double>& amplitude_scales,
                                               const PhysicalParams& base,
                                               const IntegratorConfig& cfg = {});

// sine-squared pi pulse on the standard model with a substituted C6
std::map<std::string, double> high_n_scenarios(double c6, double T, double sigma,
                                               const LeakageTables& tables,
                                               IntegratorConfig cfg = {});

struct DephasingFreeStudy {
    std::map<std::string, double> baseline;    // dephasing-free sine-squared
    std::map<std::string, double> optimized;   // dephasing-free optimized MultiLevelDrag
    std::map<std::string, double> restored;    // the same pulse with dephasing back on
    OptimizationResult result;
};

DephasingFreeStudy dephasing_free_study(double T, double sigma, const LeakageTables& tables,
                                        const DeConfig& de, const LocalConfig& local,
                                        std::uint64_t seed);

} // namespace superatom
