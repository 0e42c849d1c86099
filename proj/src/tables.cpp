// tables.cpp - Bundled n_max = 8 coefficient table and the text loader

#include "superatom/tables.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace superatom {

namespace {

LeakageTables make_bundled() {
    LeakageTables t;
    t.n_max = 8;
    t.delta_s_raw.resize(8);
    t.delta_s_raw << 796.041, 41.959, 5.877, 1.214, 0.320, 0.099, 0.033, 0.011;
    t.delta_s_raw *= 1e-4;
    t.gamma_s_raw.resize(8);
    t.gamma_s_raw << 1383.691, 50.946, 4.659, 0.709, 0.150, 0.031, 0.012, 0.004;
    t.gamma_s_raw *= 1e-4;
    t.beta.resize(9, 8);
    t.beta << 6.6400, -9.0300,  7.1500,  3.5200,  1.1400,  0.2300, -0.0248,  0.0010,
              3.0900, -1.3700, -2.8000, -4.3600, -2.7100, -0.8910,  0.1460, -0.0086,
              1.5400, -0.8710,  0.8490,  2.6900,  3.3000,  1.8100, -0.4580,  0.0407,
              0.7420, -0.6850,  1.4500,  1.6400, -0.1800, -1.3100,  0.7010, -0.1080,
              0.3490, -0.5250,  1.0400,  0.4410, -0.3620,  0.2900, -0.6340,  0.1900,
              0.1620, -0.3720,  0.5580,  0.0421,  0.0389,  0.2160,  0.2510, -0.2280,
              0.0738, -0.2460,  0.2510,  0.0045,  0.1170, -0.0424,  0.0294,  0.1670,
              0.0332, -0.1540,  0.0947,  0.0330,  0.0479, -0.0420, -0.0560, -0.0640,
             -0.0275, -0.0237, -0.0203,  0.0173, -0.0147,  0.0123,  0.0102,  0.0082;
    t.beta *= 1e-1;
    return t;
}

std::vector<double> parse_values(const std::string& text, const std::string& context) {
    std::istringstream ss(text);
    std::vector<double> values;
    double v;
    while (ss >> v) values.push_back(v);
    std::string rest;
    if (ss.clear(), ss >> rest) {
        throw std::invalid_argument("table parse error: non-numeric token '" + rest +
                                    "' in " + context);
    }
    return values;
}

std::string next_content_line(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find_first_not_of(" \t\r");
        if (pos == std::string::npos || line[pos] == '#') continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }
    return {};
}

} // namespace

const LeakageTables& bundled_tables() {
    static const LeakageTables tables = make_bundled();
    return tables;
}

void validate_tables(const LeakageTables& tables) {
    if (tables.n_max < 1) throw std::invalid_argument("tables: n_max must be >= 1");
    if (tables.beta.rows() != tables.n_max + 1 || tables.beta.cols() != tables.n_max) {
        throw std::invalid_argument("tables: beta must have shape (n_max+1) x n_max");
    }
    if (tables.delta_s_raw.size() != tables.n_max || tables.gamma_s_raw.size() != tables.n_max) {
        throw std::invalid_argument("tables: delta_s_raw and gamma_s_raw must have n_max entries");
    }
    if ((tables.gamma_s_raw.array() < 0.0).any()) {
        throw std::invalid_argument("tables: gamma_s_raw entries must be nonnegative");
    }
    if (!tables.beta.allFinite() || !tables.delta_s_raw.allFinite() || !tables.gamma_s_raw.allFinite()) {
        throw std::invalid_argument("tables: non-finite entry");
    }
}

LeakageTables read_tables(std::istream& in) {
    LeakageTables t;
    std::string line = next_content_line(in);
    if (line.rfind("n_max=", 0) != 0) {
        throw std::invalid_argument("table parse error: expected 'n_max=<int>' header, got '" + line + "'");
    }
    try {
        t.n_max = std::stoi(line.substr(6));
    } catch (const std::exception&) {
        throw std::invalid_argument("table parse error: bad n_max value in '" + line + "'");
    }
    if (t.n_max < 1) throw std::invalid_argument("table parse error: n_max must be >= 1");

    line = next_content_line(in);
    if (line.rfind("delta_s_raw:", 0) != 0) {
        throw std::invalid_argument("table parse error: expected 'delta_s_raw:' line");
    }
    auto ds = parse_values(line.substr(12), "delta_s_raw");
    line = next_content_line(in);
    if (line.rfind("gamma_s_raw:", 0) != 0) {
        throw std::invalid_argument("table parse error: expected 'gamma_s_raw:' line");
    }
    auto gs = parse_values(line.substr(12), "gamma_s_raw");
    if (static_cast<int>(ds.size()) != t.n_max || static_cast<int>(gs.size()) != t.n_max) {
        throw std::invalid_argument("table parse error: coefficient lines must hold n_max values");
    }
    t.delta_s_raw = Eigen::Map<const Eigen::VectorXd>(ds.data(), t.n_max);
    t.gamma_s_raw = Eigen::Map<const Eigen::VectorXd>(gs.data(), t.n_max);

    t.beta.resize(t.n_max + 1, t.n_max);
    for (int j = 0; j <= t.n_max; ++j) {
        line = next_content_line(in);
        auto row = parse_values(line, "beta row " + std::to_string(j));
        if (static_cast<int>(row.size()) != t.n_max) {
            throw std::invalid_argument("table parse error: beta row " + std::to_string(j) +
                                        " must hold n_max values");
        }
        for (int k = 0; k < t.n_max; ++k) t.beta(j, k) = row[k];
    }
    validate_tables(t);
    return t;
}

LeakageTables load_tables(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open table file: " + path);
    return read_tables(in);
}

void write_tables(std::ostream& out, const LeakageTables& tables) {
    validate_tables(tables);
    out.precision(17);
    out << "n_max=" << tables.n_max << '\n';
    out << "delta_s_raw:";
    for (int k = 0; k < tables.n_max; ++k) out << ' ' << tables.delta_s_raw[k];
    out << '\n';
    out << "gamma_s_raw:";
    for (int k = 0; k < tables.n_max; ++k) out << ' ' << tables.gamma_s_raw[k];
    out << '\n';
    for (int j = 0; j <= tables.n_max; ++j) {
        for (int k = 0; k < tables.n_max; ++k) out << (k ? " " : "") << tables.beta(j, k);
        out << '\n';
    }
}

void save_tables(const std::string& path, const LeakageTables& tables) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open table file for writing: " + path);
    write_tables(out, tables);
}

} // namespace superatom
