#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace senskit {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

enum class BusKind { slack, pq };

struct Bus {
    int index = 0;
    std::string name;
    BusKind kind = BusKind::pq;
    double load_p_w = 0.0;
    double load_q_var = 0.0;
    double pv_p_w = 0.0;

    bool operator==(const Bus&) const = default;
};

struct Line {
    int from = 0;
    int to = 0;
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double b_shunt_s = 0.0;  // total line charging, half at each end

    bool operator==(const Line&) const = default;
};

/// Radial or meshed feeder in physical units. Simulation converts to
/// per-unit on (v_base, s_base); estimators never see this type.
struct GridModel {
    std::vector<Bus> buses;
    std::vector<Line> lines;
    double v_base_v = 400.0;
    double s_base_va = 100e3;
    Complex slack_voltage_pu{1.0, 0.0};

    int n_buses() const { return static_cast<int>(buses.size()); }
    /// Number of non-slack buses, n_b - 1.
    int n_pq() const { return n_buses() - 1; }
    double z_base_ohm() const { return v_base_v * v_base_v / s_base_va; }

    bool operator==(const GridModel&) const = default;
};

/// Returns every violated invariant as a human readable message; empty iff valid.
std::vector<std::string> validate(const GridModel& grid);

/// Throws ConfigError listing all violations.
void require_valid(const GridModel& grid);

GridModel parse_grid_json(const std::string& text);
std::string grid_to_json(const GridModel& grid);

GridModel load_grid(const std::filesystem::path& path);
void write_grid(const GridModel& grid, const std::filesystem::path& path);

/// FNV-1a over the canonical JSON encoding; identifies a grid in sidecar files.
std::uint64_t grid_hash(const GridModel& grid);

/// Nodal admittance matrix in per-unit, buses ordered by index.
CMatrix admittance_matrix(const GridModel& grid);

}  // namespace senskit
