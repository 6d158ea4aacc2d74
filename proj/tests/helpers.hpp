#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "senskit/grid.hpp"
#include "senskit/measurement.hpp"
#include "senskit/profiles.hpp"

namespace testutil {

using namespace senskit;

inline std::filesystem::path data_dir() { return SENSKIT_DATA_DIR; }

inline std::filesystem::path bundled_grid_path() { return data_dir() / "cigre_like.json"; }

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("senskit_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Bus slack() { return {0, "slack", BusKind::slack, 0.0, 0.0, 0.0}; }
inline Bus pq(int k, double p_w = 0.0, double q_var = 0.0, double pv_w = 0.0) {
    return {k, "b" + std::to_string(k), BusKind::pq, p_w, q_var, pv_w};
}

/// Line given in per-unit on the default 400 V / 100 kVA base.
inline Line line_pu(const GridModel& g, int from, int to, double r, double x, double b = 0.0) {
    const double zb = g.z_base_ohm();
    return {from, to, r * zb, x * zb, b / zb};
}

inline GridModel two_bus(double r_pu, double x_pu) {
    GridModel g;
    g.buses = {slack(), pq(1)};
    g.lines = {line_pu(g, 0, 1, r_pu, x_pu)};
    return g;
}

/// 0 - 1 - 2 - ... chain with identical sections.
inline GridModel chain(int n_buses, double r_pu, double x_pu) {
    GridModel g;
    g.buses = {slack()};
    for (int k = 1; k < n_buses; ++k) {
        g.buses.push_back(pq(k));
        g.lines.push_back(line_pu(g, k - 1, k, r_pu, x_pu));
    }
    return g;
}

/// Random radial grid: bus k attaches to a random earlier bus.
inline GridModel random_radial(std::mt19937_64& rng, int n_buses) {
    std::uniform_real_distribution<double> imp(0.01, 0.2);
    GridModel g;
    g.buses = {slack()};
    for (int k = 1; k < n_buses; ++k) {
        g.buses.push_back(pq(k));
        std::uniform_int_distribution<int> parent(0, k - 1);
        g.lines.push_back(line_pu(g, parent(rng), k, imp(rng), imp(rng)));
    }
    return g;
}

inline double relative_gap(double a, double b, double floor) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) / std::max(scale, floor);
}

/// Profiles with constant loads plus a deterministic sinusoidal wiggle per bus.
inline ProfileSet wiggly_profiles(const GridModel& grid, int steps) {
    ProfileSet ps;
    const int m = grid.n_pq();
    ps.p.resize(steps, m);
    ps.q.resize(steps, m);
    ps.pv = Eigen::MatrixXd::Zero(steps, m);
    for (int t = 0; t < steps; ++t) {
        for (int c = 0; c < m; ++c) {
            const double ph = 0.37 * (c + 1);
            ps.p(t, c) = 5000.0 * (1.0 + 0.05 * std::sin(0.05 * t * (c + 1) + ph) + 0.02 * std::cos(0.31 * t + 2 * ph));
            ps.q(t, c) = 1500.0 * (1.0 + 0.05 * std::cos(0.07 * t * (c + 2) + ph) + 0.02 * std::sin(0.23 * t - ph));
        }
    }
    return ps;
}

/// Series whose node-`node` voltage deltas are exactly [dP dQ] z.
inline MeasurementSeries linear_series(const Eigen::VectorXd& z, int n_pq, int node, int steps,
                                       std::uint64_t seed, double step_std = 0.01) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, step_std);
    MeasurementSeries s;
    s.p = Eigen::MatrixXd::Zero(steps, n_pq);
    s.q = Eigen::MatrixXd::Zero(steps, n_pq);
    s.v_mag = Eigen::MatrixXd::Ones(steps, n_pq);
    for (int k = 1; k < steps; ++k) {
        for (int c = 0; c < n_pq; ++c) {
            s.p(k, c) = s.p(k - 1, c) + step(rng);
            s.q(k, c) = s.q(k - 1, c) + step(rng);
        }
    }
    // Deltas are computed first so the window sees y = A z up to one rounding.
    for (int k = 1; k < steps; ++k) {
        Eigen::VectorXd row(2 * n_pq);
        row << (s.p.row(k) - s.p.row(k - 1)).transpose(), (s.q.row(k) - s.q.row(k - 1)).transpose();
        s.v_mag(k, node - 1) = s.v_mag(k - 1, node - 1) + row.dot(z);
    }
    return s;
}

}  // namespace testutil
