#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "senskit/grid.hpp"
#include "senskit/powerflow.hpp"

namespace senskit {

/// Nodal demand and PV generation at 1 s resolution, physical units.
/// Columns are non-slack buses 1..n_b-1; row k is t = k seconds.
struct ProfileSet {
    Eigen::MatrixXd p;   // W, consumption positive
    Eigen::MatrixXd q;   // var, consumption positive
    Eigen::MatrixXd pv;  // W, generation positive

    int steps() const { return static_cast<int>(p.rows()); }
    int n_pq() const { return static_cast<int>(p.cols()); }
    int duration_s() const { return steps(); }

    /// Rows [begin, end).
    ProfileSet slice(int begin, int end) const;
};

struct ProfileConfig {
    int duration_s = 86400;
    double start_hour = 0.0;

    // Daily double-hump load envelope, relative to nominal.
    double base_level = 0.35;
    double morning_hour = 8.0;
    double morning_width_h = 1.5;
    double morning_amplitude = 0.4;
    double evening_hour = 19.5;
    double evening_width_h = 2.0;
    double evening_amplitude = 0.65;

    // Mean-reverting relative fluctuations.
    double load_noise = 0.2;
    double load_reversion_s = 300.0;
    double pf_band = 0.03;
    double pf_noise = 0.5;  // stationary std of the pf process in units of the band

    double sunrise_hour = 6.0;
    double sunset_hour = 20.0;
    double cloud_noise = 0.15;
    double cloud_reversion_s = 60.0;
    double plant_jitter = 0.03;

    static ProfileConfig from_json(const std::string& text);
    std::string to_json() const;
};

ProfileConfig load_profile_config(const std::filesystem::path& path);

ProfileSet generate_profiles(const GridModel& grid, const ProfileConfig& cfg, std::uint64_t seed);

/// Deterministic envelope of the load at hour-of-day h (noise free).
double load_shape(const ProfileConfig& cfg, double hour);
/// Clear-sky PV envelope in [0, 1].
double solar_shape(const ProfileConfig& cfg, double hour);

/// Per-unit injection handed to the load flow: (pv - p) / s_base, -q / s_base.
PowerInjection net_injection(const GridModel& grid, const ProfileSet& profiles, int step);

void write_profiles_csv(const ProfileSet& profiles, const std::filesystem::path& path);
ProfileSet read_profiles_csv(const std::filesystem::path& path);
/// Also checks the column count against the grid.
ProfileSet read_profiles_csv(const std::filesystem::path& path, const GridModel& grid);

}  // namespace senskit
