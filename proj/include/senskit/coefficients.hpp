#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "senskit/grid.hpp"
#include "senskit/profiles.hpp"

namespace senskit {

/// Sensitivities of one node: z = [K^p_{i,1..m}, K^q_{i,1..m}], m = n_b - 1.
struct CoefficientVector {
    Eigen::VectorXd z;
    int node = 0;
    int t = 0;
    bool rank_deficient = false;
};

/// Coefficient vectors of one node over time, one row per timestamp.
struct CoefficientSeries {
    int node = 0;
    std::vector<int> t;
    Eigen::MatrixXd z;  // t.size() x 2m
    std::vector<bool> rank_deficient;

    int size() const { return static_cast<int>(t.size()); }
    bool operator==(const CoefficientSeries&) const = default;
};

CoefficientSeries to_series(int node, const std::vector<CoefficientVector>& vectors);

/// Analytical coefficients from the exact (noise-free) load flow at each
/// requested profile timestep, for several nodes at once.
std::map<int, CoefficientSeries> true_coefficient_series(const GridModel& grid, const ProfileSet& profiles,
                                                         const std::vector<int>& nodes,
                                                         const std::vector<int>& timesteps, int threads = 0);

/// `t,kp_<i>_1..,kq_<i>_1..`
void write_true_coeffs_csv(const CoefficientSeries& series, const std::filesystem::path& path);
CoefficientSeries read_true_coeffs_csv(const std::filesystem::path& path);

/// `t,z_1..z_{2m},rank_deficient`
void write_estimates_csv(const CoefficientSeries& series, const std::filesystem::path& path);
CoefficientSeries read_estimates_csv(const std::filesystem::path& path, int node);

}  // namespace senskit
