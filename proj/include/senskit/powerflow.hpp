#pragma once

#include <Eigen/Dense>

#include "senskit/grid.hpp"

namespace senskit {

/// Per-unit nodal injections at the n_b - 1 non-slack buses, injection
/// positive (loads are negative).
struct PowerInjection {
    Eigen::VectorXd p;
    Eigen::VectorXd q;

    static PowerInjection zero(int n_pq) { return {Eigen::VectorXd::Zero(n_pq), Eigen::VectorXd::Zero(n_pq)}; }
};

struct LoadFlowSolution {
    CVector v;      // all buses, index 0 = slack
    CVector i_inj;  // Y * v
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
};

struct LoadFlowOptions {
    double tolerance = 1e-10;
    int max_iterations = 50;
};

/// Newton-Raphson in rectangular coordinates from a flat start. Throws
/// NumericError when the mismatch is not below tolerance after
/// max_iterations.
LoadFlowSolution solve_loadflow(const GridModel& grid, const PowerInjection& inj, const LoadFlowOptions& opts = {});

/// Same, with a precomputed admittance matrix (hot loops over timesteps).
LoadFlowSolution solve_loadflow(const GridModel& grid, const CMatrix& ybus, const PowerInjection& inj,
                                const LoadFlowOptions& opts = {});

/// kp(i, j) = d|V_{i+1}| / dP_{j+1}; kq likewise. Indices are non-slack
/// positions (row/column 0 is bus 1).
struct CoefficientMatrix {
    Eigen::MatrixXd kp;
    Eigen::MatrixXd kq;
    LoadFlowSolution operating_point;

    /// Row of node `bus` (1-based bus index) stacked as [kp row | kq row].
    Eigen::VectorXd stacked_row(int bus) const;
};

/// Differentiates S_i = V_i conj(sum_j Y_ij V_j) at the operating point and
/// solves the resulting real 2(n_b-1) system once per injection.
CoefficientMatrix analytical_sensitivities(const GridModel& grid, const LoadFlowSolution& sol);
CoefficientMatrix analytical_sensitivities(const CMatrix& ybus, const LoadFlowSolution& sol);

/// Central differences of |V| with respect to each injection.
CoefficientMatrix finite_difference_sensitivities(const GridModel& grid, const PowerInjection& inj, double eps = 1e-5,
                                                  const LoadFlowOptions& opts = {});

/// Largest |S_i(v) - S_i^spec| over the pq buses.
double power_mismatch(const CMatrix& ybus, const CVector& v, const PowerInjection& inj);

}  // namespace senskit
