#pragma once

#include <vector>

#include <Eigen/Dense>

#include "senskit/coefficients.hpp"

namespace senskit::bench {

struct RmseResult {
    Eigen::VectorXd per_coefficient;
    double mean_of_rmse = 0.0;
};

/// rmse_j = sqrt(mean_t (K_j - K^_j)^2); mean_of_rmse averages over j.
/// Series must share node and timestamps.
RmseResult rmse_metrics(const CoefficientSeries& truth, const CoefficientSeries& est);

struct NormalizedError {
    double percent = 0.0;
    int excluded = 0;   // (t, j) pairs skipped because |K| < floor
    int evaluated = 0;
};

/// 100 * mean over t and j of |(K - K^) / K|. Entries with |K| < floor are
/// left out and counted.
NormalizedError normalized_error(const CoefficientSeries& truth, const CoefficientSeries& est, double floor = 1e-9);

/// Box-and-whisker summary; whiskers are the most extreme data within
/// 1.5 IQR of the quartiles. Quartiles use linear interpolation.
struct BoxStats {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double whisker_lo = 0.0;
    double whisker_hi = 0.0;

    bool operator==(const BoxStats&) const = default;
};

BoxStats box_stats(std::vector<double> values);

/// Quantile with linear interpolation between order statistics; `sorted` ascending.
double quantile_sorted(const std::vector<double>& sorted, double p);

}  // namespace senskit::bench
