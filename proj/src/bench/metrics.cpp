#include "senskit/bench/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "senskit/errors.hpp"

namespace senskit::bench {

namespace {

void check_aligned(const CoefficientSeries& truth, const CoefficientSeries& est) {
    if (truth.node != est.node) throw ConfigError("metrics: series belong to different nodes");
    if (truth.t != est.t) throw ConfigError("metrics: timestamps of truth and estimate are not aligned");
    if (truth.z.rows() != est.z.rows() || truth.z.cols() != est.z.cols()) {
        throw ConfigError("metrics: coefficient matrices differ in shape");
    }
    if (truth.size() == 0) throw ConfigError("metrics: empty series");
}

}  // namespace

RmseResult rmse_metrics(const CoefficientSeries& truth, const CoefficientSeries& est) {
    check_aligned(truth, est);
    RmseResult r;
    r.per_coefficient = ((truth.z - est.z).array().square().colwise().mean()).sqrt().transpose();
    r.mean_of_rmse = r.per_coefficient.mean();
    return r;
}

NormalizedError normalized_error(const CoefficientSeries& truth, const CoefficientSeries& est, double floor) {
    check_aligned(truth, est);
    NormalizedError out;
    double total = 0.0;
    for (Eigen::Index t = 0; t < truth.z.rows(); ++t) {
        for (Eigen::Index j = 0; j < truth.z.cols(); ++j) {
            const double k = truth.z(t, j);
            if (std::abs(k) < floor) {
                ++out.excluded;
                continue;
            }
            total += std::abs((k - est.z(t, j)) / k);
            ++out.evaluated;
        }
    }
    out.percent = out.evaluated ? 100.0 * total / out.evaluated : 0.0;
    return out;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw ConfigError("quantile of empty sample");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BoxStats box_stats(std::vector<double> values) {
    if (values.empty()) throw ConfigError("box stats of empty sample");
    std::sort(values.begin(), values.end());
    BoxStats b;
    b.min = values.front();
    b.max = values.back();
    b.q1 = quantile_sorted(values, 0.25);
    b.median = quantile_sorted(values, 0.5);
    b.q3 = quantile_sorted(values, 0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr;
    const double hi_fence = b.q3 + 1.5 * iqr;
    b.whisker_lo = *std::lower_bound(values.begin(), values.end(), lo_fence);
    b.whisker_hi = *(std::upper_bound(values.begin(), values.end(), hi_fence) - 1);
    return b;
}

}  // namespace senskit::bench
