#pragma once

#include <atomic>
#include <climits>

#include <Eigen/Dense>

#include "senskit/coefficients.hpp"
#include "senskit/measurement.hpp"

namespace senskit {

/// Stacked regression system y ~ A z for one node over M consecutive
/// deltas. Row r of `a` is [dP(k) | dQ(k)] and y(r) = d|V_node|(k) for the
/// same step k.
struct RegressionWindow {
    Eigen::MatrixXd a;  // M x 2m
    Eigen::VectorXd y;  // M
    int node = 0;
    int t_end = 0;

    int length() const { return static_cast<int>(y.size()); }
};

/// Window of `m` consecutive deltas ending at timestamp t (reads samples
/// t-m .. t). Throws ConfigError when there is not enough history.
RegressionWindow build_window(const MeasurementSeries& series, int node, int t, int m);

struct LsOptions {
    /// Minimum-norm truncated solve when cond(A^T A) exceeds this.
    double max_condition = 1e8;
};

/// Least-squares coefficients. Rank-deficient or ill-conditioned windows
/// get the truncated minimum-norm solution and `rank_deficient = true`.
CoefficientVector ls_estimate(const RegressionWindow& w, const LsOptions& opts = {});

/// ||y - A z||^2
double surrogate_loss(const RegressionWindow& w, const Eigen::VectorXd& z);
inline double surrogate_loss(const RegressionWindow& w, const CoefficientVector& z) { return surrogate_loss(w, z.z); }

/// Model input channels per step: [d|V_node|, P-part, Q-part]. `deltas`
/// uses consecutive differences for P and Q (same rows as the regression
/// window); `levels` uses the raw measured P and Q.
enum class InputMode { deltas, levels };

/// Window plus the matching per-step model features (channels x M).
struct Sample {
    Eigen::MatrixXd features;
    RegressionWindow window;
};

/// Records the range of timestamps read through a SpanView.
class AccessLog {
public:
    void record(int first, int last);
    int min_t() const { return min_t_.load(); }
    int max_t() const { return max_t_.load(); }
    long reads() const { return reads_.load(); }
    bool touched(int begin, int end) const { return reads() > 0 && min_t() < end && max_t() >= begin; }

private:
    std::atomic<int> min_t_{INT_MAX};
    std::atomic<int> max_t_{INT_MIN};
    std::atomic<long> reads_{0};
};

/// Read-only access to the timestamps [begin, end) of a series. Anything
/// that would read outside the span throws, and every read is logged.
class SpanView {
public:
    SpanView(const MeasurementSeries& series, int begin, int end, AccessLog* log = nullptr);

    RegressionWindow window(int node, int t, int m) const;
    Sample sample(int node, int t, int m, InputMode mode) const;

    int begin() const { return begin_; }
    int end() const { return end_; }
    int n_pq() const { return series_->n_pq(); }

private:
    void check(int first, int last) const;

    const MeasurementSeries* series_;
    int begin_;
    int end_;
    AccessLog* log_;
};

/// Sliding LS over windows ending at t_first, t_first + stride, ... < t_last.
CoefficientSeries ls_sliding(const MeasurementSeries& series, int node, int window, int stride, int t_first,
                             int t_last, const LsOptions& opts = {});

}  // namespace senskit
