#include "senskit/estimators.hpp"

#include <cmath>
#include <string>

#include "senskit/errors.hpp"

namespace senskit {

RegressionWindow build_window(const MeasurementSeries& series, int node, int t, int m) {
    const int n = series.n_pq();
    if (node < 1 || node > n) throw ConfigError("node " + std::to_string(node) + " is not a non-slack bus");
    if (m < 1) throw ConfigError("window length must be >= 1");
    const int last = t - series.t0;
    if (last - m < 0 || last >= series.steps()) {
        throw ConfigError("insufficient history for window of " + std::to_string(m) + " deltas ending at t=" +
                          std::to_string(t));
    }
    RegressionWindow w;
    w.node = node;
    w.t_end = t;
    w.a.resize(m, 2 * n);
    w.y.resize(m);
    for (int r = 0; r < m; ++r) {
        const int k = last - m + 1 + r;
        w.a.row(r).head(n) = series.p.row(k) - series.p.row(k - 1);
        w.a.row(r).tail(n) = series.q.row(k) - series.q.row(k - 1);
        w.y(r) = series.v_mag(k, node - 1) - series.v_mag(k - 1, node - 1);
    }
    return w;
}

CoefficientVector ls_estimate(const RegressionWindow& w, const LsOptions& opts) {
    CoefficientVector out;
    out.node = w.node;
    out.t = w.t_end;
    const Eigen::Index cols = w.a.cols();

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(w.a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double s_max = s.size() ? s(0) : 0.0;
    const double s_min = s.size() ? s(s.size() - 1) : 0.0;
    // cond(A^T A) = cond(A)^2
    const bool full_rank_shape = w.a.rows() >= cols;
    const bool well_conditioned =
        full_rank_shape && s_min > 0.0 && (s_max / s_min) * (s_max / s_min) <= opts.max_condition;

    if (well_conditioned) {
        out.z = svd.solve(w.y);
        return out;
    }
    out.rank_deficient = true;
    out.z = Eigen::VectorXd::Zero(cols);
    if (s_max == 0.0) return out;
    const double cutoff = s_max / std::sqrt(opts.max_condition);
    const Eigen::VectorXd uty = svd.matrixU().transpose() * w.y;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) >= cutoff) out.z += svd.matrixV().col(k) * (uty(k) / s(k));
    }
    return out;
}

double surrogate_loss(const RegressionWindow& w, const Eigen::VectorXd& z) {
    if (z.size() != w.a.cols()) throw ConfigError("coefficient vector length does not match window");
    return (w.y - w.a * z).squaredNorm();
}

void AccessLog::record(int first, int last) {
    int cur = min_t_.load();
    while (first < cur && !min_t_.compare_exchange_weak(cur, first)) {
    }
    cur = max_t_.load();
    while (last > cur && !max_t_.compare_exchange_weak(cur, last)) {
    }
    ++reads_;
}

SpanView::SpanView(const MeasurementSeries& series, int begin, int end, AccessLog* log)
    : series_(&series), begin_(begin), end_(end), log_(log) {
    if (begin < series.t0 || end > series.t_end() || begin >= end) {
        throw ConfigError("span [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") is not inside the series");
    }
}

void SpanView::check(int first, int last) const {
    if (first < begin_ || last >= end_) {
        throw ConfigError("read of t=" + std::to_string(first) + ".." + std::to_string(last) + " outside span [" +
                          std::to_string(begin_) + ", " + std::to_string(end_) + ")");
    }
    if (log_) log_->record(first, last);
}

RegressionWindow SpanView::window(int node, int t, int m) const {
    check(t - m, t);
    return build_window(*series_, node, t, m);
}

Sample SpanView::sample(int node, int t, int m, InputMode mode) const {
    Sample s{Eigen::MatrixXd(), window(node, t, m)};
    const int n = series_->n_pq();
    s.features.resize(1 + 2 * n, m);
    s.features.row(0) = s.window.y.transpose();
    if (mode == InputMode::deltas) {
        s.features.bottomRows(2 * n) = s.window.a.transpose();
    } else {
        const int first = t - series_->t0 - m + 1;
        s.features.middleRows(1, n) = series_->p.middleRows(first, m).transpose();
        s.features.bottomRows(n) = series_->q.middleRows(first, m).transpose();
    }
    return s;
}

CoefficientSeries ls_sliding(const MeasurementSeries& series, int node, int window, int stride, int t_first,
                             int t_last, const LsOptions& opts) {
    if (stride < 1) throw ConfigError("stride must be >= 1");
    std::vector<CoefficientVector> est;
    for (int t = t_first; t < t_last; t += stride) est.push_back(ls_estimate(build_window(series, node, t, window), opts));
    return to_series(node, est);
}

}  // namespace senskit
