#pragma once

#include <climits>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "senskit/bench/metrics.hpp"
#include "senskit/estimators.hpp"
#include "senskit/grid.hpp"
#include "senskit/nn/train.hpp"
#include "senskit/profiles.hpp"

namespace senskit::bench {

/// Durations in seconds. The test span is the last `test_s` seconds of
/// the data; validation and training precede it in that order.
struct Splits {
    int train_s = 9 * 3600;
    int val_s = 9 * 3600;
    int test_s = 6 * 3600;
};

struct ExperimentConfig {
    std::filesystem::path grid_path;
    std::filesystem::path profiles_path;  // empty: use the generator
    ProfileConfig profile_cfg;
    std::uint64_t profile_seed = 0;
    std::vector<std::string> it_classes = {"0.2", "0.5", "1.0"};
    std::vector<std::string> methods = {"ls", "fnn", "lstm"};
    std::vector<int> nodes = {11};
    int window_m = 60;
    Splits splits;
    int eval_stride_s = 10;  // spacing of evaluated test windows (and truth points)
    std::vector<std::uint64_t> seeds = {1};
    nn::TrainConfig train;
    LsOptions ls;
    std::filesystem::path output_dir;  // empty: no artifacts written

    /// Relative paths inside the JSON resolve against `base_dir`.
    static ExperimentConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {});
    std::string to_json() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Grid and profiles already in memory (lets tests skip the files).
struct ExperimentInputs {
    GridModel grid;
    ProfileSet profiles;
};

ExperimentInputs load_inputs(const ExperimentConfig& cfg);

struct CellReport {
    std::string method;
    std::string it_class;
    int node = 0;
    Eigen::VectorXd rmse;
    double mean_of_rmse = 0.0;
    NormalizedError normalized;
    std::vector<BoxStats> boxes;  // error K^ - K per coefficient
    double final_mean_of_rmse = std::numeric_limits<double>::quiet_NaN();  // NN: last-epoch model
    int best_epoch = 0;
    int read_min = INT_MAX;  // timestamps read while fitting (training + validation)
    int read_max = INT_MIN;

    // Not part of the deterministic content.
    double seconds = 0.0;
    std::vector<nn::EpochRecord> history;

    bool same_metrics(const CellReport& o) const;
};

struct MetricsReport {
    int test_begin = 0;
    int test_end = 0;
    std::vector<CellReport> cells;

    const CellReport& at(const std::string& method, const std::string& it_class, int node) const;
    /// Compares everything except runtimes and training histories.
    bool same_metrics(const MetricsReport& o) const;
};

/// Per (it_class, method, node): simulate, fit on train/validation, score
/// on the test span against analytical truth. Writes artifacts when
/// cfg.output_dir is set.
MetricsReport run_comparison(const ExperimentConfig& cfg);
MetricsReport run_comparison(const ExperimentConfig& cfg, const ExperimentInputs& inputs);

void write_report(const MetricsReport& report, const std::filesystem::path& dir);
/// Reads metrics.csv and boxplot.csv back.
MetricsReport read_report(const std::filesystem::path& dir);
std::string format_table(const MetricsReport& report, const std::vector<std::string>& it_classes,
                         const std::vector<std::string>& methods, int node);

struct StudyPoint {
    std::string method;
    double hours = 0.0;
    std::uint64_t seed = 0;
    double normalized_error_pct = 0.0;
    double mean_of_rmse = 0.0;
    double final_mean_of_rmse = 0.0;
    int span_begin = 0;  // declared training+validation span
    int span_end = 0;
    int read_min = INT_MAX;
    int read_max = INT_MIN;
};

struct StudyResult {
    int test_begin = 0;
    int test_end = 0;
    std::vector<double> lengths_h;
    std::vector<StudyPoint> points;

    /// Mean over seeds for one (method, length).
    double mean_error(const std::string& method, double hours) const;
};

/// For each length L: the L hours right before the test span, half for
/// training and half for validation; score normalized error on the test span.
/// Uses the first IT class, the first node and the NN methods of the config.
StudyResult training_length_study(const ExperimentConfig& cfg, const std::vector<double>& lengths_h);
StudyResult training_length_study(const ExperimentConfig& cfg, const ExperimentInputs& inputs,
                                  const std::vector<double>& lengths_h);

}  // namespace senskit::bench
