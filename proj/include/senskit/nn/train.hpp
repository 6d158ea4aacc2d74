#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "senskit/errors.hpp"
#include "senskit/estimators.hpp"
#include "senskit/nn/estimator.hpp"

namespace senskit::nn {

struct TrainConfig {
    int epochs = 20;
    int batch_size = 32;
    double lr = 1e-3;
    int window_m = 60;
    int sample_stride = 10;  // seconds between consecutive training windows
    std::uint64_t seed = 0;
    std::vector<int> fnn_hidden = {128, 64};
    int lstm_hidden = 64;
    InputMode input_mode = InputMode::deltas;
    std::string checkpoint_path;  // best model is written here on every improvement, if set
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

/// Windows and features gathered from one span.
struct Dataset {
    std::vector<Eigen::MatrixXd> features;  // raw, channels x M
    std::vector<RegressionWindow> windows;

    int size() const { return static_cast<int>(windows.size()); }
};

/// Windows ending at begin + m, begin + m + stride, ... inside the span.
Dataset build_dataset(const SpanView& span, int node, int m, int stride, InputMode mode);

/// Mean surrogate loss of the model over a dataset (features standardized
/// with the model's stats). Evaluation order is fixed.
double mean_loss(const EstimatorModel& model, const Dataset& data);

struct TrainResult {
    EstimatorModel best;   // lowest validation loss over all epochs
    EstimatorModel last;   // parameters after the final epoch
    std::vector<EpochRecord> history;
};

class TrainingDiverged : public NumericError {
public:
    TrainingDiverged(const std::string& what, std::vector<EpochRecord> history)
        : NumericError(what), history_(std::move(history)) {}
    const std::vector<EpochRecord>& history() const { return history_; }

private:
    std::vector<EpochRecord> history_;
};

/// Mini-batch Adam on the surrogate loss with per-epoch validation; keeps
/// the parameters of the epoch with the lowest validation loss.
TrainResult train(const SpanView& train_span, const SpanView& val_span, int node, ModelKind kind,
                  const TrainConfig& cfg);

}  // namespace senskit::nn
