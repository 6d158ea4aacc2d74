#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "senskit/estimators.hpp"
#include "senskit/nn/fnn.hpp"
#include "senskit/nn/lstm.hpp"

namespace senskit::nn {

enum class ModelKind { fnn, lstm };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Per-channel standardization of the step features.
struct NormStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
    bool operator==(const NormStats&) const = default;
};

NormStats compute_norm_stats(std::span<const Eigen::MatrixXd> features);

struct TrainingMeta {
    int best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::quiet_NaN();
    int epochs_run = 0;
    std::uint64_t seed = 0;
};

/// A trained (or freshly initialized) coefficient estimator for one node.
/// Exactly one of `fnn` / `lstm` is populated, according to `kind`.
struct EstimatorModel {
    ModelKind kind = ModelKind::fnn;
    int node = 0;
    int n_buses = 0;
    int window_m = 0;
    InputMode input_mode = InputMode::deltas;
    NormStats norm;
    FnnModel fnn;
    LstmModel lstm;
    TrainingMeta meta;

    TensorList& params() { return kind == ModelKind::fnn ? fnn.params : lstm.params; }
    const TensorList& params() const { return kind == ModelKind::fnn ? fnn.params : lstm.params; }
    std::vector<std::string> parameter_names() const;
    int coefficient_count() const { return 2 * (n_buses - 1); }

    /// Standardizes raw features with the stored stats and runs the network.
    CoefficientVector predict(const Sample& sample) const;
};

EstimatorModel make_estimator(ModelKind kind, int node, int n_buses, int window_m, InputMode mode, NormStats norm,
                              const std::vector<int>& fnn_hidden, int lstm_hidden, std::uint64_t seed);

/// Outputs (coefficients x B) for already-standardized features.
Eigen::MatrixXd forward_batch(const EstimatorModel& model, std::span<const Eigen::MatrixXd* const> features);

/// Mean surrogate loss over the batch; fills `grads` (same layout as
/// params()) when non-null. Throws NumericError if the loss is not finite.
double batch_loss_and_gradients(const EstimatorModel& model, std::span<const Eigen::MatrixXd* const> features,
                                std::span<const RegressionWindow* const> windows, TensorList* grads);

/// Single-window loss ||y - A f(x)||^2 and its gradient for every parameter.
std::pair<double, TensorList> loss_and_gradients(const FnnModel& model, const RegressionWindow& window,
                                                 const Eigen::VectorXd& x);
/// `sequence` is (input_dim x M).
std::pair<double, TensorList> loss_and_gradients(const LstmModel& model, const RegressionWindow& window,
                                                 const Eigen::MatrixXd& sequence);

std::string model_to_json(const EstimatorModel& model);
EstimatorModel model_from_json(const std::string& text);
void save_model(const EstimatorModel& model, const std::filesystem::path& path);
EstimatorModel load_model(const std::filesystem::path& path);

}  // namespace senskit::nn
