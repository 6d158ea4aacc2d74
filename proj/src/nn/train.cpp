#include "senskit/nn/train.hpp"

#include <cmath>
#include <numeric>

#include "senskit/nn/adam.hpp"
#include "senskit/rng.hpp"

namespace senskit::nn {

namespace {

constexpr int kEvalChunk = 256;
constexpr std::uint64_t kShuffleStream = 100;

struct Prepared {
    std::vector<Eigen::MatrixXd> features;  // standardized
    const std::vector<RegressionWindow>* windows;
};

Prepared standardize(const Dataset& data, const NormStats& norm) {
    Prepared p{{}, &data.windows};
    p.features.reserve(data.features.size());
    for (const auto& f : data.features) p.features.push_back(norm.apply(f));
    return p;
}

double prepared_mean_loss(const EstimatorModel& model, const Prepared& data) {
    const auto n = static_cast<int>(data.features.size());
    double total = 0.0;
    std::vector<const Eigen::MatrixXd*> feats;
    std::vector<const RegressionWindow*> wins;
    for (int start = 0; start < n; start += kEvalChunk) {
        const int stop = std::min(n, start + kEvalChunk);
        feats.clear();
        wins.clear();
        for (int k = start; k < stop; ++k) {
            feats.push_back(&data.features[static_cast<std::size_t>(k)]);
            wins.push_back(&(*data.windows)[static_cast<std::size_t>(k)]);
        }
        total += batch_loss_and_gradients(model, feats, wins, nullptr) * static_cast<double>(stop - start);
    }
    return total / static_cast<double>(n);
}

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.window_m < 1) throw ConfigError("train: window must be >= 1");
    if (cfg.sample_stride < 1) throw ConfigError("train: sample stride must be >= 1");
    if (!(cfg.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
}

}  // namespace

Dataset build_dataset(const SpanView& span, int node, int m, int stride, InputMode mode) {
    Dataset data;
    for (int t = span.begin() + m; t < span.end(); t += stride) {
        Sample s = span.sample(node, t, m, mode);
        data.features.push_back(std::move(s.features));
        data.windows.push_back(std::move(s.window));
    }
    return data;
}

double mean_loss(const EstimatorModel& model, const Dataset& data) {
    if (data.size() == 0) throw ConfigError("mean_loss: empty dataset");
    return prepared_mean_loss(model, standardize(data, model.norm));
}

TrainResult train(const SpanView& train_span, const SpanView& val_span, int node, ModelKind kind,
                  const TrainConfig& cfg) {
    validate(cfg);
    const Dataset train_data = build_dataset(train_span, node, cfg.window_m, cfg.sample_stride, cfg.input_mode);
    const Dataset val_data = build_dataset(val_span, node, cfg.window_m, cfg.sample_stride, cfg.input_mode);
    if (train_data.size() < 1) throw ConfigError("train: training span too short for a single window");
    if (val_data.size() < 1) throw ConfigError("train: validation span too short for a single window");

    EstimatorModel model = make_estimator(kind, node, train_span.n_pq() + 1, cfg.window_m, cfg.input_mode,
                                          compute_norm_stats(train_data.features), cfg.fnn_hidden, cfg.lstm_hidden,
                                          cfg.seed);
    const Prepared train_set = standardize(train_data, model.norm);
    const Prepared val_set = standardize(val_data, model.norm);

    AdamState adam = AdamState::for_parameters(model.params(), cfg.lr);
    RngStream shuffle_rng(cfg.seed, kShuffleStream);
    std::vector<int> order(static_cast<std::size_t>(train_data.size()));
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<const Eigen::MatrixXd*> feats;
    std::vector<const RegressionWindow*> wins;
    TensorList grads;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t k = order.size(); k > 1; --k) {
            std::swap(order[k - 1], order[shuffle_rng.below(k)]);
        }
        double train_total = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
                feats.clear();
                wins.clear();
                for (std::size_t k = start; k < stop; ++k) {
                    const auto idx = static_cast<std::size_t>(order[k]);
                    feats.push_back(&train_set.features[idx]);
                    wins.push_back(&train_data.windows[idx]);
                }
                const double loss = batch_loss_and_gradients(model, feats, wins, &grads);
                train_total += loss * static_cast<double>(stop - start);
                adam_step(adam, model.params(), grads);
            }
        } catch (const NumericError& e) {
            throw TrainingDiverged(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " +
                                       e.what(),
                                   result.history);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_total / static_cast<double>(order.size());
        try {
            rec.val_loss = prepared_mean_loss(model, val_set);
        } catch (const NumericError&) {
            rec.val_loss = std::numeric_limits<double>::quiet_NaN();
        }
        result.history.push_back(rec);
        if (!std::isfinite(rec.val_loss)) {
            throw TrainingDiverged("validation loss is not finite after epoch " + std::to_string(epoch),
                                   result.history);
        }
        model.meta.epochs_run = epoch;
        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            model.meta.best_epoch = epoch;
            model.meta.best_val_loss = rec.val_loss;
            result.best = model;
            if (!cfg.checkpoint_path.empty()) save_model(result.best, cfg.checkpoint_path);
        }
    }
    result.last = model;
    return result;
}

}  // namespace senskit::nn
