#include "senskit/nn/estimator.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "senskit/errors.hpp"
#include "senskit/nn/loss.hpp"

namespace senskit::nn {

using json = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex(std::uint64_t v) {
    std::ostringstream s;
    s << std::hex << v;
    return s.str();
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void require_finite(double loss, const TensorList& params, const std::vector<std::string>& names) {
    if (std::isfinite(loss)) return;
    std::ostringstream msg;
    msg << "non-finite loss; parameter norms:";
    for (std::size_t k = 0; k < params.size(); ++k) {
        msg << ' ' << (k < names.size() ? names[k] : std::to_string(k)) << '=' << params[k].vector().norm();
    }
    throw NumericError(msg.str());
}

Eigen::MatrixXd stack_flat(std::span<const Eigen::MatrixXd* const> features) {
    const auto batch = static_cast<Eigen::Index>(features.size());
    const Eigen::Index d = features.front()->size();
    Eigen::MatrixXd x(d, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const Eigen::MatrixXd& f = *features[static_cast<std::size_t>(b)];
        if (f.size() != d) throw ConfigError("fnn: feature sizes differ within batch");
        // Step-major flattening: [x_1; x_2; ...; x_M].
        x.col(b) = Eigen::Map<const Eigen::VectorXd>(f.data(), d);
    }
    return x;
}

std::vector<Eigen::MatrixXd> stack_steps(std::span<const Eigen::MatrixXd* const> features) {
    const auto batch = static_cast<Eigen::Index>(features.size());
    const Eigen::Index channels = features.front()->rows();
    const Eigen::Index m = features.front()->cols();
    std::vector<Eigen::MatrixXd> steps(static_cast<std::size_t>(m), Eigen::MatrixXd(channels, batch));
    for (Eigen::Index b = 0; b < batch; ++b) {
        const Eigen::MatrixXd& f = *features[static_cast<std::size_t>(b)];
        if (f.rows() != channels || f.cols() != m) throw ConfigError("lstm: feature shapes differ within batch");
        for (Eigen::Index t = 0; t < m; ++t) steps[static_cast<std::size_t>(t)].col(b) = f.col(t);
    }
    return steps;
}

json tensor_json(const std::string& name, const Tensor& t) {
    return {{"name", name}, {"shape", t.shape}, {"data", t.data}};
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::fnn ? "fnn" : "lstm"; }

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "fnn") return ModelKind::fnn;
    if (name == "lstm") return ModelKind::lstm;
    throw ConfigError("unknown model type '" + name + "' (expected fnn or lstm)");
}

Eigen::MatrixXd NormStats::apply(const Eigen::MatrixXd& features) const {
    if (features.rows() != mean.size()) throw ConfigError("feature channel count does not match norm stats");
    return (features.colwise() - mean).array().colwise() / std.array();
}

NormStats compute_norm_stats(std::span<const Eigen::MatrixXd> features) {
    if (features.empty()) throw ConfigError("cannot compute norm stats of an empty dataset");
    const Eigen::Index channels = features.front().rows();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(channels);
    double count = 0.0;
    for (const auto& f : features) {
        sum += f.rowwise().sum();
        count += static_cast<double>(f.cols());
    }
    NormStats stats;
    stats.mean = sum / count;
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(channels);
    for (const auto& f : features) sq += (f.colwise() - stats.mean).rowwise().squaredNorm();
    stats.std = (sq / count).cwiseSqrt();
    // Constant channels carry no information; leave them unscaled.
    for (Eigen::Index c = 0; c < channels; ++c) {
        if (!(stats.std(c) > 0.0)) stats.std(c) = 1.0;
    }
    return stats;
}

std::vector<std::string> EstimatorModel::parameter_names() const {
    return kind == ModelKind::fnn ? fnn.parameter_names() : lstm.parameter_names();
}

CoefficientVector EstimatorModel::predict(const Sample& sample) const {
    const Eigen::MatrixXd x = norm.apply(sample.features);
    const Eigen::MatrixXd* ptr = &x;
    CoefficientVector out;
    out.z = forward_batch(*this, std::span(&ptr, 1)).col(0);
    out.node = sample.window.node;
    out.t = sample.window.t_end;
    return out;
}

EstimatorModel make_estimator(ModelKind kind, int node, int n_buses, int window_m, InputMode mode, NormStats norm,
                              const std::vector<int>& fnn_hidden, int lstm_hidden, std::uint64_t seed) {
    EstimatorModel model;
    model.kind = kind;
    model.node = node;
    model.n_buses = n_buses;
    model.window_m = window_m;
    model.input_mode = mode;
    model.norm = std::move(norm);
    model.meta.seed = seed;
    const int channels = static_cast<int>(model.norm.mean.size());
    if (channels != 2 * (n_buses - 1) + 1) throw ConfigError("norm stats do not match the grid's channel count");
    if (kind == ModelKind::fnn) {
        model.fnn = FnnModel::create(channels * window_m, fnn_hidden, model.coefficient_count(), seed);
    } else {
        model.lstm = LstmModel::create(channels, lstm_hidden, model.coefficient_count(), seed);
    }
    return model;
}

Eigen::MatrixXd forward_batch(const EstimatorModel& model, std::span<const Eigen::MatrixXd* const> features) {
    if (features.empty()) throw ConfigError("empty batch");
    if (model.kind == ModelKind::fnn) return fnn_forward(model.fnn, stack_flat(features));
    return lstm_forward(model.lstm, stack_steps(features));
}

double batch_loss_and_gradients(const EstimatorModel& model, std::span<const Eigen::MatrixXd* const> features,
                                std::span<const RegressionWindow* const> windows, TensorList* grads) {
    if (features.empty() || features.size() != windows.size()) throw ConfigError("batch features/windows mismatch");
    Eigen::MatrixXd dz;
    double loss = 0.0;
    if (model.kind == ModelKind::fnn) {
        FnnTape tape;
        const Eigen::MatrixXd z = fnn_forward(model.fnn, stack_flat(features), grads ? &tape : nullptr);
        loss = batch_surrogate_loss(z, windows, grads ? &dz : nullptr);
        require_finite(loss, model.params(), model.parameter_names());
        if (grads) *grads = fnn_backward(model.fnn, tape, dz);
    } else {
        LstmTape tape;
        const Eigen::MatrixXd z = lstm_forward(model.lstm, stack_steps(features), grads ? &tape : nullptr);
        loss = batch_surrogate_loss(z, windows, grads ? &dz : nullptr);
        require_finite(loss, model.params(), model.parameter_names());
        if (grads) *grads = lstm_backward(model.lstm, tape, dz);
    }
    return loss;
}

std::pair<double, TensorList> loss_and_gradients(const FnnModel& model, const RegressionWindow& window,
                                                 const Eigen::VectorXd& x) {
    FnnTape tape;
    const Eigen::MatrixXd z = fnn_forward(model, Eigen::MatrixXd(x), &tape);
    const RegressionWindow* w = &window;
    Eigen::MatrixXd dz;
    const double loss = batch_surrogate_loss(z, std::span(&w, 1), &dz);
    require_finite(loss, model.params, model.parameter_names());
    return {loss, fnn_backward(model, tape, dz)};
}

std::pair<double, TensorList> loss_and_gradients(const LstmModel& model, const RegressionWindow& window,
                                                 const Eigen::MatrixXd& sequence) {
    std::vector<Eigen::MatrixXd> steps;
    for (Eigen::Index t = 0; t < sequence.cols(); ++t) steps.emplace_back(sequence.col(t));
    LstmTape tape;
    const Eigen::MatrixXd z = lstm_forward(model, steps, &tape);
    const RegressionWindow* w = &window;
    Eigen::MatrixXd dz;
    const double loss = batch_surrogate_loss(z, std::span(&w, 1), &dz);
    require_finite(loss, model.params, model.parameter_names());
    return {loss, lstm_backward(model, tape, dz)};
}

std::string model_to_json(const EstimatorModel& model) {
    json root;
    root["format_version"] = kFormatVersion;
    root["model_type"] = to_string(model.kind);
    root["node"] = model.node;
    root["n_buses"] = model.n_buses;
    root["window_m"] = model.window_m;
    root["input_mode"] = model.input_mode == InputMode::deltas ? "deltas" : "levels";
    root["norm_stats"] = {{"mean", to_std(model.norm.mean)}, {"std", to_std(model.norm.std)}};
    json layers = json::array();
    const auto names = model.parameter_names();
    const auto& params = model.params();
    for (std::size_t k = 0; k < params.size(); ++k) layers.push_back(tensor_json(names[k], params[k]));
    root["layers"] = std::move(layers);
    json meta;
    meta["best_epoch"] = model.meta.best_epoch;
    if (std::isfinite(model.meta.best_val_loss)) {
        meta["best_val_loss"] = model.meta.best_val_loss;
    } else {
        meta["best_val_loss"] = nullptr;
    }
    meta["epochs_run"] = model.meta.epochs_run;
    meta["seed"] = model.meta.seed;
    root["training"] = std::move(meta);
    root["checksum"] = hex(fnv1a(root.dump()));
    return root.dump(1);
}

EstimatorModel model_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("checkpoint: parse error: ") + e.what());
    }
    try {
        if (root.at("format_version").get<int>() != kFormatVersion) {
            throw ConfigError("checkpoint: unsupported format_version");
        }
        json body = root;
        body.erase("checksum");
        if (root.at("checksum").get<std::string>() != hex(fnv1a(body.dump()))) {
            throw ConfigError("checkpoint: checksum mismatch (file corrupted or edited)");
        }
        EstimatorModel model;
        model.kind = model_kind_from_string(root.at("model_type").get<std::string>());
        model.node = root.at("node").get<int>();
        model.n_buses = root.at("n_buses").get<int>();
        model.window_m = root.at("window_m").get<int>();
        const auto mode = root.at("input_mode").get<std::string>();
        if (mode != "deltas" && mode != "levels") throw ConfigError("checkpoint: unknown input_mode");
        model.input_mode = mode == "deltas" ? InputMode::deltas : InputMode::levels;
        model.norm.mean = from_std(root.at("norm_stats").at("mean").get<std::vector<double>>());
        model.norm.std = from_std(root.at("norm_stats").at("std").get<std::vector<double>>());
        if (model.norm.mean.size() != model.norm.std.size() || (model.norm.std.array() <= 0.0).any()) {
            throw ConfigError("checkpoint: invalid norm stats");
        }
        TensorList params;
        for (const auto& layer : root.at("layers")) {
            Tensor t(layer.at("shape").get<std::vector<int>>());
            auto data = layer.at("data").get<std::vector<double>>();
            if (data.size() != t.size()) throw ConfigError("checkpoint: layer data length does not match shape");
            t.data = std::move(data);
            params.push_back(std::move(t));
        }
        if (model.kind == ModelKind::fnn) {
            model.fnn = FnnModel::from_parameters(std::move(params));
            if (model.fnn.input_dim != model.norm.mean.size() * model.window_m) {
                throw ConfigError("checkpoint: fnn input size does not match window and channels");
            }
        } else {
            model.lstm = LstmModel::from_parameters(std::move(params));
            if (model.lstm.input_dim != model.norm.mean.size()) {
                throw ConfigError("checkpoint: lstm input size does not match channels");
            }
        }
        const json& meta = root.at("training");
        model.meta.best_epoch = meta.at("best_epoch").get<int>();
        model.meta.best_val_loss = meta.at("best_val_loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                                      : meta.at("best_val_loss").get<double>();
        model.meta.epochs_run = meta.at("epochs_run").get<int>();
        model.meta.seed = meta.at("seed").get<std::uint64_t>();
        return model;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("checkpoint: ") + e.what());
    }
}

void save_model(const EstimatorModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << model_to_json(model) << '\n';
    if (!out) throw IoError("write failed for checkpoint " + path.string());
}

EstimatorModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace senskit::nn
