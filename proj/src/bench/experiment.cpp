#include "senskit/bench/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "senskit/bench/svg.hpp"
#include "senskit/coefficients.hpp"
#include "senskit/csv.hpp"
#include "senskit/errors.hpp"
#include "senskit/measurement.hpp"
#include "senskit/parallel.hpp"
#include "senskit/rng.hpp"

namespace senskit::bench {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kMethods = {"ls", "fnn", "lstm"};

template <typename Fn>
auto staged(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(stage + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(stage + ": " + e.what());
    }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    if (path.is_relative() && !base.empty()) path = base / path;
    return path;
}

std::string input_mode_name(InputMode m) { return m == InputMode::deltas ? "deltas" : "levels"; }

InputMode input_mode_from(const std::string& s) {
    if (s == "deltas") return InputMode::deltas;
    if (s == "levels") return InputMode::levels;
    throw ConfigError("unknown input_mode '" + s + "'");
}

std::string method_label(const std::string& m) {
    std::string out = m;
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string class_tag(const std::string& name) {
    std::string out = name;
    std::replace(out.begin(), out.end(), '.', 'p');
    return out;
}

std::vector<std::string> coefficient_names(int m) {
    auto names = numbered("kp_", m);
    for (auto& q : numbered("kq_", m)) names.push_back(q);
    return names;
}

struct Bounds {
    int train_begin, val_begin, test_begin, test_end;
};

Bounds split_bounds(const ExperimentConfig& cfg, int duration) {
    const auto& s = cfg.splits;
    if (s.train_s <= 0 || s.val_s <= 0 || s.test_s <= 0) throw ConfigError("split durations must be positive");
    if (s.train_s + s.val_s + s.test_s > duration) {
        throw ConfigError("splits need " + std::to_string(s.train_s + s.val_s + s.test_s) + " s but the data has " +
                          std::to_string(duration) + " s");
    }
    Bounds b;
    b.test_end = duration;
    b.test_begin = duration - s.test_s;
    b.val_begin = b.test_begin - s.val_s;
    b.train_begin = b.val_begin - s.train_s;
    return b;
}

std::vector<int> eval_timesteps(const ExperimentConfig& cfg, int test_begin, int test_end) {
    std::vector<int> ts;
    for (int t = test_begin + cfg.window_m; t < test_end; t += cfg.eval_stride_s) ts.push_back(t);
    if (ts.empty()) throw ConfigError("test span is shorter than the window");
    return ts;
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) throw ConfigError("methods must not be empty");
    for (const auto& m : cfg.methods) {
        if (!kMethods.count(m)) throw ConfigError("unknown method '" + m + "'");
    }
    if (cfg.it_classes.empty()) throw ConfigError("it_classes must not be empty");
    for (const auto& c : cfg.it_classes) ITClass::by_name(c);
    if (cfg.nodes.empty()) throw ConfigError("nodes must not be empty");
    if (cfg.seeds.empty()) throw ConfigError("seeds must not be empty");
    if (cfg.window_m < 1) throw ConfigError("window_m must be positive");
    if (cfg.eval_stride_s < 1) throw ConfigError("eval_stride_s must be positive");
}

void check_nodes(const ExperimentConfig& cfg, const GridModel& grid) {
    for (int node : cfg.nodes) {
        if (node < 1 || node >= grid.n_buses()) {
            throw ConfigError("node " + std::to_string(node) + " is not a non-slack bus of the grid");
        }
    }
}

std::uint64_t training_seed(const ExperimentConfig& cfg, std::uint64_t noise_seed, int node, const std::string& m) {
    return hash_key(cfg.train.seed, noise_seed, static_cast<std::uint64_t>(node), m == "lstm" ? 2u : 1u);
}

/// Concatenates rows of several series of the same node.
CoefficientSeries pool(const std::vector<CoefficientSeries>& parts) {
    CoefficientSeries out;
    out.node = parts.front().node;
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.z.rows();
    out.z.resize(rows, parts.front().z.cols());
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        out.z.middleRows(r, p.z.rows()) = p.z;
        r += p.z.rows();
        out.t.insert(out.t.end(), p.t.begin(), p.t.end());
        out.rank_deficient.insert(out.rank_deficient.end(), p.rank_deficient.begin(), p.rank_deficient.end());
    }
    return out;
}

CoefficientSeries predict_series(const nn::EstimatorModel& model, const SpanView& view, int node,
                                 const std::vector<int>& ts) {
    std::vector<CoefficientVector> out;
    out.reserve(ts.size());
    for (int t : ts) out.push_back(model.predict(view.sample(node, t, model.window_m, model.input_mode)));
    return to_series(node, out);
}

CoefficientSeries ls_series(const SpanView& view, int node, int m, const std::vector<int>& ts,
                            const LsOptions& opts) {
    std::vector<CoefficientVector> out;
    out.reserve(ts.size());
    for (int t : ts) out.push_back(ls_estimate(view.window(node, t, m), opts));
    return to_series(node, out);
}

struct Fit {
    CoefficientSeries best;
    CoefficientSeries last;
    nn::TrainResult result;
    int read_min = INT_MAX;
    int read_max = INT_MIN;
};

Fit fit_nn(const ExperimentConfig& cfg, const MeasurementSeries& series, int node, const std::string& method,
           int train_begin, int val_begin, int test_begin, int test_end, const std::vector<int>& ts) {
    AccessLog fit_log;
    const SpanView train_view(series, train_begin, val_begin, &fit_log);
    const SpanView val_view(series, val_begin, test_begin, &fit_log);
    const SpanView test_view(series, test_begin, test_end);
    nn::TrainConfig tc = cfg.train;
    tc.window_m = cfg.window_m;
    tc.seed = training_seed(cfg, series.seed, node, method);
    tc.checkpoint_path.clear();
    Fit fit;
    fit.result = nn::train(train_view, val_view, node, nn::model_kind_from_string(method), tc);
    fit.read_min = fit_log.min_t();
    fit.read_max = fit_log.max_t();
    fit.best = predict_series(fit.result.best, test_view, node, ts);
    fit.last = predict_series(fit.result.last, test_view, node, ts);
    return fit;
}

struct CellJob {
    std::size_t class_index;
    std::string method;
    int node;
};

struct CellOutput {
    CellReport report;
    CoefficientSeries first_estimate;
    BoxStats pooled_box;
    std::optional<nn::EstimatorModel> first_model;
};

void fill_metrics(CellReport& r, BoxStats& pooled_box, const CoefficientSeries& truth, const CoefficientSeries& est) {
    const auto rm = rmse_metrics(truth, est);
    r.rmse = rm.per_coefficient;
    r.mean_of_rmse = rm.mean_of_rmse;
    r.normalized = normalized_error(truth, est);
    const Eigen::MatrixXd err = est.z - truth.z;
    r.boxes.clear();
    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(err.size()));
    for (Eigen::Index j = 0; j < err.cols(); ++j) {
        std::vector<double> col(err.col(j).data(), err.col(j).data() + err.rows());
        all.insert(all.end(), col.begin(), col.end());
        r.boxes.push_back(box_stats(std::move(col)));
    }
    pooled_box = box_stats(std::move(all));
}

// Small string-aware CSV helpers for reports with label columns.
std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out += ',';
        out += cells[k];
    }
    return out;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& path, std::vector<std::string>& header) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty file");
    header = split_line(line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size()) throw ConfigError(path.string() + ": ragged row");
        rows.push_back(std::move(cells));
    }
    return rows;
}

double parse_num(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("not a number: '" + s + "'");
    return v;
}

int parse_int(const std::string& s) {
    const double v = parse_num(s);
    if (v != std::floor(v)) throw ConfigError("not an integer: '" + s + "'");
    return static_cast<int>(v);
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::string cell_stem(const std::string& method, const std::string& cls, int node) {
    return method + "_" + class_tag(cls) + "_node" + std::to_string(node);
}

void write_history(const std::vector<nn::EpochRecord>& history, const fs::path& path) {
    CsvTable table;
    table.header = {"epoch", "train_loss", "val_loss"};
    table.values.resize(static_cast<Eigen::Index>(history.size()), 3);
    for (std::size_t k = 0; k < history.size(); ++k) {
        table.values.row(static_cast<Eigen::Index>(k)) << history[k].epoch, history[k].train_loss,
            history[k].val_loss;
    }
    write_csv(table, path);
}

void write_comparison_plots(const ExperimentConfig& cfg, const MetricsReport& report,
                            const std::vector<CellOutput>& outputs,
                            const std::map<int, CoefficientSeries>& truth_first, const fs::path& dir) {
    for (int node : cfg.nodes) {
        const int m = static_cast<int>(truth_first.at(node).z.cols()) / 2;
        const auto names = coefficient_names(m);
        std::vector<std::string> labels;
        for (const auto& meth : cfg.methods) labels.push_back(method_label(meth));

        BoxPlot sweep;
        sweep.title = "Estimation error vs IT class, node " + std::to_string(node);
        sweep.y_label = "K^ - K (pu)";
        sweep.series_labels = labels;

        for (const auto& cls : cfg.it_classes) {
            BoxPlot per_coef;
            per_coef.title = "Coefficient errors, IT class " + cls + ", node " + std::to_string(node);
            per_coef.y_label = "K^ - K (pu)";
            per_coef.series_labels = labels;
            for (int j = 0; j < 2 * m; ++j) per_coef.groups.push_back({names[static_cast<std::size_t>(j)], {}});
            BoxGroup sweep_group{cls, {}};

            const auto& truth = truth_first.at(node);
            LinePlot lines;
            lines.title = "Self sensitivity K^p_{" + std::to_string(node) + "," + std::to_string(node) + "}, class " + cls;
            lines.x_label = "time (h)";
            lines.y_label = "|K| (pu)";
            lines.log_y = true;
            const int self = node - 1;
            LineSeries truth_line{"true", {}, {}};
            for (int k = 0; k < truth.size(); ++k) {
                truth_line.x.push_back(truth.t[static_cast<std::size_t>(k)] / 3600.0);
                truth_line.y.push_back(std::abs(truth.z(k, self)));
            }
            lines.series.push_back(truth_line);

            for (const auto& meth : cfg.methods) {
                for (std::size_t c = 0; c < outputs.size(); ++c) {
                    const auto& r = report.cells[c];
                    if (r.method != meth || r.it_class != cls || r.node != node) continue;
                    for (int j = 0; j < 2 * m; ++j) {
                        per_coef.groups[static_cast<std::size_t>(j)].boxes.push_back(r.boxes[static_cast<std::size_t>(j)]);
                    }
                    sweep_group.boxes.push_back(outputs[c].pooled_box);
                    const auto& est = outputs[c].first_estimate;
                    LineSeries s{method_label(meth), {}, {}};
                    for (int k = 0; k < est.size(); ++k) {
                        s.x.push_back(est.t[static_cast<std::size_t>(k)] / 3600.0);
                        s.y.push_back(std::abs(est.z(k, self)));
                    }
                    lines.series.push_back(std::move(s));
                }
            }
            sweep.groups.push_back(std::move(sweep_group));
            const std::string tag = class_tag(cls) + "_node" + std::to_string(node);
            write_text_file(dir / ("boxplot_" + tag + ".svg"), render_box_plot(per_coef, 1100, 420));
            write_text_file(dir / ("estimates_" + tag + ".svg"), render_line_plot(lines));
        }
        write_text_file(dir / ("noise_sweep_node" + std::to_string(node) + ".svg"), render_box_plot(sweep));
    }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    reject_unknown(j,
                   {"grid", "profiles", "profile_generator", "it_classes", "methods", "nodes", "window_m", "splits",
                    "eval_stride_s", "seeds", "train", "ls", "output_dir"},
                   "experiment config");
    ExperimentConfig cfg;
    try {
        if (!j.contains("grid")) throw ConfigError("experiment config: 'grid' is required");
        cfg.grid_path = resolve(base_dir, j.at("grid").get<std::string>());
        if (j.contains("profiles") && j.contains("profile_generator")) {
            throw ConfigError("experiment config: give either 'profiles' or 'profile_generator', not both");
        }
        if (j.contains("profiles")) cfg.profiles_path = resolve(base_dir, j.at("profiles").get<std::string>());
        if (j.contains("profile_generator")) {
            const auto& g = j.at("profile_generator");
            reject_unknown(g, {"config", "seed"}, "profile_generator");
            if (g.contains("config")) {
                const auto& c = g.at("config");
                cfg.profile_cfg = c.is_string() ? load_profile_config(resolve(base_dir, c.get<std::string>()))
                                                : ProfileConfig::from_json(c.dump());
            }
            if (g.contains("seed")) cfg.profile_seed = g.at("seed").get<std::uint64_t>();
        }
        if (j.contains("it_classes")) cfg.it_classes = j.at("it_classes").get<std::vector<std::string>>();
        if (j.contains("methods")) cfg.methods = j.at("methods").get<std::vector<std::string>>();
        if (j.contains("nodes")) cfg.nodes = j.at("nodes").get<std::vector<int>>();
        if (j.contains("window_m")) cfg.window_m = j.at("window_m").get<int>();
        if (j.contains("splits")) {
            const auto& s = j.at("splits");
            reject_unknown(s, {"train_s", "val_s", "test_s"}, "splits");
            cfg.splits.train_s = s.value("train_s", cfg.splits.train_s);
            cfg.splits.val_s = s.value("val_s", cfg.splits.val_s);
            cfg.splits.test_s = s.value("test_s", cfg.splits.test_s);
        }
        if (j.contains("eval_stride_s")) cfg.eval_stride_s = j.at("eval_stride_s").get<int>();
        if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("train")) {
            const auto& t = j.at("train");
            reject_unknown(t,
                           {"epochs", "batch_size", "lr", "sample_stride", "seed", "fnn_hidden", "lstm_hidden",
                            "input_mode"},
                           "train");
            auto& tc = cfg.train;
            tc.epochs = t.value("epochs", tc.epochs);
            tc.batch_size = t.value("batch_size", tc.batch_size);
            tc.lr = t.value("lr", tc.lr);
            tc.sample_stride = t.value("sample_stride", tc.sample_stride);
            tc.seed = t.value("seed", tc.seed);
            if (t.contains("fnn_hidden")) tc.fnn_hidden = t.at("fnn_hidden").get<std::vector<int>>();
            tc.lstm_hidden = t.value("lstm_hidden", tc.lstm_hidden);
            if (t.contains("input_mode")) tc.input_mode = input_mode_from(t.at("input_mode").get<std::string>());
        }
        if (j.contains("ls")) {
            const auto& l = j.at("ls");
            reject_unknown(l, {"max_condition"}, "ls");
            cfg.ls.max_condition = l.value("max_condition", cfg.ls.max_condition);
        }
        if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    cfg.train.window_m = cfg.window_m;
    validate(cfg);
    return cfg;
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["grid"] = grid_path.string();
    if (!profiles_path.empty()) {
        j["profiles"] = profiles_path.string();
    } else {
        j["profile_generator"] = {{"config", json::parse(profile_cfg.to_json())}, {"seed", profile_seed}};
    }
    j["it_classes"] = it_classes;
    j["methods"] = methods;
    j["nodes"] = nodes;
    j["window_m"] = window_m;
    j["splits"] = {{"train_s", splits.train_s}, {"val_s", splits.val_s}, {"test_s", splits.test_s}};
    j["eval_stride_s"] = eval_stride_s;
    j["seeds"] = seeds;
    j["train"] = {{"epochs", train.epochs},
                  {"batch_size", train.batch_size},
                  {"lr", train.lr},
                  {"sample_stride", train.sample_stride},
                  {"seed", train.seed},
                  {"fnn_hidden", train.fnn_hidden},
                  {"lstm_hidden", train.lstm_hidden},
                  {"input_mode", input_mode_name(train.input_mode)}};
    j["ls"] = {{"max_condition", ls.max_condition}};
    if (!output_dir.empty()) j["output_dir"] = output_dir.string();
    return j.dump(2);
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return ExperimentConfig::from_json(buf.str(), path.parent_path());
}

ExperimentInputs load_inputs(const ExperimentConfig& cfg) {
    ExperimentInputs in;
    in.grid = staged("grid", [&] { return load_grid(cfg.grid_path); });
    in.profiles = staged("profiles", [&] {
        if (!cfg.profiles_path.empty()) return read_profiles_csv(cfg.profiles_path, in.grid);
        return generate_profiles(in.grid, cfg.profile_cfg, cfg.profile_seed);
    });
    return in;
}

bool CellReport::same_metrics(const CellReport& o) const {
    const auto same_nan = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return method == o.method && it_class == o.it_class && node == o.node && rmse == o.rmse &&
           mean_of_rmse == o.mean_of_rmse && normalized.percent == o.normalized.percent &&
           normalized.excluded == o.normalized.excluded && normalized.evaluated == o.normalized.evaluated &&
           boxes == o.boxes && same_nan(final_mean_of_rmse, o.final_mean_of_rmse) && best_epoch == o.best_epoch &&
           read_min == o.read_min && read_max == o.read_max;
}

const CellReport& MetricsReport::at(const std::string& method, const std::string& it_class, int node) const {
    for (const auto& c : cells) {
        if (c.method == method && c.it_class == it_class && c.node == node) return c;
    }
    throw ConfigError("report has no cell (" + method + ", " + it_class + ", node " + std::to_string(node) + ")");
}

bool MetricsReport::same_metrics(const MetricsReport& o) const {
    if (test_begin != o.test_begin || test_end != o.test_end || cells.size() != o.cells.size()) return false;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (!cells[k].same_metrics(o.cells[k])) return false;
    }
    return true;
}

MetricsReport run_comparison(const ExperimentConfig& cfg) { return run_comparison(cfg, load_inputs(cfg)); }

MetricsReport run_comparison(const ExperimentConfig& cfg, const ExperimentInputs& inputs) {
    validate(cfg);
    check_nodes(cfg, inputs.grid);
    const Bounds b = split_bounds(cfg, inputs.profiles.steps());
    const auto ts = eval_timesteps(cfg, b.test_begin, b.test_end);
    const int threads = thread_budget();

    const auto truth = staged("truth", [&] {
        return true_coefficient_series(inputs.grid, inputs.profiles, cfg.nodes, ts, threads);
    });

    // One noisy series per (class, seed); cells share them read-only.
    std::vector<std::vector<MeasurementSeries>> sims(cfg.it_classes.size());
    staged("simulate", [&] {
        for (std::size_t c = 0; c < cfg.it_classes.size(); ++c) {
            for (auto seed : cfg.seeds) {
                sims[c].push_back(simulate_measurements(inputs.grid, inputs.profiles,
                                                        ITClass::by_name(cfg.it_classes[c]), seed, threads));
            }
        }
        return 0;
    });

    std::vector<CellJob> jobs;
    for (int node : cfg.nodes) {
        for (std::size_t c = 0; c < cfg.it_classes.size(); ++c) {
            for (const auto& m : cfg.methods) jobs.push_back({c, m, node});
        }
    }

    std::vector<CellOutput> outputs(jobs.size());
    parallel_for(
        static_cast<int>(jobs.size()),
        [&](int k) {
            const auto& job = jobs[static_cast<std::size_t>(k)];
            auto& out = outputs[static_cast<std::size_t>(k)];
            auto& r = out.report;
            r.method = job.method;
            r.it_class = cfg.it_classes[job.class_index];
            r.node = job.node;
            const auto start = std::chrono::steady_clock::now();
            const std::string stage = job.method + " [" + r.it_class + ", node " + std::to_string(job.node) + "]";
            staged(stage, [&] {
                std::vector<CoefficientSeries> est_best, est_last, truths;
                for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
                    const auto& series = sims[job.class_index][s];
                    truths.push_back(truth.at(job.node));
                    if (job.method == "ls") {
                        const SpanView test_view(series, b.test_begin, b.test_end);
                        est_best.push_back(ls_series(test_view, job.node, cfg.window_m, ts, cfg.ls));
                        continue;
                    }
                    Fit fit = fit_nn(cfg, series, job.node, job.method, b.train_begin, b.val_begin, b.test_begin,
                                     b.test_end, ts);
                    r.read_min = std::min(r.read_min, fit.read_min);
                    r.read_max = std::max(r.read_max, fit.read_max);
                    if (s == 0) {
                        r.best_epoch = fit.result.best.meta.best_epoch;
                        r.history = fit.result.history;
                        out.first_model = fit.result.best;
                    }
                    est_best.push_back(std::move(fit.best));
                    est_last.push_back(std::move(fit.last));
                }
                out.first_estimate = est_best.front();
                const auto pooled_truth = pool(truths);
                fill_metrics(r, out.pooled_box, pooled_truth, pool(est_best));
                if (!est_last.empty()) r.final_mean_of_rmse = rmse_metrics(pooled_truth, pool(est_last)).mean_of_rmse;
                return 0;
            });
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        },
        threads);

    MetricsReport report;
    report.test_begin = b.test_begin;
    report.test_end = b.test_end;
    for (const auto& o : outputs) report.cells.push_back(o.report);

    if (!cfg.output_dir.empty()) {
        staged("artifacts", [&] {
            const auto& dir = cfg.output_dir;
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
            write_report(report, dir);
            write_text_file(dir / "table.txt", [&] {
                std::string all;
                for (int node : cfg.nodes) all += format_table(report, cfg.it_classes, cfg.methods, node) + "\n";
                return all;
            }());
            for (int node : cfg.nodes) {
                write_true_coeffs_csv(truth.at(node), dir / ("truth_node" + std::to_string(node) + ".csv"));
            }
            std::vector<std::string> runtime = {"method,it_class,node,seconds"};
            for (std::size_t c = 0; c < outputs.size(); ++c) {
                const auto& r = report.cells[c];
                const auto stem = cell_stem(r.method, r.it_class, r.node);
                write_estimates_csv(outputs[c].first_estimate, dir / ("est_" + stem + ".csv"));
                if (!r.history.empty()) write_history(r.history, dir / ("history_" + stem + ".csv"));
                if (outputs[c].first_model) nn::save_model(*outputs[c].first_model, dir / ("model_" + stem + ".json"));
                runtime.push_back(join({r.method, r.it_class, std::to_string(r.node), format_double(r.seconds)}));
            }
            write_lines(dir / "runtime.csv", runtime);
            write_comparison_plots(cfg, report, outputs, truth, dir);
            write_text_file(dir / "config.json", cfg.to_json() + "\n");
            return 0;
        });
    }
    return report;
}

void write_report(const MetricsReport& report, const fs::path& dir) {
    int k_max = 0;
    for (const auto& c : report.cells) k_max = std::max(k_max, static_cast<int>(c.rmse.size()));

    std::vector<std::string> header = {"method",       "it_class",     "node",       "mean_of_rmse",
                                       "normalized_error_pct", "normalized_excluded", "normalized_evaluated",
                                       "final_mean_of_rmse", "best_epoch", "read_min", "read_max",
                                       "test_begin", "test_end"};
    for (auto& n : numbered("rmse_", k_max)) header.push_back(n);
    std::vector<std::string> lines = {join(header)};
    for (const auto& c : report.cells) {
        std::vector<std::string> row = {c.method,
                                        c.it_class,
                                        std::to_string(c.node),
                                        format_double(c.mean_of_rmse),
                                        format_double(c.normalized.percent),
                                        std::to_string(c.normalized.excluded),
                                        std::to_string(c.normalized.evaluated),
                                        format_double(c.final_mean_of_rmse),
                                        std::to_string(c.best_epoch),
                                        std::to_string(c.read_min),
                                        std::to_string(c.read_max),
                                        std::to_string(report.test_begin),
                                        std::to_string(report.test_end)};
        for (int j = 0; j < k_max; ++j) row.push_back(j < c.rmse.size() ? format_double(c.rmse(j)) : "");
        lines.push_back(join(row));
    }
    write_lines(dir / "metrics.csv", lines);

    std::vector<std::string> box = {"method,it_class,node,coefficient,min,q1,median,q3,max,whisker_lo,whisker_hi"};
    for (const auto& c : report.cells) {
        if (c.boxes.size() != static_cast<std::size_t>(c.rmse.size())) {
            throw ConfigError("report: cell (" + c.method + ", " + c.it_class + ") has " +
                              std::to_string(c.boxes.size()) + " boxes for " + std::to_string(c.rmse.size()) +
                              " coefficients");
        }
        const auto names = coefficient_names(static_cast<int>(c.rmse.size()) / 2);
        for (std::size_t j = 0; j < c.boxes.size(); ++j) {
            const auto& s = c.boxes[j];
            box.push_back(join({c.method, c.it_class, std::to_string(c.node), names[j], format_double(s.min),
                                format_double(s.q1), format_double(s.median), format_double(s.q3),
                                format_double(s.max), format_double(s.whisker_lo), format_double(s.whisker_hi)}));
        }
    }
    write_lines(dir / "boxplot.csv", box);
}

MetricsReport read_report(const fs::path& dir) {
    MetricsReport report;
    std::vector<std::string> header;
    const auto rows = read_rows(dir / "metrics.csv", header);
    if (header.size() < 13 || header[0] != "method" || header[3] != "mean_of_rmse") {
        throw ConfigError("metrics.csv: unexpected header");
    }
    for (const auto& row : rows) {
        CellReport c;
        c.method = row[0];
        c.it_class = row[1];
        c.node = parse_int(row[2]);
        c.mean_of_rmse = parse_num(row[3]);
        c.normalized.percent = parse_num(row[4]);
        c.normalized.excluded = parse_int(row[5]);
        c.normalized.evaluated = parse_int(row[6]);
        c.final_mean_of_rmse = parse_num(row[7]);
        c.best_epoch = parse_int(row[8]);
        c.read_min = parse_int(row[9]);
        c.read_max = parse_int(row[10]);
        report.test_begin = parse_int(row[11]);
        report.test_end = parse_int(row[12]);
        std::vector<double> rmse;
        for (std::size_t j = 13; j < row.size() && !row[j].empty(); ++j) rmse.push_back(parse_num(row[j]));
        c.rmse = Eigen::Map<Eigen::VectorXd>(rmse.data(), static_cast<Eigen::Index>(rmse.size()));
        report.cells.push_back(std::move(c));
    }
    const auto box_rows = read_rows(dir / "boxplot.csv", header);
    for (const auto& row : box_rows) {
        if (row.size() != 11) throw ConfigError("boxplot.csv: unexpected row width");
        auto& cell = const_cast<CellReport&>(report.at(row[0], row[1], parse_int(row[2])));
        BoxStats s{parse_num(row[4]), parse_num(row[5]), parse_num(row[6]), parse_num(row[7]),
                   parse_num(row[8]), parse_num(row[9]), parse_num(row[10])};
        cell.boxes.push_back(s);
    }
    return report;
}

std::string format_table(const MetricsReport& report, const std::vector<std::string>& it_classes,
                         const std::vector<std::string>& methods, int node) {
    std::ostringstream out;
    out << "Mean of RMS error on voltage sensitivity coefficients, node " << node << " (pu)\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-10s", "IT class");
    out << buf;
    for (const auto& m : methods) {
        std::snprintf(buf, sizeof(buf), " | %10s", method_label(m).c_str());
        out << buf;
    }
    out << '\n';
    for (const auto& cls : it_classes) {
        std::snprintf(buf, sizeof(buf), "%-10s", cls.c_str());
        out << buf;
        for (const auto& m : methods) {
            std::snprintf(buf, sizeof(buf), " | %10.6f", report.at(m, cls, node).mean_of_rmse);
            out << buf;
        }
        out << '\n';
    }
    return out.str();
}

double StudyResult::mean_error(const std::string& method, double hours) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& p : points) {
        if (p.method == method && p.hours == hours) {
            sum += p.normalized_error_pct;
            ++n;
        }
    }
    if (n == 0) throw ConfigError("study has no points for " + method);
    return sum / n;
}

StudyResult training_length_study(const ExperimentConfig& cfg, const std::vector<double>& lengths_h) {
    return training_length_study(cfg, load_inputs(cfg), lengths_h);
}

StudyResult training_length_study(const ExperimentConfig& cfg, const ExperimentInputs& inputs,
                                  const std::vector<double>& lengths_h) {
    validate(cfg);
    check_nodes(cfg, inputs.grid);
    if (lengths_h.empty()) throw ConfigError("study needs at least one training length");
    std::vector<std::string> methods;
    for (const auto& m : cfg.methods) {
        if (m != "ls") methods.push_back(m);
    }
    if (methods.empty()) throw ConfigError("study needs at least one NN method");

    const int duration = inputs.profiles.steps();
    if (cfg.splits.test_s <= 0 || cfg.splits.test_s >= duration) throw ConfigError("invalid test span");
    const int test_begin = duration - cfg.splits.test_s;
    const int test_end = duration;
    for (double h : lengths_h) {
        if (!(h > 0.0)) throw ConfigError("training lengths must be positive");
        const int len = static_cast<int>(std::lround(h * 3600.0));
        if (len > test_begin) {
            throw ConfigError("insufficient data: " + format_double(h) + " h of training data plus the test span exceed " +
                              std::to_string(duration) + " s");
        }
    }
    const auto ts = eval_timesteps(cfg, test_begin, test_end);
    const int node = cfg.nodes.front();
    const int threads = thread_budget();
    const auto& cls_name = cfg.it_classes.front();

    const auto truth = staged("truth", [&] {
        return true_coefficient_series(inputs.grid, inputs.profiles, {node}, ts, threads).at(node);
    });
    std::vector<MeasurementSeries> sims;
    staged("simulate", [&] {
        for (auto seed : cfg.seeds) {
            sims.push_back(simulate_measurements(inputs.grid, inputs.profiles, ITClass::by_name(cls_name), seed,
                                                 threads));
        }
        return 0;
    });

    struct Job {
        std::size_t length;
        std::size_t seed;
        std::string method;
    };
    std::vector<Job> jobs;
    for (std::size_t l = 0; l < lengths_h.size(); ++l) {
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
            for (const auto& m : methods) jobs.push_back({l, s, m});
        }
    }
    StudyResult result;
    result.test_begin = test_begin;
    result.test_end = test_end;
    result.lengths_h = lengths_h;
    result.points.resize(jobs.size());
    parallel_for(
        static_cast<int>(jobs.size()),
        [&](int k) {
            const auto& job = jobs[static_cast<std::size_t>(k)];
            auto& p = result.points[static_cast<std::size_t>(k)];
            p.method = job.method;
            p.hours = lengths_h[job.length];
            p.seed = cfg.seeds[job.seed];
            const int len = static_cast<int>(std::lround(p.hours * 3600.0));
            p.span_begin = test_begin - len;
            p.span_end = test_begin;
            const int val_begin = p.span_begin + len / 2;
            staged("study " + job.method + " [" + format_double(p.hours) + " h]", [&] {
                Fit fit = fit_nn(cfg, sims[job.seed], node, job.method, p.span_begin, val_begin, test_begin,
                                 test_end, ts);
                p.read_min = fit.read_min;
                p.read_max = fit.read_max;
                p.normalized_error_pct = normalized_error(truth, fit.best).percent;
                p.mean_of_rmse = rmse_metrics(truth, fit.best).mean_of_rmse;
                p.final_mean_of_rmse = rmse_metrics(truth, fit.last).mean_of_rmse;
                return 0;
            });
        },
        threads);

    if (!cfg.output_dir.empty()) {
        staged("artifacts", [&] {
            const auto& dir = cfg.output_dir;
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
            CsvTable curve;
            curve.header = {"hours"};
            for (const auto& m : methods) curve.header.push_back(m + "_normalized_error_pct");
            curve.values.resize(static_cast<Eigen::Index>(lengths_h.size()), curve.header.size());
            for (std::size_t l = 0; l < lengths_h.size(); ++l) {
                curve.values(static_cast<Eigen::Index>(l), 0) = lengths_h[l];
                for (std::size_t m = 0; m < methods.size(); ++m) {
                    curve.values(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(m + 1)) =
                        result.mean_error(methods[m], lengths_h[l]);
                }
            }
            write_csv(curve, dir / "study_length.csv");

            std::vector<std::string> detail = {
                "method,hours,seed,normalized_error_pct,mean_of_rmse,final_mean_of_rmse,span_begin,span_end,read_min,"
                "read_max"};
            for (const auto& p : result.points) {
                detail.push_back(join({p.method, format_double(p.hours), std::to_string(p.seed),
                                       format_double(p.normalized_error_pct), format_double(p.mean_of_rmse),
                                       format_double(p.final_mean_of_rmse), std::to_string(p.span_begin),
                                       std::to_string(p.span_end), std::to_string(p.read_min),
                                       std::to_string(p.read_max)}));
            }
            write_lines(dir / "study_length_detail.csv", detail);

            LinePlot plot;
            plot.title = "Estimation error vs training data length, node " + std::to_string(node) + ", class " +
                         cls_name;
            plot.x_label = "training data (h)";
            plot.y_label = "normalized error (%)";
            for (const auto& m : methods) {
                LineSeries s{method_label(m), {}, {}};
                for (double h : lengths_h) {
                    s.x.push_back(h);
                    s.y.push_back(result.mean_error(m, h));
                }
                plot.series.push_back(std::move(s));
            }
            write_text_file(dir / "study_length.svg", render_line_plot(plot));
            return 0;
        });
    }
    return result;
}

}  // namespace senskit::bench
