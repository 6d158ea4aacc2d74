// senskit command-line front end.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "senskit/bench/experiment.hpp"
#include "senskit/bench/metrics.hpp"
#include "senskit/coefficients.hpp"
#include "senskit/csv.hpp"
#include "senskit/errors.hpp"
#include "senskit/estimators.hpp"
#include "senskit/grid.hpp"
#include "senskit/measurement.hpp"
#include "senskit/nn/estimator.hpp"
#include "senskit/nn/train.hpp"
#include "senskit/parallel.hpp"
#include "senskit/profiles.hpp"

namespace fs = std::filesystem;
using namespace senskit;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string config;
};

fs::path out_path(const Globals& g, const std::string& name) {
    std::error_code ec;
    fs::create_directories(g.out_dir, ec);
    if (ec) throw IoError("cannot create " + g.out_dir + ": " + ec.message());
    return fs::path(g.out_dir) / name;
}

bench::ExperimentConfig experiment_config(const Globals& g, bool from_cli_out_dir) {
    if (g.config.empty()) throw ConfigError("--config <experiment.json> is required");
    auto cfg = bench::load_experiment_config(g.config);
    if (g.seed) cfg.seeds = {*g.seed};
    if (from_cli_out_dir || cfg.output_dir.empty()) cfg.output_dir = g.out_dir;
    return cfg;
}

std::pair<int, int> parse_span(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ConfigError("span must look like BEGIN:END, got '" + s + "'");
    try {
        return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw ConfigError("bad span '" + s + "'");
    }
}

void print_metrics(const CoefficientSeries& truth, const CoefficientSeries& est) {
    const auto rm = bench::rmse_metrics(truth, est);
    const auto ne = bench::normalized_error(truth, est);
    std::printf("node %d: mean_of_rmse %.6g pu, normalized error %.4g %% (%d excluded)\n", truth.node,
                rm.mean_of_rmse, ne.percent, ne.excluded);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Voltage sensitivity coefficient estimation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--config", g.config, "JSON configuration file");

    std::string grid_path, profiles_path, meas_path, truth_path, est_path, model_path;

    // gen-profiles
    auto* gen = app.add_subcommand("gen-profiles", "Generate synthetic load and PV profiles");
    gen->add_option("--grid", grid_path, "Grid JSON")->required();
    std::string gen_name = "profiles.csv";
    gen->add_option("--output", gen_name, "File name inside --out-dir")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate noisy measurements from profiles");
    sim->add_option("--grid", grid_path, "Grid JSON")->required();
    sim->add_option("--profiles", profiles_path, "Profiles CSV")->required();
    std::string it_class = "0.5";
    sim->add_option("--it-class", it_class, "ideal, 0.2, 0.5 or 1.0")->capture_default_str();
    std::string sim_name = "measurements.csv";
    sim->add_option("--output", sim_name, "File name inside --out-dir")->capture_default_str();

    // true-coeffs
    auto* tc = app.add_subcommand("true-coeffs", "Analytical coefficients along the profiles");
    tc->add_option("--grid", grid_path, "Grid JSON")->required();
    tc->add_option("--profiles", profiles_path, "Profiles CSV")->required();
    std::vector<int> nodes = {11};
    tc->add_option("--node", nodes, "Node(s)")->capture_default_str();
    int stride = 10;
    tc->add_option("--stride", stride, "Seconds between evaluated timesteps")->capture_default_str();
    std::string span;
    tc->add_option("--span", span, "BEGIN:END timestamps (default: whole profile)");

    // estimate ls
    auto* est = app.add_subcommand("estimate", "Estimate coefficients from measurements");
    auto* est_ls = est->add_subcommand("ls", "Sliding-window least squares");
    est->require_subcommand(1);
    est_ls->add_option("--measurements", meas_path, "Measurements CSV")->required();
    int est_node = 11;
    est_ls->add_option("--node", est_node)->capture_default_str();
    int window = 60;
    est_ls->add_option("--window", window, "Window length M")->capture_default_str();
    int ls_stride = 1;
    est_ls->add_option("--stride", ls_stride, "Seconds between window end times")->capture_default_str();
    est_ls->add_option("--span", span, "BEGIN:END of window end times");

    // train
    auto* tr = app.add_subcommand("train", "Train an FNN or LSTM estimator on measurements");
    tr->add_option("--measurements", meas_path, "Measurements CSV")->required();
    std::string model_kind = "fnn";
    tr->add_option("--model", model_kind, "fnn or lstm")->capture_default_str();
    int tr_node = 11;
    tr->add_option("--node", tr_node)->capture_default_str();
    std::string train_span, val_span;
    tr->add_option("--train-span", train_span, "BEGIN:END (default: splits of --config)");
    tr->add_option("--val-span", val_span, "BEGIN:END");
    std::optional<int> epochs;
    tr->add_option("--epochs", epochs);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score estimates against analytical truth");
    ev->add_option("--truth", truth_path, "True coefficients CSV")->required();
    ev->add_option("--estimates", est_path, "Estimates CSV");
    ev->add_option("--model", model_path, "Model checkpoint (with --measurements)");
    ev->add_option("--measurements", meas_path, "Measurements CSV");

    auto* cmp = app.add_subcommand("compare", "Run the LS/FNN/LSTM comparison of an experiment config");
    auto* study = app.add_subcommand("study-length", "Error versus amount of training data");
    std::vector<double> lengths = {0.5, 1.0, 2.0, 3.0};
    study->add_option("--lengths", lengths, "Training lengths in hours")->delimiter(',')->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        const bool out_dir_given = app.count("--out-dir") > 0;
        if (gen->parsed()) {
            const auto grid = load_grid(grid_path);
            const ProfileConfig pc = g.config.empty() ? ProfileConfig{} : load_profile_config(g.config);
            const auto profiles = generate_profiles(grid, pc, g.seed.value_or(0));
            const auto path = out_path(g, gen_name);
            write_profiles_csv(profiles, path);
            std::printf("wrote %s (%d steps)\n", path.string().c_str(), profiles.steps());
        } else if (sim->parsed()) {
            const auto grid = load_grid(grid_path);
            const auto profiles = read_profiles_csv(profiles_path, grid);
            const auto series = simulate_measurements(grid, profiles, ITClass::by_name(it_class), g.seed.value_or(0));
            const auto path = out_path(g, sim_name);
            write_measurements_csv(series, path);
            std::printf("wrote %s (%d steps, %d clamped magnitudes)\n", path.string().c_str(), series.steps(),
                        series.clamped);
        } else if (tc->parsed()) {
            const auto grid = load_grid(grid_path);
            const auto profiles = read_profiles_csv(profiles_path, grid);
            auto [b, e] = span.empty() ? std::pair{0, profiles.steps()} : parse_span(span);
            if (b < 0 || e > profiles.steps() || b >= e) throw ConfigError("span outside the profile");
            if (stride < 1) throw ConfigError("--stride must be positive");
            std::vector<int> ts;
            for (int t = b; t < e; t += stride) ts.push_back(t);
            const auto truth = true_coefficient_series(grid, profiles, nodes, ts);
            for (const auto& [node, s] : truth) {
                const auto path = out_path(g, "truth_node" + std::to_string(node) + ".csv");
                write_true_coeffs_csv(s, path);
                std::printf("wrote %s\n", path.string().c_str());
            }
        } else if (est_ls->parsed()) {
            const auto series = read_measurements_csv(meas_path);
            auto [b, e] = span.empty() ? std::pair{series.t0 + window, series.t_end()} : parse_span(span);
            if (ls_stride < 1) throw ConfigError("--stride must be positive");
            const auto s = ls_sliding(series, est_node, window, ls_stride, b, e);
            const auto path = out_path(g, "est_ls_node" + std::to_string(est_node) + ".csv");
            write_estimates_csv(s, path);
            int flagged = 0;
            for (bool f : s.rank_deficient) flagged += f;
            std::printf("wrote %s (%d windows, %d rank-deficient)\n", path.string().c_str(), s.size(), flagged);
        } else if (tr->parsed()) {
            const auto series = read_measurements_csv(meas_path);
            nn::TrainConfig cfg;
            std::pair<int, int> trs, vas;
            if (!g.config.empty()) {
                const auto ec = bench::load_experiment_config(g.config);
                cfg = ec.train;
                cfg.window_m = ec.window_m;
                const int test_begin = series.t_end() - ec.splits.test_s;
                vas = {test_begin - ec.splits.val_s, test_begin};
                trs = {vas.first - ec.splits.train_s, vas.first};
            }
            if (!train_span.empty()) trs = parse_span(train_span);
            if (!val_span.empty()) vas = parse_span(val_span);
            if (trs.first >= trs.second || vas.first >= vas.second) {
                throw ConfigError("give --train-span and --val-span, or a --config with splits");
            }
            if (epochs) cfg.epochs = *epochs;
            if (g.seed) cfg.seed = *g.seed;
            const auto kind = nn::model_kind_from_string(model_kind);
            const auto stem = model_kind + "_node" + std::to_string(tr_node);
            cfg.checkpoint_path = out_path(g, "model_" + stem + ".json").string();
            const SpanView tv(series, trs.first, trs.second);
            const SpanView vv(series, vas.first, vas.second);
            const auto result = nn::train(tv, vv, tr_node, kind, cfg);
            CsvTable hist;
            hist.header = {"epoch", "train_loss", "val_loss"};
            hist.values.resize(static_cast<Eigen::Index>(result.history.size()), 3);
            for (std::size_t k = 0; k < result.history.size(); ++k) {
                const auto& h = result.history[k];
                hist.values.row(static_cast<Eigen::Index>(k)) << h.epoch, h.train_loss, h.val_loss;
            }
            write_csv(hist, out_path(g, "history_" + stem + ".csv"));
            std::printf("best epoch %d, validation loss %.6g; wrote %s\n", result.best.meta.best_epoch,
                        result.best.meta.best_val_loss, cfg.checkpoint_path.c_str());
        } else if (ev->parsed()) {
            const auto truth = read_true_coeffs_csv(truth_path);
            CoefficientSeries estimate;
            if (!est_path.empty()) {
                estimate = read_estimates_csv(est_path, truth.node);
            } else if (!model_path.empty() && !meas_path.empty()) {
                const auto model = nn::load_model(model_path);
                const auto series = read_measurements_csv(meas_path);
                if (model.node != truth.node) throw ConfigError("model and truth belong to different nodes");
                const SpanView view(series, series.t0, series.t_end());
                std::vector<CoefficientVector> out;
                for (int t : truth.t) out.push_back(model.predict(view.sample(model.node, t, model.window_m, model.input_mode)));
                estimate = to_series(model.node, out);
            } else {
                throw ConfigError("evaluate needs --estimates, or --model together with --measurements");
            }
            print_metrics(truth, estimate);
            const auto rm = bench::rmse_metrics(truth, estimate);
            const auto ne = bench::normalized_error(truth, estimate);
            CsvTable t;
            t.header = {"node", "mean_of_rmse", "normalized_error_pct", "normalized_excluded"};
            for (auto& n : numbered("rmse_", static_cast<int>(rm.per_coefficient.size()))) t.header.push_back(n);
            t.values.resize(1, static_cast<Eigen::Index>(t.header.size()));
            t.values(0, 0) = truth.node;
            t.values(0, 1) = rm.mean_of_rmse;
            t.values(0, 2) = ne.percent;
            t.values(0, 3) = ne.excluded;
            t.values.block(0, 4, 1, rm.per_coefficient.size()) = rm.per_coefficient.transpose();
            write_csv(t, out_path(g, "evaluation.csv"));
        } else if (cmp->parsed()) {
            const auto cfg = experiment_config(g, out_dir_given);
            const auto report = bench::run_comparison(cfg);
            for (int node : cfg.nodes) std::cout << bench::format_table(report, cfg.it_classes, cfg.methods, node);
            std::printf("artifacts in %s\n", cfg.output_dir.string().c_str());
        } else if (study->parsed()) {
            const auto cfg = experiment_config(g, out_dir_given);
            const auto result = bench::training_length_study(cfg, lengths);
            std::printf("%8s", "hours");
            std::vector<std::string> methods;
            for (const auto& m : cfg.methods) {
                if (m != "ls") methods.push_back(m);
            }
            for (const auto& m : methods) std::printf(" %14s", (m + " err %").c_str());
            std::printf("\n");
            for (double h : lengths) {
                std::printf("%8.3g", h);
                for (const auto& m : methods) std::printf(" %14.4f", result.mean_error(m, h));
                std::printf("\n");
            }
            std::printf("artifacts in %s\n", cfg.output_dir.string().c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kNumeric;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return kOk;
}
