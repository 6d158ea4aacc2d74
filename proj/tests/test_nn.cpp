#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "senskit/errors.hpp"
#include "senskit/nn/adam.hpp"
#include "senskit/nn/estimator.hpp"
#include "senskit/nn/fnn.hpp"
#include "senskit/nn/loss.hpp"
#include "senskit/nn/lstm.hpp"
#include "senskit/nn/train.hpp"

using namespace senskit;
using namespace senskit::nn;
using namespace testutil;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    return Eigen::VectorXd::NullaryExpr(n, [&] { return d(rng); });
}

RegressionWindow random_window(std::mt19937_64& rng, int rows, int cols, double scale = 1.0) {
    RegressionWindow w;
    std::normal_distribution<double> d(0.0, scale);
    w.a = Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return d(rng); });
    w.y = Eigen::VectorXd::NullaryExpr(rows, [&] { return d(rng); });
    return w;
}

double at(const Tensor& t, int r, int c) { return t.data[static_cast<std::size_t>(r * t.cols() + c)]; }

// Loop-by-loop forward pass, written independently of the Eigen version.
std::vector<double> naive_fnn(const FnnModel& m, std::vector<double> x) {
    for (int l = 0; l < m.layer_count(); ++l) {
        const Tensor& w = m.params[static_cast<std::size_t>(2 * l)];
        const Tensor& b = m.params[static_cast<std::size_t>(2 * l + 1)];
        std::vector<double> out(static_cast<std::size_t>(w.rows()));
        for (int r = 0; r < w.rows(); ++r) {
            double s = b.data[static_cast<std::size_t>(r)];
            for (int c = 0; c < w.cols(); ++c) s += at(w, r, c) * x[static_cast<std::size_t>(c)];
            out[static_cast<std::size_t>(r)] = (l + 1 < m.layer_count()) ? std::max(0.0, s) : s;
        }
        x = std::move(out);
    }
    return x;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

std::vector<double> naive_lstm(const LstmModel& m, const Eigen::MatrixXd& seq) {
    const int H = m.hidden_dim;
    const auto& wx = m.params[0];
    const auto& wh = m.params[1];
    const auto& b = m.params[2];
    std::vector<double> h(static_cast<std::size_t>(H), 0.0), c(static_cast<std::size_t>(H), 0.0);
    for (int t = 0; t < seq.cols(); ++t) {
        std::vector<double> pre(static_cast<std::size_t>(4 * H));
        for (int r = 0; r < 4 * H; ++r) {
            double s = b.data[static_cast<std::size_t>(r)];
            for (int k = 0; k < m.input_dim; ++k) s += at(wx, r, k) * seq(k, t);
            for (int k = 0; k < H; ++k) s += at(wh, r, k) * h[static_cast<std::size_t>(k)];
            pre[static_cast<std::size_t>(r)] = s;
        }
        for (int k = 0; k < H; ++k) {
            const double ig = sigmoid(pre[static_cast<std::size_t>(k)]);
            const double fg = sigmoid(pre[static_cast<std::size_t>(H + k)]);
            const double gg = std::tanh(pre[static_cast<std::size_t>(2 * H + k)]);
            const double og = sigmoid(pre[static_cast<std::size_t>(3 * H + k)]);
            c[static_cast<std::size_t>(k)] = fg * c[static_cast<std::size_t>(k)] + ig * gg;
            h[static_cast<std::size_t>(k)] = og * std::tanh(c[static_cast<std::size_t>(k)]);
        }
    }
    const auto& w = m.params[3];
    const auto& bh = m.params[4];
    std::vector<double> out(static_cast<std::size_t>(m.output_dim));
    for (int r = 0; r < m.output_dim; ++r) {
        double s = bh.data[static_cast<std::size_t>(r)];
        for (int k = 0; k < H; ++k) s += at(w, r, k) * h[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(r)] = s;
    }
    return out;
}

template <typename Model, typename Input>
void check_gradients(Model model, const RegressionWindow& w, const Input& x) {
    const auto [loss, grads] = loss_and_gradients(model, w, x);
    const double h = 1e-5;
    for (std::size_t p = 0; p < model.params.size(); ++p) {
        for (std::size_t k = 0; k < model.params[p].size(); ++k) {
            const double orig = model.params[p].data[k];
            model.params[p].data[k] = orig + h;
            const double up = loss_and_gradients(model, w, x).first;
            model.params[p].data[k] = orig - h;
            const double down = loss_and_gradients(model, w, x).first;
            model.params[p].data[k] = orig;
            const double fd = (up - down) / (2.0 * h);
            CAPTURE(p);
            CAPTURE(k);
            CHECK(relative_gap(fd, grads[p].data[k], 1e-7) <= 1e-4);
        }
    }
    (void)loss;
}

struct Teacher {
    MeasurementSeries series;
    Eigen::VectorXd z;
};

Teacher teacher(int n_pq, int node, int steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Teacher t;
    t.z = random_vector(rng, 2 * n_pq, 0.05);
    t.series = linear_series(t.z, n_pq, node, steps, seed + 1, 0.1);
    return t;
}

}  // namespace

TEST_CASE("zero FNN outputs zero") {
    auto m = FnnModel::create(6, {5, 3}, 4, 1);
    for (auto& p : m.params) p.set_zero();
    std::mt19937_64 rng(1);
    CHECK(fnn_forward(m, Eigen::VectorXd(random_vector(rng, 6))).isZero(0.0));
}

TEST_CASE("hand-traceable FNN") {
    // 1 -> 1 -> 1 with w1 = 2, b1 = -1, w2 = 3, b2 = 0.5.
    auto m = FnnModel::create(1, {1}, 1, 0);
    m.params[0].data = {2.0};
    m.params[1].data = {-1.0};
    m.params[2].data = {3.0};
    m.params[3].data = {0.5};
    CHECK(fnn_forward(m, Eigen::VectorXd(Eigen::VectorXd::Constant(1, 2.0)))(0) == 3.0 * 3.0 + 0.5);
    CHECK(fnn_forward(m, Eigen::VectorXd(Eigen::VectorXd::Constant(1, 0.25)))(0) == 0.5);  // ReLU clips 2*0.25-1
}

TEST_CASE("FNN matches the naive oracle and batches consistently") {
    std::mt19937_64 rng(2);
    const auto m = FnnModel::create(10, {7, 5}, 4, 3);
    Eigen::MatrixXd batch(10, 6);
    for (int b = 0; b < 6; ++b) batch.col(b) = random_vector(rng, 10);
    const Eigen::MatrixXd out = fnn_forward(m, batch);
    for (int b = 0; b < 6; ++b) {
        const Eigen::VectorXd x = batch.col(b);
        const auto ref = naive_fnn(m, std::vector<double>(x.data(), x.data() + x.size()));
        for (int r = 0; r < 4; ++r) CHECK(std::abs(out(r, b) - ref[static_cast<std::size_t>(r)]) < 1e-12);
        CHECK((fnn_forward(m, x) - out.col(b)).norm() < 1e-14);
    }
}

TEST_CASE("FNN initialization is bounded and seeded") {
    const auto a = FnnModel::create(16, {8}, 4, 5);
    const auto b = FnnModel::create(16, {8}, 4, 5);
    const auto c = FnnModel::create(16, {8}, 4, 6);
    CHECK(a.params == b.params);
    CHECK_FALSE(a.params == c.params);
    CHECK(a.params[0].vector().cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(16.0));
    CHECK(a.params[2].vector().cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(a.parameter_names() == std::vector<std::string>{"w1", "b1", "w2", "b2"});
}

TEST_CASE("zero LSTM: half-open gates, empty cell, head bias out") {
    auto m = LstmModel::create(3, 4, 2, 1);
    for (auto& p : m.params) p.set_zero();
    m.params[4].data = {0.7, -0.2};
    std::mt19937_64 rng(3);
    std::vector<Eigen::MatrixXd> steps;
    for (int t = 0; t < 5; ++t) steps.emplace_back(random_vector(rng, 3));
    LstmTape tape;
    const Eigen::MatrixXd z = lstm_forward(m, steps, &tape);
    CHECK(z(0, 0) == 0.7);
    CHECK(z(1, 0) == -0.2);
    for (const auto& g : tape.gates) {
        CHECK(g.topRows(8).isApproxToConstant(0.5));
        CHECK(g.middleRows(8, 4).isZero(0.0));
        CHECK(g.bottomRows(4).isApproxToConstant(0.5));
    }
    for (const auto& c : tape.c) CHECK(c.isZero(0.0));
}

TEST_CASE("LSTM state carries over between steps") {
    const auto m = LstmModel::create(3, 6, 2, 4);
    Eigen::MatrixXd one(3, 1), two = Eigen::MatrixXd::Zero(3, 2);
    one << 0.5, -1.0, 2.0;
    two.col(0) = one.col(0);
    CHECK((lstm_forward(m, one) - lstm_forward(m, two)).norm() > 1e-6);
}

TEST_CASE("LSTM matches the naive recurrence") {
    std::mt19937_64 rng(5);
    const auto m = LstmModel::create(5, 7, 3, 6);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd seq(5, 6);
        for (int t = 0; t < 6; ++t) seq.col(t) = random_vector(rng, 5);
        const Eigen::VectorXd out = lstm_forward(m, seq);
        const auto ref = naive_lstm(m, seq);
        for (int r = 0; r < 3; ++r) CHECK(std::abs(out(r) - ref[static_cast<std::size_t>(r)]) < 1e-12);
    }
}

TEST_CASE("batch surrogate loss and its gradient") {
    std::mt19937_64 rng(6);
    const auto w1 = random_window(rng, 5, 3);
    const auto w2 = random_window(rng, 5, 3);
    const RegressionWindow* ws[] = {&w1, &w2};
    Eigen::MatrixXd z(3, 2);
    z.col(0) = random_vector(rng, 3);
    z.col(1) = random_vector(rng, 3);
    Eigen::MatrixXd dz;
    const double loss = batch_surrogate_loss(z, ws, &dz);
    const Eigen::VectorXd z0 = z.col(0), z1 = z.col(1);
    CHECK(loss == doctest::Approx(0.5 * (surrogate_loss(w1, z0) + surrogate_loss(w2, z1))));
    const Eigen::VectorXd expect0 = -(w1.a.transpose() * (w1.y - w1.a * z0));
    CHECK((dz.col(0) - expect0).norm() < 1e-12);
}

TEST_CASE("FNN gradients match central differences") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        const auto m = FnnModel::create(14, {8, 4}, 6, 100 + trial);
        check_gradients(m, random_window(rng, 2, 6), Eigen::VectorXd(random_vector(rng, 14)));
    }
}

TEST_CASE("LSTM gradients match central differences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 3; ++trial) {
        const auto m = LstmModel::create(5, 8, 4, 200 + trial);
        Eigen::MatrixXd seq(5, 4);
        for (int t = 0; t < 4; ++t) seq.col(t) = random_vector(rng, 5);
        check_gradients(m, random_window(rng, 4, 4), seq);
    }
}

TEST_CASE("zero residual gives zero gradient") {
    std::mt19937_64 rng(9);
    const auto m = FnnModel::create(6, {5}, 4, 9);
    const Eigen::VectorXd x = random_vector(rng, 6);
    auto w = random_window(rng, 3, 4);
    w.y = w.a * fnn_forward(m, x);
    const auto [loss, grads] = loss_and_gradients(m, w, x);
    CHECK(loss < 1e-28);
    CHECK(std::sqrt(squared_norm(grads)) <= 1e-10);

    const auto lm = LstmModel::create(3, 4, 4, 10);
    Eigen::MatrixXd seq(3, 3);
    for (int t = 0; t < 3; ++t) seq.col(t) = random_vector(rng, 3);
    w.y = w.a * lstm_forward(lm, seq);
    CHECK(std::sqrt(squared_norm(loss_and_gradients(lm, w, seq).second)) <= 1e-10);
}

TEST_CASE("scaling y and A by c scales loss and gradients by c^2") {
    std::mt19937_64 rng(10);
    const auto m = FnnModel::create(6, {5}, 4, 11);
    const Eigen::VectorXd x = random_vector(rng, 6);
    const auto w = random_window(rng, 3, 4);
    auto ws = w;
    const double c = 3.0;
    ws.a *= c;
    ws.y *= c;
    const auto [l1, g1] = loss_and_gradients(m, w, x);
    const auto [l2, g2] = loss_and_gradients(m, ws, x);
    CHECK(l2 == doctest::Approx(c * c * l1).epsilon(1e-12));
    for (std::size_t p = 0; p < g1.size(); ++p) {
        CHECK((g2[p].vector() - c * c * g1[p].vector()).norm() <= 1e-12 * (1.0 + g2[p].vector().norm()));
    }
}

TEST_CASE("Adam: zero gradient leaves parameters and counts the step") {
    TensorList params = {Tensor({2})};
    params[0].data = {1.0, -2.0};
    auto state = AdamState::for_parameters(params);
    const TensorList zero = zeros_like(params);
    adam_step(state, params, zero);
    CHECK(params[0].data == std::vector<double>{1.0, -2.0});
    CHECK(state.step == 1);
}

TEST_CASE("Adam: two hand-computed steps") {
    TensorList params = {Tensor({1})};
    params[0].data = {1.0};
    auto state = AdamState::for_parameters(params, 0.1);
    TensorList g = {Tensor({1})};

    g[0].data = {0.5};
    adam_step(state, params, g);
    // m1 = 0.05, v1 = 0.00025, m^ = 0.5, v^ = 0.25
    const double theta1 = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(std::abs(params[0].data[0] - theta1) < 1e-12);

    g[0].data = {-0.2};
    adam_step(state, params, g);
    // m2 = 0.025, v2 = 0.00028975
    const double mhat = 0.025 / (1.0 - 0.81);
    const double vhat = 0.00028975 / (1.0 - 0.998001);
    const double theta2 = theta1 - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(std::abs(params[0].data[0] - theta2) < 1e-12);
}

TEST_CASE("Adam: constant gradient moves by lr per step") {
    TensorList params = {Tensor({2})};
    auto state = AdamState::for_parameters(params, 1e-3);
    TensorList g = {Tensor({2})};
    g[0].data = {3.0, -0.01};
    double prev0 = 0.0, prev1 = 0.0;
    for (int k = 0; k < 2000; ++k) {
        prev0 = params[0].data[0];
        prev1 = params[0].data[1];
        adam_step(state, params, g);
    }
    CHECK(prev0 - params[0].data[0] == doctest::Approx(1e-3).epsilon(1e-3));
    CHECK(params[0].data[1] - prev1 == doctest::Approx(1e-3).epsilon(1e-3));
}

TEST_CASE("norm stats are per channel and actually applied") {
    std::vector<Eigen::MatrixXd> feats = {Eigen::MatrixXd(2, 2), Eigen::MatrixXd(2, 2)};
    feats[0] << 1.0, 3.0, 5.0, 5.0;
    feats[1] << 5.0, 7.0, 5.0, 5.0;
    const auto s = compute_norm_stats(feats);
    CHECK(s.mean(0) == 4.0);
    CHECK(s.std(0) == doctest::Approx(std::sqrt(5.0)));
    CHECK(s.mean(1) == 5.0);
    CHECK(s.std(1) == 1.0);  // constant channel

    const auto t = teacher(2, 1, 200, 3);
    const SpanView view(t.series, 0, 200);
    const auto sample = view.sample(1, 150, 8, InputMode::deltas);
    NormStats identity{Eigen::VectorXd::Zero(5), Eigen::VectorXd::Ones(5)};
    NormStats shifted{Eigen::VectorXd::Constant(5, 0.3), Eigen::VectorXd::Constant(5, 2.0)};
    for (auto kind : {ModelKind::fnn, ModelKind::lstm}) {
        const auto a = make_estimator(kind, 1, 3, 8, InputMode::deltas, identity, {6}, 5, 1);
        auto b = a;
        b.norm = shifted;
        const auto za = a.predict(sample).z;
        const auto zb = b.predict(sample).z;
        CHECK(za.size() == 4);
        CHECK(zb.size() == za.size());
        CHECK((za - zb).norm() > 1e-9);
    }
}

TEST_CASE("linear teacher is learned") {
    const auto t = teacher(2, 1, 4000, 11);
    const SpanView train_view(t.series, 0, 3000);
    const SpanView val_view(t.series, 3000, 4000);
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.window_m = 8;
    cfg.sample_stride = 1;
    cfg.fnn_hidden = {16};
    cfg.seed = 3;
    const auto result = train(train_view, val_view, 1, ModelKind::fnn, cfg);
    CHECK(result.best.meta.best_val_loss <= 1e-6);
    const auto probe = val_view.sample(1, 3900, 8, InputMode::deltas);
    CHECK((result.best.predict(probe).z - t.z).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("training is deterministic and keeps the best validation epoch") {
    const auto t = teacher(2, 2, 1500, 12);
    auto noisy = t.series;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 2e-3);
    for (int k = 0; k < noisy.steps(); ++k) noisy.v_mag(k, 1) += n(rng);
    const SpanView train_view(noisy, 0, 1000);
    const SpanView val_view(noisy, 1000, 1500);
    const auto dir = scratch_dir("train");
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.window_m = 6;
    cfg.sample_stride = 2;
    cfg.lstm_hidden = 6;
    cfg.seed = 5;
    for (auto kind : {ModelKind::fnn, ModelKind::lstm}) {
        CAPTURE(to_string(kind));
        cfg.checkpoint_path = (dir / (to_string(kind) + ".json")).string();
        const auto a = train(train_view, val_view, 2, kind, cfg);
        const auto b = train(train_view, val_view, 2, kind, cfg);
        REQUIRE(a.history.size() == 15);
        for (std::size_t k = 0; k < a.history.size(); ++k) {
            CHECK(a.history[k].train_loss == b.history[k].train_loss);
            CHECK(a.history[k].val_loss == b.history[k].val_loss);
        }
        CHECK(a.best.params() == b.best.params());
        CHECK(a.last.params() == b.last.params());

        double min_val = a.history.front().val_loss;
        int min_epoch = 1;
        for (const auto& h : a.history) {
            if (h.val_loss < min_val) {
                min_val = h.val_loss;
                min_epoch = h.epoch;
            }
        }
        CHECK(a.best.meta.best_val_loss == min_val);
        CHECK(a.best.meta.best_epoch == min_epoch);
        const auto val_data = build_dataset(val_view, 2, cfg.window_m, cfg.sample_stride, cfg.input_mode);
        CHECK(mean_loss(a.best, val_data) == min_val);

        // The checkpoint on disk reproduces the recorded validation loss.
        const auto loaded = load_model(cfg.checkpoint_path);
        CHECK(mean_loss(loaded, val_data) == min_val);
        CHECK(loaded.meta.best_epoch == min_epoch);
    }
}

TEST_CASE("training loss trends down") {
    const auto t = teacher(3, 1, 3000, 13);
    const SpanView train_view(t.series, 0, 2000);
    const SpanView val_view(t.series, 2000, 3000);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.window_m = 10;
    cfg.sample_stride = 3;
    cfg.fnn_hidden = {32, 16};
    cfg.seed = 8;
    const auto r = train(train_view, val_view, 1, ModelKind::fnn, cfg);
    std::vector<double> avg;
    for (std::size_t k = 4; k < r.history.size(); ++k) {
        double s = 0.0;
        for (std::size_t j = k - 4; j <= k; ++j) s += r.history[j].train_loss;
        avg.push_back(s / 5.0);
    }
    for (std::size_t k = 1; k < avg.size(); ++k) CHECK(avg[k] < avg[k - 1]);
}

TEST_CASE("training rejects spans that are too short") {
    const auto t = teacher(2, 1, 100, 14);
    TrainConfig cfg;
    cfg.window_m = 60;
    CHECK_THROWS_AS(train(SpanView(t.series, 0, 50), SpanView(t.series, 50, 100), 1, ModelKind::fnn, cfg),
                    ConfigError);
}

TEST_CASE("checkpoint round trip and corruption") {
    std::mt19937_64 rng(15);
    const NormStats norm{random_vector(rng, 5), (random_vector(rng, 5).array().abs() + 0.5).matrix()};
    const auto dir = scratch_dir("ckpt");
    for (auto kind : {ModelKind::fnn, ModelKind::lstm}) {
        auto model = make_estimator(kind, 2, 3, 7, InputMode::deltas, norm, {9, 4}, 6, 21);
        model.meta.best_epoch = 4;
        model.meta.best_val_loss = 0.125;
        const auto path = dir / (to_string(kind) + ".json");
        save_model(model, path);
        const auto back = load_model(path);
        CHECK(back.kind == kind);
        CHECK(back.params() == model.params());
        CHECK(back.norm == model.norm);
        CHECK(back.meta.best_epoch == 4);
        for (int k = 0; k < 100; ++k) {
            Eigen::MatrixXd f(5, 7);
            for (int c = 0; c < 7; ++c) f.col(c) = random_vector(rng, 5);
            const Eigen::MatrixXd* ptr = &f;
            CHECK(forward_batch(model, std::span(&ptr, 1)) == forward_batch(back, std::span(&ptr, 1)));
        }

        std::ifstream in(path);
        std::stringstream buf;
        buf << in.rdbuf();
        std::string text = buf.str();
        const auto pos = text.find("\"data\"");
        REQUIRE(pos != std::string::npos);
        const auto digit = text.find_first_of("123456789", pos);
        text[digit] = text[digit] == '9' ? '8' : static_cast<char>(text[digit] + 1);
        CHECK_THROWS_AS(model_from_json(text), ConfigError);

        std::string versioned = buf.str();
        versioned.replace(versioned.find("\"format_version\": 1"), 19, "\"format_version\": 7");
        CHECK_THROWS_AS(model_from_json(versioned), ConfigError);
        CHECK_THROWS_AS(model_from_json("{\"format_version\": 1"), ConfigError);
    }
    CHECK_THROWS_AS(load_model(dir / "absent.json"), IoError);
}
