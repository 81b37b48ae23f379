#include "bc/nnet/model.hpp"
#include "bc/errors.hpp"
#include "bc/rng.hpp"

#include "cli.hpp"
#include "synth.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

using namespace bc::nnet;
using bc::Rng;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TrainConfig tiny_config(CellKind kind, int hidden, int lookback = 5) {
    TrainConfig cfg;
    cfg.cell_kind = kind;
    cfg.hidden_dim = hidden;
    cfg.lookback = lookback;
    return cfg;
}

Window random_window(int lookback, int dim, Rng& rng) {
    Window w;
    for (int t = 0; t < lookback; ++t) {
        Vec x(dim);
        for (int i = 0; i < dim; ++i) x[i] = rng.uniform(-1.0, 1.0);
        w.push_back(x);
    }
    return w;
}

} // namespace

TEST_CASE("make allocates the declared shapes") {
    auto m = RecurrentModel::make(tiny_config(CellKind::lstm, 6), 34, 3);
    CHECK(m.params.W.size() == 4);
    CHECK(m.params.W[0].rows() == 6);
    CHECK(m.params.W[0].cols() == 34);
    CHECK(m.params.U[2].rows() == 6);
    CHECK(m.params.U[2].cols() == 6);
    CHECK(m.params.b[3].rows() == 6);
    CHECK(m.params.dense_W.rows() == 3);
    CHECK(m.params.dense_W.cols() == 6);
    CHECK(m.params.all().size() == 4 * 3 + 2);
    auto g = RecurrentModel::make(tiny_config(CellKind::gru, 6), 34, 1);
    CHECK(g.params.W.size() == 3);
}

TEST_CASE("weight init is bounded by the hidden-dim scale and leaves biases zero") {
    auto m = RecurrentModel::make(tiny_config(CellKind::gru, 16), 8, 1);
    Rng rng(5);
    m.init_weights(rng);
    double bound = 1.0 / 4.0;
    for (const auto& w : m.params.W)
        for (Eigen::Index i = 0; i < w.size(); ++i) CHECK(std::abs(w(i)) <= bound);
    for (const auto& b : m.params.b) CHECK(b.isZero());
    CHECK_FALSE(m.params.dense_W.isZero());

    auto m2 = RecurrentModel::make(tiny_config(CellKind::gru, 16), 8, 1);
    Rng rng2(5);
    m2.init_weights(rng2);
    CHECK(m.params.W[0] == m2.params.W[0]);
}

TEST_CASE("an all-zero gru stays at zero state") {
    auto m = RecurrentModel::make(tiny_config(CellKind::gru, 4), 2, 1);
    Rng rng(1);
    Window w = random_window(5, 2, rng);
    Vec out = forward_window(m, w, false, rng);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(0.5)); // sigmoid of a zero dense layer
}

TEST_CASE("scalar gru matches the closed form") {
    auto m = RecurrentModel::make(tiny_config(CellKind::gru, 1), 1, 1);
    m.output_activation = Activation::relu; // identity for positive outputs
    namespace g = gru_gate;
    double Wz = 0.4, bz = -0.1, Wr = 0.3, br = 0.2, Wh = 0.7, bh = 0.1;
    double Uz = 0.5, Ur = -0.6, Uh = 0.8;
    m.params.W[g::z](0, 0) = Wz;
    m.params.b[g::z](0, 0) = bz;
    m.params.U[g::z](0, 0) = Uz;
    m.params.W[g::r](0, 0) = Wr;
    m.params.b[g::r](0, 0) = br;
    m.params.U[g::r](0, 0) = Ur;
    m.params.W[g::h](0, 0) = Wh;
    m.params.b[g::h](0, 0) = bh;
    m.params.U[g::h](0, 0) = Uh;
    m.params.dense_W(0, 0) = 1.0;

    double x1 = 0.9, x2 = -0.4;
    // step 1 from zero state: h1 = z1 * n1
    double z1 = sig(Wz * x1 + bz);
    double n1 = std::tanh(Wh * x1 + bh);
    double h1 = z1 * n1;
    // step 2: candidate sees U applied to r * h_prev
    double z2 = sig(Wz * x2 + Uz * h1 + bz);
    double r2 = sig(Wr * x2 + Ur * h1 + br);
    double n2 = std::tanh(Wh * x2 + Uh * (r2 * h1) + bh);
    double h2 = (1.0 - z2) * h1 + z2 * n2;

    m.lookback = 2;
    Window w = {Vec::Constant(1, x1), Vec::Constant(1, x2)};
    Rng rng(0);
    Vec out = forward_window(m, w, false, rng);
    CHECK(out[0] == doctest::Approx(std::max(0.0, h2)).epsilon(1e-12));
}

TEST_CASE("scalar lstm matches the closed form") {
    auto m = RecurrentModel::make(tiny_config(CellKind::lstm, 1), 1, 1);
    m.output_activation = Activation::relu;
    namespace g = lstm_gate;
    double Wi = 0.4, Wf = -0.2, Wo = 0.6, Wc = 0.9;
    double Ui = 0.3, Uf = 0.5, Uo = -0.4, Uc = 0.2;
    double bi = 0.05, bf = 0.1, bo = -0.05, bcv = 0.0;
    m.params.W[g::i](0, 0) = Wi;
    m.params.U[g::i](0, 0) = Ui;
    m.params.b[g::i](0, 0) = bi;
    m.params.W[g::f](0, 0) = Wf;
    m.params.U[g::f](0, 0) = Uf;
    m.params.b[g::f](0, 0) = bf;
    m.params.W[g::o](0, 0) = Wo;
    m.params.U[g::o](0, 0) = Uo;
    m.params.b[g::o](0, 0) = bo;
    m.params.W[g::c](0, 0) = Wc;
    m.params.U[g::c](0, 0) = Uc;
    m.params.b[g::c](0, 0) = bcv;
    m.params.dense_W(0, 0) = 1.0;

    double x1 = 0.8, x2 = -0.3, h = 0.0, c = 0.0;
    for (double x : {x1, x2}) {
        double i = sig(Wi * x + Ui * h + bi);
        double f = sig(Wf * x + Uf * h + bf);
        double o = sig(Wo * x + Uo * h + bo);
        double gg = std::tanh(Wc * x + Uc * h + bcv);
        c = f * c + i * gg;
        h = o * std::tanh(c);
    }

    m.lookback = 2;
    Window w = {Vec::Constant(1, x1), Vec::Constant(1, x2)};
    Rng rng(0);
    Vec out = forward_window(m, w, false, rng);
    CHECK(out[0] == doctest::Approx(std::max(0.0, h)).epsilon(1e-12));
}

TEST_CASE("activations behave") {
    Vec pre(3);
    pre << -1.0, 0.0, 2.0;
    Vec s = apply_activation(Activation::sigmoid, pre);
    CHECK(s[0] == doctest::Approx(sig(-1.0)));
    CHECK(s[1] == doctest::Approx(0.5));
    Vec r = apply_activation(Activation::relu, pre);
    CHECK(r[0] == 0.0);
    CHECK(r[2] == doctest::Approx(2.0));
    Vec sm = apply_activation(Activation::softmax, pre);
    CHECK(sm.sum() == doctest::Approx(1.0));
    CHECK(sm[2] > sm[1]);
    CHECK(sm[1] > sm[0]);
    // softmax is shift invariant
    Vec sm2 = apply_activation(Activation::softmax, (pre.array() + 100.0).matrix());
    CHECK((sm - sm2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("activation backward matches finite differences") {
    Rng rng(77);
    for (Activation act : {Activation::sigmoid, Activation::relu, Activation::softmax}) {
        Vec pre(4), dout(4);
        for (int i = 0; i < 4; ++i) {
            pre[i] = rng.uniform(-2.0, 2.0);
            dout[i] = rng.uniform(-1.0, 1.0);
        }
        Vec out = apply_activation(act, pre);
        Vec dpre = activation_backward(act, out, dout);
        const double eps = 1e-6;
        for (int j = 0; j < 4; ++j) {
            Vec hi = pre, lo = pre;
            hi[j] += eps;
            lo[j] -= eps;
            double fd =
                (dout.dot(apply_activation(act, hi)) - dout.dot(apply_activation(act, lo))) /
                (2 * eps);
            CHECK(dpre[j] == doctest::Approx(fd).epsilon(1e-4));
        }
    }
}

TEST_CASE("backpropagation matches finite differences on every parameter") {
    for (CellKind kind : {CellKind::gru, CellKind::lstm}) {
        auto cfg = tiny_config(kind, 3, 5);
        auto m = RecurrentModel::make(cfg, 2, 2);
        m.output_activation = Activation::sigmoid;
        Rng rng(13);
        m.init_weights(rng);
        Window w = random_window(5, 2, rng);
        Vec dout(2);
        dout << 0.7, -0.4;

        ForwardCache cache;
        Rng fwd_rng(0);
        forward_window_cached(m, w, false, fwd_rng, cache);
        Params grads = Params::zeros(kind, 2, 3, 2);
        backward_window(m, w, cache, dout, grads);

        auto params = m.params.all();
        auto grad_mats = grads.all();
        const double eps = 1e-6;
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Mat& p = *params[pi];
            for (Eigen::Index k = 0; k < p.size(); ++k) {
                double orig = p(k);
                p(k) = orig + eps;
                double up = dout.dot(forward_window(m, w, false, fwd_rng));
                p(k) = orig - eps;
                double down = dout.dot(forward_window(m, w, false, fwd_rng));
                p(k) = orig;
                double fd = (up - down) / (2 * eps);
                CHECK((*grad_mats[pi])(k) == doctest::Approx(fd).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("dropout masks are zero or inverse-keep and only apply in training") {
    auto cfg = tiny_config(CellKind::gru, 32);
    cfg.dropout = 0.4;
    auto m = RecurrentModel::make(cfg, 4, 1);
    Rng rng(3);
    m.init_weights(rng);
    Window w = random_window(5, 4, rng);

    ForwardCache cache;
    Rng train_rng(99);
    forward_window_cached(m, w, true, train_rng, cache);
    int zeros = 0;
    for (Eigen::Index i = 0; i < cache.mask.size(); ++i) {
        bool zero = cache.mask[i] == 0.0;
        bool keep = std::abs(cache.mask[i] - 1.0 / 0.6) < 1e-12;
        CHECK((zero || keep));
        if (zero) ++zeros;
    }
    CHECK(zeros > 0); // 32 units at 40% dropout: all-kept is vanishingly unlikely

    // inference ignores dropout and the rng
    Rng eval_rng(1);
    Vec a = forward_window(m, w, false, eval_rng);
    Vec b = forward_window(m, w, false, eval_rng);
    CHECK(a == b);
    ForwardCache ec;
    forward_window_cached(m, w, false, eval_rng, ec);
    CHECK(ec.mask == Vec::Ones(32));
}

TEST_CASE("window length must equal lookback") {
    auto m = RecurrentModel::make(tiny_config(CellKind::gru, 4), 2, 1);
    Rng rng(1);
    Window w = random_window(4, 2, rng);
    CHECK_THROWS_AS(forward_window(m, w, false, rng), bc::ValidationError);
}

TEST_CASE("models serialize and parse losslessly") {
    auto cfg = tiny_config(CellKind::lstm, 5, 10);
    cfg.loss = LossKind::mse;
    cfg.optimizer = OptimizerKind::sgd;
    cfg.seed = 42;
    auto m = RecurrentModel::make(cfg, 34, 3);
    Rng rng(42);
    m.init_weights(rng);
    m.threshold = 0.45;
    m.norm_stats.source_fold = "fold2";
    for (int i = 0; i < bc::StateVector::kDims; ++i) {
        m.norm_stats.mean[static_cast<std::size_t>(i)] = 0.1 * i;
        m.norm_stats.std[static_cast<std::size_t>(i)] = 1.0 + 0.01 * i;
    }
    std::string text = serialize_model(m);
    auto back = parse_model(text);
    CHECK(back.cell_kind == m.cell_kind);
    CHECK(back.hidden_dim == 5);
    CHECK(back.out_dim == 3);
    CHECK(back.lookback == 10);
    CHECK(back.threshold == doctest::Approx(0.45));
    CHECK(back.norm_stats.source_fold == "fold2");
    CHECK(back.norm_stats.mean[7] == doctest::Approx(0.7));
    CHECK(back.config.loss == LossKind::mse);
    CHECK(back.config.optimizer == OptimizerKind::sgd);
    for (std::size_t i = 0; i < m.params.W.size(); ++i)
        CHECK(back.params.W[i] == m.params.W[i]);
    CHECK(back.params.dense_W == m.params.dense_W);
    // a second serialization is byte-identical
    CHECK(serialize_model(back) == text);

    auto dir = testsupport::make_temp_dir("bc_model");
    save_model(dir + "/m.json", m);
    auto loaded = load_model(dir + "/m.json");
    CHECK(serialize_model(loaded) == text);
    std::filesystem::remove_all(dir);
}

TEST_CASE("corrupt model files are rejected") {
    CHECK_THROWS_AS(parse_model("this is not json"), bc::ParseError);
    CHECK_THROWS_AS(parse_model("{\"kind\": \"something\"}"), bc::ParseError);

    // consistent json whose declared output size contradicts the dense shape
    auto m = RecurrentModel::make(tiny_config(CellKind::gru, 2), 3, 1);
    Rng rng(1);
    m.init_weights(rng);
    std::string text = serialize_model(m);
    auto pos = text.find("\"out_dim\": 1");
    REQUIRE(pos != std::string::npos);
    std::string tampered = text;
    tampered.replace(pos, 12, "\"out_dim\": 3");
    CHECK_THROWS_AS(parse_model(tampered), bc::ValidationError);

    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), bc::IoError);
}
