#include "bc/nnet/model.hpp"

#include "bc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bc::nnet {

std::string to_string(CellKind v) { return v == CellKind::gru ? "gru" : "lstm"; }
std::string to_string(Activation v) {
    switch (v) {
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
        case Activation::softmax: return "softmax";
    }
    throw ValidationError("unknown activation");
}
std::string to_string(LossKind v) {
    switch (v) {
        case LossKind::focal: return "focal";
        case LossKind::mse: return "mse";
        case LossKind::bce: return "bce";
        case LossKind::hinge: return "hinge";
    }
    throw ValidationError("unknown loss");
}
std::string to_string(OptimizerKind v) { return v == OptimizerKind::sgd ? "sgd" : "adam"; }
std::string to_string(Task v) { return v == Task::timing ? "timing" : "type"; }

CellKind cell_kind_from_string(const std::string& s) {
    if (s == "gru") return CellKind::gru;
    if (s == "lstm") return CellKind::lstm;
    throw ConfigError("unknown cell kind: " + s);
}
Activation activation_from_string(const std::string& s) {
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "relu") return Activation::relu;
    if (s == "softmax") return Activation::softmax;
    throw ConfigError("unknown activation: " + s);
}
LossKind loss_from_string(const std::string& s) {
    if (s == "focal") return LossKind::focal;
    if (s == "mse") return LossKind::mse;
    if (s == "bce") return LossKind::bce;
    if (s == "hinge") return LossKind::hinge;
    throw ConfigError("unknown loss: " + s);
}
OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer: " + s);
}
Task task_from_string(const std::string& s) {
    if (s == "timing") return Task::timing;
    if (s == "type") return Task::type;
    throw ConfigError("unknown task: " + s);
}

int gate_count(CellKind kind) { return kind == CellKind::gru ? gru_gate::count : lstm_gate::count; }

const char* gate_name(CellKind kind, int gate) {
    static const char* gru_names[] = {"z", "r", "h"};
    static const char* lstm_names[] = {"i", "f", "o", "c"};
    return kind == CellKind::gru ? gru_names[gate] : lstm_names[gate];
}

Params Params::zeros(CellKind kind, int input_dim, int hidden_dim, int out_dim) {
    Params p;
    int n = gate_count(kind);
    for (int g = 0; g < n; ++g) {
        p.W.push_back(Mat::Zero(hidden_dim, input_dim));
        p.U.push_back(Mat::Zero(hidden_dim, hidden_dim));
        p.b.push_back(Mat::Zero(hidden_dim, 1));
    }
    p.dense_W = Mat::Zero(out_dim, hidden_dim);
    p.dense_b = Mat::Zero(out_dim, 1);
    return p;
}

std::vector<Mat*> Params::all() {
    std::vector<Mat*> v;
    for (auto& m : W) v.push_back(&m);
    for (auto& m : U) v.push_back(&m);
    for (auto& m : b) v.push_back(&m);
    v.push_back(&dense_W);
    v.push_back(&dense_b);
    return v;
}

std::vector<const Mat*> Params::all() const {
    std::vector<const Mat*> v;
    for (const auto& m : W) v.push_back(&m);
    for (const auto& m : U) v.push_back(&m);
    for (const auto& m : b) v.push_back(&m);
    v.push_back(&dense_W);
    v.push_back(&dense_b);
    return v;
}

namespace {

bool on_grid(double x, std::initializer_list<double> grid) {
    for (double g : grid)
        if (std::abs(x - g) < 1e-12) return true;
    return false;
}

} // namespace

void TrainConfig::validate() const {
    if (lookback != 5 && lookback != 10 && lookback != 15)
        throw ConfigError("lookback must be one of {5, 10, 15}");
    if (batch_size != 8 && batch_size != 16 && batch_size != 32)
        throw ConfigError("batch_size must be one of {8, 16, 32}");
    if (!on_grid(dropout, {0.0, 0.2, 0.4}))
        throw ConfigError("dropout must be one of {0, 0.2, 0.4}");
    if (!on_grid(l2, {0.1, 0.01, 0.001, 0.0001}))
        throw ConfigError("l2 must be one of {0.1, 0.01, 0.001, 0.0001}");
    if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
    if (patience < 0) throw ConfigError("patience must be non-negative");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
    if (learning_rate < 0) throw ConfigError("learning_rate must be non-negative");
}

double TrainConfig::effective_lr() const {
    if (learning_rate > 0) return learning_rate;
    return optimizer == OptimizerKind::sgd ? 1e-2 : 1e-3;
}

RecurrentModel RecurrentModel::make(const TrainConfig& cfg, int input_dim, int out_dim) {
    RecurrentModel m;
    m.cell_kind = cfg.cell_kind;
    m.input_dim = input_dim;
    m.hidden_dim = cfg.hidden_dim;
    m.out_dim = out_dim;
    m.output_activation = cfg.activation;
    m.dropout_rate = cfg.dropout;
    m.lookback = cfg.lookback;
    m.params = Params::zeros(cfg.cell_kind, input_dim, cfg.hidden_dim, out_dim);
    m.seed = cfg.seed;
    m.config = cfg;
    return m;
}

void RecurrentModel::init_weights(Rng& rng) {
    double scale = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    auto fill = [&](Mat& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-scale, scale);
    };
    for (auto& m : params.W) fill(m);
    for (auto& m : params.U) fill(m);
    fill(params.dense_W);
    // biases stay zero
}

namespace {

double sigmoid1(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Vec sigmoid(const Vec& v) { return v.unaryExpr([](double x) { return sigmoid1(x); }); }

} // namespace

Vec apply_activation(Activation act, const Vec& pre) {
    switch (act) {
        case Activation::sigmoid: return sigmoid(pre);
        case Activation::relu: return pre.cwiseMax(0.0);
        case Activation::softmax: {
            double m = pre.maxCoeff();
            Vec e = (pre.array() - m).exp();
            return e / e.sum();
        }
    }
    throw ValidationError("unknown activation");
}

Vec activation_backward(Activation act, const Vec& out, const Vec& dout) {
    switch (act) {
        case Activation::sigmoid:
            return dout.cwiseProduct(out.cwiseProduct(Vec::Ones(out.size()) - out));
        case Activation::relu: {
            Vec d = dout;
            for (Eigen::Index i = 0; i < d.size(); ++i)
                if (out[i] <= 0.0) d[i] = 0.0;
            return d;
        }
        case Activation::softmax: {
            double s = dout.dot(out);
            return out.cwiseProduct((dout.array() - s).matrix());
        }
    }
    throw ValidationError("unknown activation");
}

void cell_forward(const RecurrentModel& m, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                  StepCache& out) {
    if (x.size() != m.input_dim || h_prev.size() != m.hidden_dim)
        throw ValidationError("cell_forward: dimension mismatch");
    const Params& p = m.params;
    out.h_prev = h_prev;
    if (m.cell_kind == CellKind::gru) {
        namespace g = gru_gate;
        out.z = sigmoid(p.W[g::z] * x + p.U[g::z] * h_prev + p.b[g::z]);
        out.r = sigmoid(p.W[g::r] * x + p.U[g::r] * h_prev + p.b[g::r]);
        Vec rh = out.r.cwiseProduct(h_prev);
        out.n = (p.W[g::h] * x + p.U[g::h] * rh + p.b[g::h]).array().tanh();
        out.h = (Vec::Ones(m.hidden_dim) - out.z).cwiseProduct(h_prev) + out.z.cwiseProduct(out.n);
    } else {
        namespace g = lstm_gate;
        out.i = sigmoid(p.W[g::i] * x + p.U[g::i] * h_prev + p.b[g::i]);
        out.f = sigmoid(p.W[g::f] * x + p.U[g::f] * h_prev + p.b[g::f]);
        out.o = sigmoid(p.W[g::o] * x + p.U[g::o] * h_prev + p.b[g::o]);
        out.g = (p.W[g::c] * x + p.U[g::c] * h_prev + p.b[g::c]).array().tanh();
        out.c = out.f.cwiseProduct(c_prev) + out.i.cwiseProduct(out.g);
        out.c_tanh = out.c.array().tanh();
        out.h = out.o.cwiseProduct(out.c_tanh);
    }
}

Vec forward_window_cached(const RecurrentModel& m, const Window& window, bool training, Rng& rng,
                          ForwardCache& cache) {
    if (static_cast<int>(window.size()) != m.lookback)
        throw ValidationError("forward_window: window length " + std::to_string(window.size()) +
                              " != lookback " + std::to_string(m.lookback));
    cache.steps.assign(window.size(), StepCache{});
    Vec h = Vec::Zero(m.hidden_dim);
    Vec c = Vec::Zero(m.hidden_dim);
    for (std::size_t t = 0; t < window.size(); ++t) {
        cell_forward(m, window[t], h, c, cache.steps[t]);
        h = cache.steps[t].h;
        if (m.cell_kind == CellKind::lstm) c = cache.steps[t].c;
    }
    cache.mask = Vec::Ones(m.hidden_dim);
    if (training && m.dropout_rate > 0.0) {
        double keep = 1.0 - m.dropout_rate;
        for (Eigen::Index i = 0; i < cache.mask.size(); ++i)
            cache.mask[i] = rng.uniform01() < m.dropout_rate ? 0.0 : 1.0 / keep;
    }
    cache.h_final = h.cwiseProduct(cache.mask);
    cache.pre_act = m.params.dense_W * cache.h_final + m.params.dense_b;
    cache.out = apply_activation(m.output_activation, cache.pre_act);
    return cache.out;
}

Vec forward_window(const RecurrentModel& m, const Window& window, bool training, Rng& rng) {
    ForwardCache cache;
    return forward_window_cached(m, window, training, rng, cache);
}

void backward_window(const RecurrentModel& m, const Window& window, const ForwardCache& cache,
                     const Vec& dout, Params& grads) {
    const Params& p = m.params;
    Vec dpre = activation_backward(m.output_activation, cache.out, dout);
    grads.dense_W += dpre * cache.h_final.transpose();
    grads.dense_b += dpre;
    Vec dh = (p.dense_W.transpose() * dpre).cwiseProduct(cache.mask);
    Vec dc = Vec::Zero(m.hidden_dim);
    Vec ones = Vec::Ones(m.hidden_dim);

    for (int t = static_cast<int>(window.size()) - 1; t >= 0; --t) {
        const StepCache& s = cache.steps[static_cast<std::size_t>(t)];
        const Vec& x = window[static_cast<std::size_t>(t)];
        if (m.cell_kind == CellKind::gru) {
            namespace g = gru_gate;
            Vec dz = dh.cwiseProduct(s.n - s.h_prev);
            Vec dn = dh.cwiseProduct(s.z);
            Vec dh_prev = dh.cwiseProduct(ones - s.z);

            Vec dn_pre = dn.cwiseProduct(ones - s.n.cwiseProduct(s.n));
            Vec rh = s.r.cwiseProduct(s.h_prev);
            grads.W[g::h] += dn_pre * x.transpose();
            grads.U[g::h] += dn_pre * rh.transpose();
            grads.b[g::h] += dn_pre;
            Vec d_rh = p.U[g::h].transpose() * dn_pre;
            Vec dr = d_rh.cwiseProduct(s.h_prev);
            dh_prev += d_rh.cwiseProduct(s.r);

            Vec dz_pre = dz.cwiseProduct(s.z.cwiseProduct(ones - s.z));
            Vec dr_pre = dr.cwiseProduct(s.r.cwiseProduct(ones - s.r));
            grads.W[g::z] += dz_pre * x.transpose();
            grads.U[g::z] += dz_pre * s.h_prev.transpose();
            grads.b[g::z] += dz_pre;
            grads.W[g::r] += dr_pre * x.transpose();
            grads.U[g::r] += dr_pre * s.h_prev.transpose();
            grads.b[g::r] += dr_pre;
            dh_prev += p.U[g::z].transpose() * dz_pre + p.U[g::r].transpose() * dr_pre;
            dh = dh_prev;
        } else {
            namespace g = lstm_gate;
            Vec c_prev = t > 0 ? cache.steps[static_cast<std::size_t>(t - 1)].c
                               : Vec::Zero(m.hidden_dim).eval();
            Vec do_ = dh.cwiseProduct(s.c_tanh);
            Vec dct = dc + dh.cwiseProduct(s.o).cwiseProduct(ones - s.c_tanh.cwiseProduct(s.c_tanh));
            Vec di = dct.cwiseProduct(s.g);
            Vec dg = dct.cwiseProduct(s.i);
            Vec df = dct.cwiseProduct(c_prev);
            dc = dct.cwiseProduct(s.f);

            Vec di_pre = di.cwiseProduct(s.i.cwiseProduct(ones - s.i));
            Vec df_pre = df.cwiseProduct(s.f.cwiseProduct(ones - s.f));
            Vec do_pre = do_.cwiseProduct(s.o.cwiseProduct(ones - s.o));
            Vec dg_pre = dg.cwiseProduct(ones - s.g.cwiseProduct(s.g));

            grads.W[g::i] += di_pre * x.transpose();
            grads.U[g::i] += di_pre * s.h_prev.transpose();
            grads.b[g::i] += di_pre;
            grads.W[g::f] += df_pre * x.transpose();
            grads.U[g::f] += df_pre * s.h_prev.transpose();
            grads.b[g::f] += df_pre;
            grads.W[g::o] += do_pre * x.transpose();
            grads.U[g::o] += do_pre * s.h_prev.transpose();
            grads.b[g::o] += do_pre;
            grads.W[g::c] += dg_pre * x.transpose();
            grads.U[g::c] += dg_pre * s.h_prev.transpose();
            grads.b[g::c] += dg_pre;

            dh = p.U[g::i].transpose() * di_pre + p.U[g::f].transpose() * df_pre +
                 p.U[g::o].transpose() * do_pre + p.U[g::c].transpose() * dg_pre;
        }
    }
}

namespace {

nlohmann::json mat_to_json(const Mat& m) {
    nlohmann::json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = data;
    return j;
}

Mat mat_from_json(const nlohmann::json& j, const std::string& name) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
        throw ParseError("model weight " + name + ": expected {rows, cols, data}");
    auto rows = j["rows"].get<Eigen::Index>();
    auto cols = j["cols"].get<Eigen::Index>();
    auto data = j["data"].get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ValidationError("model weight " + name + ": shape/data mismatch");
    Mat m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++];
    return m;
}

nlohmann::json config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["cell_kind"] = to_string(c.cell_kind);
    j["lookback"] = c.lookback;
    j["activation"] = to_string(c.activation);
    j["batch_size"] = c.batch_size;
    j["dropout"] = c.dropout;
    j["l2"] = c.l2;
    j["loss"] = to_string(c.loss);
    j["optimizer"] = to_string(c.optimizer);
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["augment"] = c.augment;
    j["seed"] = c.seed;
    j["hidden_dim"] = c.hidden_dim;
    j["learning_rate"] = c.learning_rate;
    j["focal_alpha"] = c.focal_alpha;
    j["focal_gamma"] = c.focal_gamma;
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.cell_kind = cell_kind_from_string(j.at("cell_kind").get<std::string>());
    c.lookback = j.at("lookback").get<int>();
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.batch_size = j.at("batch_size").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.l2 = j.at("l2").get<double>();
    c.loss = loss_from_string(j.at("loss").get<std::string>());
    c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.augment = j.at("augment").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.focal_alpha = j.at("focal_alpha").get<double>();
    c.focal_gamma = j.at("focal_gamma").get<double>();
    return c;
}

} // namespace

std::string serialize_model(const RecurrentModel& m) {
    nlohmann::json j;
    j["cell_kind"] = to_string(m.cell_kind);
    j["input_dim"] = m.input_dim;
    j["hidden_dim"] = m.hidden_dim;
    j["out_dim"] = m.out_dim;
    j["activation"] = to_string(m.output_activation);
    j["dropout_rate"] = m.dropout_rate;
    j["lookback"] = m.lookback;
    j["threshold"] = m.threshold;
    j["seed"] = m.seed;
    j["config"] = config_to_json(m.config);
    nlohmann::json ns;
    ns["mean"] = m.norm_stats.mean;
    ns["std"] = m.norm_stats.std;
    ns["source_fold"] = m.norm_stats.source_fold;
    j["norm_stats"] = ns;

    nlohmann::json w;
    int n = gate_count(m.cell_kind);
    for (int g = 0; g < n; ++g) {
        std::string suffix = gate_name(m.cell_kind, g);
        w["W_" + suffix] = mat_to_json(m.params.W[static_cast<std::size_t>(g)]);
        w["U_" + suffix] = mat_to_json(m.params.U[static_cast<std::size_t>(g)]);
        w["b_" + suffix] = mat_to_json(m.params.b[static_cast<std::size_t>(g)]);
    }
    w["dense_W"] = mat_to_json(m.params.dense_W);
    w["dense_b"] = mat_to_json(m.params.dense_b);
    j["weights"] = w;
    return j.dump(2) + "\n";
}

RecurrentModel parse_model(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
    try {
        RecurrentModel m;
        m.cell_kind = cell_kind_from_string(j.at("cell_kind").get<std::string>());
        m.input_dim = j.at("input_dim").get<int>();
        m.hidden_dim = j.at("hidden_dim").get<int>();
        m.out_dim = j.at("out_dim").get<int>();
        m.output_activation = activation_from_string(j.at("activation").get<std::string>());
        m.dropout_rate = j.at("dropout_rate").get<double>();
        m.lookback = j.at("lookback").get<int>();
        m.threshold = j.at("threshold").get<double>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config = config_from_json(j.at("config"));
        const auto& ns = j.at("norm_stats");
        auto mean = ns.at("mean").get<std::vector<double>>();
        auto stdv = ns.at("std").get<std::vector<double>>();
        if (mean.size() != m.norm_stats.mean.size() || stdv.size() != m.norm_stats.std.size())
            throw ValidationError("model file: norm_stats must have 34 entries");
        std::copy(mean.begin(), mean.end(), m.norm_stats.mean.begin());
        std::copy(stdv.begin(), stdv.end(), m.norm_stats.std.begin());
        m.norm_stats.source_fold = ns.at("source_fold").get<std::string>();

        const auto& w = j.at("weights");
        int n = gate_count(m.cell_kind);
        m.params = Params::zeros(m.cell_kind, m.input_dim, m.hidden_dim, m.out_dim);
        for (int g = 0; g < n; ++g) {
            std::string suffix = gate_name(m.cell_kind, g);
            m.params.W[static_cast<std::size_t>(g)] = mat_from_json(w.at("W_" + suffix), "W_" + suffix);
            m.params.U[static_cast<std::size_t>(g)] = mat_from_json(w.at("U_" + suffix), "U_" + suffix);
            m.params.b[static_cast<std::size_t>(g)] = mat_from_json(w.at("b_" + suffix), "b_" + suffix);
        }
        m.params.dense_W = mat_from_json(w.at("dense_W"), "dense_W");
        m.params.dense_b = mat_from_json(w.at("dense_b"), "dense_b");

        for (int g = 0; g < n; ++g) {
            auto gs = static_cast<std::size_t>(g);
            if (m.params.W[gs].rows() != m.hidden_dim || m.params.W[gs].cols() != m.input_dim ||
                m.params.U[gs].rows() != m.hidden_dim || m.params.U[gs].cols() != m.hidden_dim ||
                m.params.b[gs].rows() != m.hidden_dim || m.params.b[gs].cols() != 1)
                throw ValidationError("model file: gate weight shape mismatch");
        }
        if (m.params.dense_W.rows() != m.out_dim || m.params.dense_W.cols() != m.hidden_dim ||
            m.params.dense_b.rows() != m.out_dim || m.params.dense_b.cols() != 1)
            throw ValidationError("model file: dense weight shape mismatch");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

void save_model(const std::string& path, const RecurrentModel& m) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model " + path);
    out << serialize_model(m);
    if (!out) throw IoError("write failed: " + path);
}

RecurrentModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read model " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

} // namespace bc::nnet
