#pragma once

#include "bc/dsp.hpp"
#include "bc/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace bc::nnet {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class CellKind { gru, lstm };
enum class Activation { sigmoid, relu, softmax };
enum class LossKind { focal, mse, bce, hinge };
enum class OptimizerKind { sgd, adam };
enum class Task { timing, type };

std::string to_string(CellKind v);
std::string to_string(Activation v);
std::string to_string(LossKind v);
std::string to_string(OptimizerKind v);
std::string to_string(Task v);
CellKind cell_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);
LossKind loss_from_string(const std::string& s);
OptimizerKind optimizer_from_string(const std::string& s);
Task task_from_string(const std::string& s);

// Gate indices into Params::W / U / b.
namespace gru_gate {
inline constexpr int z = 0, r = 1, h = 2, count = 3;
}
namespace lstm_gate {
inline constexpr int i = 0, f = 1, o = 2, c = 3, count = 4;
}

int gate_count(CellKind kind);
// Gate name used in the model file ("z", "r", "h" / "i", "f", "o", "c").
const char* gate_name(CellKind kind, int gate);

// All trainable tensors of one model. Biases are hidden x 1 matrices so every
// tensor has the same type; all() yields a fixed iteration order.
struct Params {
    std::vector<Mat> W; // per gate, hidden x input
    std::vector<Mat> U; // per gate, hidden x hidden
    std::vector<Mat> b; // per gate, hidden x 1
    Mat dense_W;        // out x hidden
    Mat dense_b;        // out x 1

    static Params zeros(CellKind kind, int input_dim, int hidden_dim, int out_dim);
    std::vector<Mat*> all();
    std::vector<const Mat*> all() const;
};

struct TrainConfig {
    CellKind cell_kind = CellKind::gru;
    int lookback = 5;
    Activation activation = Activation::sigmoid;
    int batch_size = 16;
    double dropout = 0.0;
    double l2 = 0.0001;
    LossKind loss = LossKind::focal;
    OptimizerKind optimizer = OptimizerKind::adam;
    int max_epochs = 100;
    int patience = 10;
    bool augment = true;
    std::uint64_t seed = 0;
    int hidden_dim = 64;
    double learning_rate = 0.0; // 0 = optimizer default (1e-2 sgd, 1e-3 adam)
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;

    // Throws when a grid-constrained field is off its allowed grid.
    void validate() const;
    double effective_lr() const;
};

struct RecurrentModel {
    CellKind cell_kind = CellKind::gru;
    int input_dim = 34;
    int hidden_dim = 64;
    int out_dim = 1;
    Activation output_activation = Activation::sigmoid;
    double dropout_rate = 0.0;
    int lookback = 5;
    Params params;
    NormStats norm_stats;
    double threshold = 0.5;
    std::uint64_t seed = 0;
    TrainConfig config;

    static RecurrentModel make(const TrainConfig& cfg, int input_dim, int out_dim);
    void init_weights(Rng& rng);
};

// One input window: lookback vectors of input_dim.
using Window = std::vector<Vec>;

struct StepCache {
    Vec h_prev, h;
    Vec z, r, n;             // gru
    Vec i, f, o, g, c, c_tanh; // lstm
};

struct ForwardCache {
    std::vector<StepCache> steps;
    Vec h_final;    // after dropout
    Vec mask;       // inverted-dropout mask applied to h_final
    Vec pre_act;    // dense output before activation
    Vec out;
};

Vec apply_activation(Activation act, const Vec& pre);
// Given dL/dout, returns dL/dpre for the activation that produced out.
Vec activation_backward(Activation act, const Vec& out, const Vec& dout);

// One recurrent step. For GRU only h_prev is read and only h is set (besides
// the gates); for LSTM c_prev comes from the previous StepCache.
void cell_forward(const RecurrentModel& m, const Vec& x, const Vec& h_prev, const Vec& c_prev,
                  StepCache& out);

// Unrolls the cell over the window from zero state. Dropout is drawn from rng
// only when training is true.
Vec forward_window(const RecurrentModel& m, const Window& window, bool training, Rng& rng);
Vec forward_window_cached(const RecurrentModel& m, const Window& window, bool training, Rng& rng,
                          ForwardCache& cache);

// Backpropagation through time; accumulates parameter gradients for one
// example into grads given dL/dout. Uses the cache of the matching forward.
void backward_window(const RecurrentModel& m, const Window& window, const ForwardCache& cache,
                     const Vec& dout, Params& grads);

void save_model(const std::string& path, const RecurrentModel& m);
RecurrentModel load_model(const std::string& path);
std::string serialize_model(const RecurrentModel& m);
RecurrentModel parse_model(const std::string& text);

} // namespace bc::nnet
