#include "bc/nnet/loss.hpp"

#include "bc/errors.hpp"

#include <cmath>

namespace bc::nnet {

namespace {

constexpr double kProbFloor = 1e-7;

double clamp_prob(double p) {
    if (p < kProbFloor) return kProbFloor;
    if (p > 1.0 - kProbFloor) return 1.0 - kProbFloor;
    return p;
}

void check_probs(const Vec& pred) {
    for (Eigen::Index i = 0; i < pred.size(); ++i)
        if (!(pred[i] >= 0.0 && pred[i] <= 1.0))
            throw ValidationError("loss: prediction outside [0, 1]");
}

} // namespace

double loss_value(const Vec& pred, const Vec& target, const LossSpec& spec) {
    if (pred.size() != target.size()) throw ValidationError("loss: shape mismatch");
    auto n = static_cast<double>(pred.size());
    double sum = 0.0;
    switch (spec.kind) {
        case LossKind::focal:
            check_probs(pred);
            for (Eigen::Index i = 0; i < pred.size(); ++i) {
                double pt = target[i] > 0.5 ? pred[i] : 1.0 - pred[i];
                pt = clamp_prob(pt);
                sum += -spec.focal_alpha * std::pow(1.0 - pt, spec.focal_gamma) * std::log(pt);
            }
            break;
        case LossKind::mse:
            for (Eigen::Index i = 0; i < pred.size(); ++i) {
                double d = pred[i] - target[i];
                sum += d * d;
            }
            break;
        case LossKind::bce:
            check_probs(pred);
            for (Eigen::Index i = 0; i < pred.size(); ++i) {
                double p = clamp_prob(pred[i]);
                sum += -(target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p));
            }
            break;
        case LossKind::hinge:
            for (Eigen::Index i = 0; i < pred.size(); ++i)
                sum += std::max(0.0, 1.0 - target[i] * pred[i]);
            break;
    }
    return sum / n;
}

Vec loss_grad(const Vec& pred, const Vec& target, const LossSpec& spec) {
    if (pred.size() != target.size()) throw ValidationError("loss: shape mismatch");
    auto n = static_cast<double>(pred.size());
    Vec g = Vec::Zero(pred.size());
    switch (spec.kind) {
        case LossKind::focal:
            check_probs(pred);
            for (Eigen::Index i = 0; i < pred.size(); ++i) {
                bool pos = target[i] > 0.5;
                double pt = clamp_prob(pos ? pred[i] : 1.0 - pred[i]);
                double a = spec.focal_alpha, gm = spec.focal_gamma;
                // d/dpt of -a (1-pt)^gm log pt
                double dpt = a * gm * std::pow(1.0 - pt, gm - 1.0) * std::log(pt) -
                             a * std::pow(1.0 - pt, gm) / pt;
                g[i] = (pos ? dpt : -dpt) / n;
            }
            break;
        case LossKind::mse:
            for (Eigen::Index i = 0; i < pred.size(); ++i)
                g[i] = 2.0 * (pred[i] - target[i]) / n;
            break;
        case LossKind::bce:
            check_probs(pred);
            for (Eigen::Index i = 0; i < pred.size(); ++i) {
                double p = clamp_prob(pred[i]);
                g[i] = (-target[i] / p + (1.0 - target[i]) / (1.0 - p)) / n;
            }
            break;
        case LossKind::hinge:
            for (Eigen::Index i = 0; i < pred.size(); ++i)
                g[i] = 1.0 - target[i] * pred[i] > 0.0 ? -target[i] / n : 0.0;
            break;
    }
    return g;
}

double l2_penalty(const Params& params, double l2) {
    if (l2 == 0.0) return 0.0;
    double sum = 0.0;
    for (const auto& m : params.W) sum += m.squaredNorm();
    for (const auto& m : params.U) sum += m.squaredNorm();
    sum += params.dense_W.squaredNorm();
    return l2 * sum;
}

void add_l2_grads(const Params& params, double l2, Params& grads) {
    if (l2 == 0.0) return;
    for (std::size_t i = 0; i < params.W.size(); ++i) grads.W[i] += 2.0 * l2 * params.W[i];
    for (std::size_t i = 0; i < params.U.size(); ++i) grads.U[i] += 2.0 * l2 * params.U[i];
    grads.dense_W += 2.0 * l2 * params.dense_W;
}

double example_loss(const RecurrentModel& m, const Window& window, const Vec& target,
                    const LossSpec& spec) {
    Rng rng(0); // dropout disabled, never drawn from
    Vec out = forward_window(m, window, false, rng);
    return loss_value(out, target, spec) + l2_penalty(m.params, spec.l2);
}

Params example_grads(const RecurrentModel& m, const Window& window, const Vec& target,
                     const LossSpec& spec) {
    Rng rng(0);
    ForwardCache cache;
    Vec out = forward_window_cached(m, window, false, rng, cache);
    Params grads = Params::zeros(m.cell_kind, m.input_dim, m.hidden_dim, m.out_dim);
    backward_window(m, window, cache, loss_grad(out, target, spec), grads);
    add_l2_grads(m.params, spec.l2, grads);
    return grads;
}

} // namespace bc::nnet
