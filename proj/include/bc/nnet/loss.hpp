#pragma once

#include "bc/nnet/model.hpp"

namespace bc::nnet {

struct LossSpec {
    LossKind kind = LossKind::mse;
    double focal_alpha = 0.25;
    double focal_gamma = 2.0;
    double l2 = 0.0;

    static LossSpec from(const TrainConfig& cfg) {
        return {cfg.loss, cfg.focal_alpha, cfg.focal_gamma, cfg.l2};
    }
};

// Data term, averaged over output dimensions. Hinge expects targets in {-1,+1}
// and scores straight from the output activation; the probability losses
// (focal, bce) require predictions in [0,1].
double loss_value(const Vec& pred, const Vec& target, const LossSpec& spec);
// d(loss_value)/d(pred).
Vec loss_grad(const Vec& pred, const Vec& target, const LossSpec& spec);

// l2 * sum of squared entries over weight matrices (W, U, dense_W); biases are
// not penalized.
double l2_penalty(const Params& params, double l2);
void add_l2_grads(const Params& params, double l2, Params& grads);

// Full per-example objective (data + l2) and its exact parameter gradients,
// with dropout disabled. Shared by training and the finite-difference checks.
double example_loss(const RecurrentModel& m, const Window& window, const Vec& target,
                    const LossSpec& spec);
Params example_grads(const RecurrentModel& m, const Window& window, const Vec& target,
                     const LossSpec& spec);

} // namespace bc::nnet
