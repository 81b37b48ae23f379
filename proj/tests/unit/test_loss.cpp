#include "bc/nnet/loss.hpp"
#include "bc/errors.hpp"
#include "bc/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace bc::nnet;
using bc::Rng;

namespace {

Vec vec1(double x) { return Vec::Constant(1, x); }

double fd_grad(const Vec& pred, const Vec& target, const LossSpec& spec, int i,
               double eps = 1e-6) {
    Vec hi = pred, lo = pred;
    hi[i] += eps;
    lo[i] -= eps;
    return (loss_value(hi, target, spec) - loss_value(lo, target, spec)) / (2 * eps);
}

} // namespace

TEST_CASE("focal loss value at a confident correct prediction") {
    LossSpec spec{LossKind::focal, 0.25, 2.0, 0.0};
    // -0.25 * (1 - 0.9)^2 * ln(0.9)
    CHECK(loss_value(vec1(0.9), vec1(1.0), spec) == doctest::Approx(2.634013e-4).epsilon(1e-5));
    // the negative-class mirror image scores identically
    CHECK(loss_value(vec1(0.1), vec1(0.0), spec) ==
          doctest::Approx(loss_value(vec1(0.9), vec1(1.0), spec)));
    // wrong confident predictions cost far more
    CHECK(loss_value(vec1(0.1), vec1(1.0), spec) > 100 * loss_value(vec1(0.9), vec1(1.0), spec));
}

TEST_CASE("mse averages squared error over outputs") {
    LossSpec spec{LossKind::mse, 0.25, 2.0, 0.0};
    Vec pred(2), target(2);
    pred << 0.5, 1.0;
    target << 0.0, 0.0;
    CHECK(loss_value(pred, target, spec) == doctest::Approx(0.625));
}

TEST_CASE("bce with the probability floor") {
    LossSpec spec{LossKind::bce, 0.25, 2.0, 0.0};
    CHECK(loss_value(vec1(0.5), vec1(1.0), spec) == doctest::Approx(std::log(2.0)));
    // exact 0 against target 1 is clamped, not infinite
    double worst = loss_value(vec1(0.0), vec1(1.0), spec);
    CHECK(worst == doctest::Approx(-std::log(1e-7)));
    CHECK(std::isfinite(worst));
}

TEST_CASE("hinge on raw scores with plus-minus-one targets") {
    LossSpec spec{LossKind::hinge, 0.25, 2.0, 0.0};
    CHECK(loss_value(vec1(0.3), vec1(1.0), spec) == doctest::Approx(0.7));
    CHECK(loss_value(vec1(-2.0), vec1(-1.0), spec) == doctest::Approx(0.0));
    CHECK(loss_value(vec1(0.5), vec1(-1.0), spec) == doctest::Approx(1.5));
    CHECK(loss_value(vec1(2.0), vec1(1.0), spec) == doctest::Approx(0.0)); // beyond the margin
}

TEST_CASE("probability losses reject predictions outside the unit interval") {
    for (LossKind kind : {LossKind::focal, LossKind::bce}) {
        LossSpec spec{kind, 0.25, 2.0, 0.0};
        CHECK_THROWS_AS(loss_value(vec1(1.2), vec1(1.0), spec), bc::ValidationError);
        CHECK_THROWS_AS(loss_value(vec1(-0.1), vec1(0.0), spec), bc::ValidationError);
        CHECK_THROWS_AS(loss_grad(vec1(1.2), vec1(1.0), spec), bc::ValidationError);
    }
    // hinge scores are unconstrained
    LossSpec hinge{LossKind::hinge, 0.25, 2.0, 0.0};
    CHECK_NOTHROW(loss_value(vec1(3.0), vec1(1.0), hinge));
}

TEST_CASE("mismatched prediction and target sizes are rejected") {
    LossSpec spec{LossKind::mse, 0.25, 2.0, 0.0};
    Vec pred(2);
    pred << 0.1, 0.2;
    CHECK_THROWS_AS(loss_value(pred, vec1(0.0), spec), bc::ValidationError);
    CHECK_THROWS_AS(loss_grad(pred, vec1(0.0), spec), bc::ValidationError);
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(55);
    for (LossKind kind : {LossKind::focal, LossKind::mse, LossKind::bce, LossKind::hinge}) {
        LossSpec spec{kind, 0.25, 2.0, 0.0};
        for (int trial = 0; trial < 20; ++trial) {
            Vec pred(3), target(3);
            for (int i = 0; i < 3; ++i) {
                if (kind == LossKind::hinge) {
                    pred[i] = rng.uniform(-2.0, 2.0);
                    target[i] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
                    // stay away from the non-differentiable kink
                    if (std::abs(1.0 - target[i] * pred[i]) < 1e-3) pred[i] += 0.1;
                } else {
                    pred[i] = rng.uniform(0.05, 0.95);
                    target[i] = rng.uniform01() < 0.5 ? 0.0 : 1.0;
                }
            }
            Vec g = loss_grad(pred, target, spec);
            for (int i = 0; i < 3; ++i)
                CHECK(g[i] == doctest::Approx(fd_grad(pred, target, spec, i)).epsilon(1e-5));
        }
    }
}

TEST_CASE("l2 penalizes weights but not biases") {
    auto p = Params::zeros(CellKind::gru, 2, 2, 1);
    p.W[0](0, 0) = 3.0;
    p.dense_W(0, 1) = 2.0;
    p.b[1](0, 0) = 100.0;    // ignored
    p.dense_b(0, 0) = 50.0;  // ignored
    CHECK(l2_penalty(p, 0.01) == doctest::Approx(0.01 * (9.0 + 4.0)));
    CHECK(l2_penalty(p, 0.0) == 0.0);

    auto grads = Params::zeros(CellKind::gru, 2, 2, 1);
    add_l2_grads(p, 0.01, grads);
    CHECK(grads.W[0](0, 0) == doctest::Approx(0.06));
    CHECK(grads.dense_W(0, 1) == doctest::Approx(0.04));
    CHECK(grads.b[1](0, 0) == 0.0);
    CHECK(grads.dense_b(0, 0) == 0.0);
}

TEST_CASE("loss spec copies the relevant config fields") {
    TrainConfig cfg;
    cfg.loss = LossKind::bce;
    cfg.focal_alpha = 0.5;
    cfg.focal_gamma = 3.0;
    cfg.l2 = 0.01;
    auto spec = LossSpec::from(cfg);
    CHECK(spec.kind == LossKind::bce);
    CHECK(spec.focal_alpha == 0.5);
    CHECK(spec.focal_gamma == 3.0);
    CHECK(spec.l2 == 0.01);
}

TEST_CASE("example gradients include the l2 term and match finite differences") {
    TrainConfig cfg;
    cfg.cell_kind = CellKind::gru;
    cfg.hidden_dim = 3;
    cfg.lookback = 5;
    auto m = RecurrentModel::make(cfg, 2, 1);
    Rng rng(31);
    m.init_weights(rng);
    Window w;
    for (int t = 0; t < 5; ++t) {
        Vec x(2);
        x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
        w.push_back(x);
    }
    Vec target = vec1(1.0);
    LossSpec spec{LossKind::bce, 0.25, 2.0, 0.001};

    auto grads = example_grads(m, w, target, spec);
    auto params = m.params.all();
    auto grad_mats = grads.all();
    const double eps = 1e-6;
    // spot-check one entry per tensor
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Mat& p = *params[pi];
        if (p.size() == 0) continue;
        Eigen::Index k = static_cast<Eigen::Index>(pi) % p.size();
        double orig = p(k);
        p(k) = orig + eps;
        double up = example_loss(m, w, target, spec);
        p(k) = orig - eps;
        double down = example_loss(m, w, target, spec);
        p(k) = orig;
        double fd = (up - down) / (2 * eps);
        CHECK((*grad_mats[pi])(k) == doctest::Approx(fd).epsilon(1e-4));
    }
}
