#include "bc/nnet/train.hpp"

#include "bc/errors.hpp"
#include "bc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace bc::nnet {

namespace {

Vec state_to_vec(const StateVector& s) {
    return Eigen::Map<const Vec>(s.values.data(), StateVector::kDims);
}

NormStats fit_norm_over(const std::vector<LabeledSequence>& seqs, const std::string& fold_name) {
    std::vector<StateVector> all;
    for (const auto& s : seqs) all.insert(all.end(), s.states.begin(), s.states.end());
    NormStats stats = fit_norm(all);
    stats.source_fold = fold_name;
    return stats;
}

std::vector<LabeledSequence> normalize_all(const std::vector<LabeledSequence>& seqs,
                                           const NormStats& stats) {
    std::vector<LabeledSequence> out = seqs;
    for (auto& s : out) s.states = apply_norm(s.states, stats);
    return out;
}

void check_norm_stats(const NormStats& stats) {
    for (double s : stats.std)
        if (!(s > 0.0))
            throw ConfigError("model carries no normalization stats; was it trained?");
}

} // namespace

OptimizerState OptimizerState::make(const RecurrentModel& model, OptimizerKind kind, double lr) {
    OptimizerState s;
    s.kind = kind;
    s.lr = lr;
    if (kind == OptimizerKind::adam) {
        s.m = Params::zeros(model.cell_kind, model.input_dim, model.hidden_dim, model.out_dim);
        s.v = Params::zeros(model.cell_kind, model.input_dim, model.hidden_dim, model.out_dim);
    }
    return s;
}

void optimize_step(Params& params, const Params& grads, OptimizerState& state) {
    auto ps = params.all();
    auto gs = grads.all();
    if (state.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < ps.size(); ++i) *ps[i] -= state.lr * *gs[i];
        return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++state.step;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    auto ms = state.m.all();
    auto vs = state.v.all();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        *ms[i] = beta1 * *ms[i] + (1.0 - beta1) * *gs[i];
        *vs[i] = beta2 * *vs[i] + (1.0 - beta2) * gs[i]->cwiseProduct(*gs[i]);
        Mat mhat = *ms[i] / bc1;
        Mat vhat = *vs[i] / bc2;
        Mat denom = vhat.cwiseSqrt() + Mat::Constant(vhat.rows(), vhat.cols(), eps);
        *ps[i] -= state.lr * mhat.cwiseQuotient(denom);
    }
}

LabeledSequence augment(const LabeledSequence& seq, Rng& rng) {
    LabeledSequence out = seq;
    auto n = static_cast<std::uint64_t>(out.states.size());
    if (n == 0) return out;
    std::uint64_t branch = rng.uniform_int(3); // 0=time, 1=frequency, 2=both
    if (branch == 0 || branch == 2) {
        auto max_len = static_cast<std::uint64_t>(0.2 * static_cast<double>(n));
        if (max_len >= 1) {
            std::uint64_t len = 1 + rng.uniform_int(max_len);
            std::uint64_t start = rng.uniform_int(n - len + 1);
            for (std::uint64_t i = start; i < start + len; ++i)
                out.states[i].values.fill(0.0);
        }
    }
    if (branch == 1 || branch == 2) {
        constexpr std::uint64_t max_dims = 8;
        std::uint64_t len = 1 + rng.uniform_int(max_dims);
        std::uint64_t start = rng.uniform_int(StateVector::kDims - len + 1);
        for (auto& s : out.states)
            for (std::uint64_t d = start; d < start + len; ++d) s.values[d] = 0.0;
    }
    return out;
}

std::vector<TrainingExample> make_windows(const std::vector<LabeledSequence>& seqs, int lookback,
                                          Task task) {
    std::vector<TrainingExample> out;
    for (const auto& seq : seqs) {
        auto n = static_cast<int>(seq.states.size());
        for (int i = lookback - 1; i < n; ++i) {
            if (task == Task::type && seq.timing_labels[static_cast<std::size_t>(i)] != 1) continue;
            TrainingExample ex;
            ex.x.reserve(static_cast<std::size_t>(lookback));
            for (int j = i - lookback + 1; j <= i; ++j)
                ex.x.push_back(state_to_vec(seq.states[static_cast<std::size_t>(j)]));
            if (task == Task::timing) {
                ex.y = Vec::Constant(1, seq.timing_labels[static_cast<std::size_t>(i)]);
            } else {
                int cls = seq.type_labels[static_cast<std::size_t>(i)];
                if (cls < 0 || cls > 2)
                    throw DataError("type label missing at a timing-positive step");
                ex.y = Vec::Zero(3);
                ex.y[cls] = 1.0;
            }
            out.push_back(std::move(ex));
        }
    }
    return out;
}

namespace {

// Targets for the hinge loss live in {-1, +1}; the stored labels are 0/1.
Vec loss_target(const Vec& y, LossKind kind) {
    if (kind != LossKind::hinge) return y;
    Vec t = y;
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = t[i] > 0.5 ? 1.0 : -1.0;
    return t;
}

double eval_data_loss(const RecurrentModel& model, const std::vector<TrainingExample>& windows,
                      const LossSpec& spec) {
    if (windows.empty()) return 0.0;
    Rng rng(0);
    double sum = 0.0;
    for (const auto& ex : windows) {
        Vec out = forward_window(model, ex.x, false, rng);
        sum += loss_value(out, loss_target(ex.y, spec.kind), spec);
    }
    return sum / static_cast<double>(windows.size());
}

} // namespace

TrainResult train(Task task, const std::vector<LabeledSequence>& train_seqs,
                  const std::vector<LabeledSequence>& val_seqs, const TrainConfig& cfg,
                  const std::string& fold_name) {
    cfg.validate();
    if (train_seqs.empty()) throw DataError("train: no training sequences");

    NormStats stats = fit_norm_over(train_seqs, fold_name);
    auto train_norm = normalize_all(train_seqs, stats);
    auto val_norm = normalize_all(val_seqs, stats);

    Rng rng(cfg.seed);
    if (cfg.augment) {
        auto originals = train_norm;
        for (const auto& seq : originals) train_norm.push_back(augment(seq, rng));
    }

    auto train_windows = make_windows(train_norm, cfg.lookback, task);
    auto val_windows = make_windows(val_norm, cfg.lookback, task);
    if (train_windows.empty())
        throw DataError(task == Task::type
                            ? "train: no timing-positive steps to train the type model on"
                            : "train: no training windows (sequences shorter than lookback?)");
    if (val_windows.empty())
        throw DataError("train: no validation windows");

    RecurrentModel model = RecurrentModel::make(cfg, StateVector::kDims,
                                                task == Task::timing ? 1 : 3);
    model.norm_stats = stats;
    model.init_weights(rng);
    OptimizerState opt = OptimizerState::make(model, cfg.optimizer, cfg.effective_lr());
    LossSpec spec = LossSpec::from(cfg);

    TrainHistory hist;
    double best_train = std::numeric_limits<double>::infinity();
    double best_val = std::numeric_limits<double>::infinity();
    Params best_params = model.params;
    int no_improve_train = 0, no_improve_val = 0;
    std::string reason = "max_epochs";

    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double data_loss_sum = 0.0;
        auto bs = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += bs) {
            std::size_t b1 = std::min(order.size(), b0 + bs);
            auto bn = static_cast<double>(b1 - b0);
            Params grads = Params::zeros(model.cell_kind, model.input_dim, model.hidden_dim,
                                         model.out_dim);
            for (std::size_t k = b0; k < b1; ++k) {
                const auto& ex = train_windows[order[k]];
                ForwardCache cache;
                Vec out = forward_window_cached(model, ex.x, true, rng, cache);
                Vec target = loss_target(ex.y, spec.kind);
                data_loss_sum += loss_value(out, target, spec);
                backward_window(model, ex.x, cache, loss_grad(out, target, spec), grads);
            }
            for (Mat* g : grads.all()) *g /= bn;
            add_l2_grads(model.params, spec.l2, grads);
            optimize_step(model.params, grads, opt);
        }

        double train_loss = data_loss_sum / static_cast<double>(train_windows.size()) +
                            l2_penalty(model.params, spec.l2);
        double val_loss = eval_data_loss(model, val_windows, spec) +
                          l2_penalty(model.params, spec.l2);
        hist.train_loss.push_back(train_loss);
        hist.val_loss.push_back(val_loss);
        hist.stop_epoch = epoch;

        if (val_loss < best_val) {
            best_val = val_loss;
            best_params = model.params;
            no_improve_val = 0;
        } else {
            ++no_improve_val;
        }
        if (train_loss < best_train) {
            best_train = train_loss;
            no_improve_train = 0;
        } else {
            ++no_improve_train;
        }
        if (no_improve_val > cfg.patience) {
            reason = "early_stop_val";
            break;
        }
        if (no_improve_train > cfg.patience) {
            reason = "early_stop_loss";
            break;
        }
    }
    hist.stop_reason = reason;
    model.params = best_params;
    return {std::move(model), std::move(hist)};
}

std::vector<PredictedBc> predict_events(const RecurrentModel& timing_model,
                                        const RecurrentModel* type_model,
                                        const std::vector<StateVector>& states, double threshold) {
    check_norm_stats(timing_model.norm_stats);
    if (type_model) check_norm_stats(type_model->norm_stats);

    auto timing_states = apply_norm(states, timing_model.norm_stats);
    std::vector<StateVector> type_states;
    if (type_model) type_states = apply_norm(states, type_model->norm_stats);

    int first = timing_model.lookback - 1;
    if (type_model) first = std::max(first, type_model->lookback - 1);

    Rng rng(0);
    std::vector<PredictedBc> out;
    auto n = static_cast<int>(states.size());
    for (int i = first; i < n; ++i) {
        Window w;
        w.reserve(static_cast<std::size_t>(timing_model.lookback));
        for (int j = i - timing_model.lookback + 1; j <= i; ++j)
            w.push_back(state_to_vec(timing_states[static_cast<std::size_t>(j)]));
        double p = forward_window(timing_model, w, false, rng)[0];
        if (!(p > threshold)) continue;

        BcClass cls = BcClass::vocal;
        if (type_model) {
            Window tw;
            tw.reserve(static_cast<std::size_t>(type_model->lookback));
            for (int j = i - type_model->lookback + 1; j <= i; ++j)
                tw.push_back(state_to_vec(type_states[static_cast<std::size_t>(j)]));
            Vec probs = forward_window(*type_model, tw, false, rng);
            Eigen::Index best = 0;
            probs.maxCoeff(&best);
            cls = static_cast<BcClass>(static_cast<int>(best));
        }
        out.push_back({states[static_cast<std::size_t>(i)].t - 0.5, cls});
    }
    return out;
}

namespace {

double metric_by_name(const MacroMetrics& m, const std::string& name) {
    if (name == "macro_accuracy") return m.accuracy;
    if (name == "macro_precision") return m.precision;
    if (name == "macro_recall") return m.recall;
    if (name == "macro_f1") return m.f1;
    throw ConfigError("unknown grid-search metric: " + name);
}

} // namespace

GridResult grid_search(Task task, const std::vector<FoldData>& folds,
                       const std::vector<TrainConfig>& grid,
                       const std::vector<std::string>& metric_priorities) {
    if (grid.empty()) throw ConfigError("grid_search: empty grid");
    if (folds.empty()) throw ConfigError("grid_search: no folds");
    if (metric_priorities.empty()) throw ConfigError("grid_search: no metrics");

    int n_classes = task == Task::timing ? 2 : 3;
    auto nc = grid.size();
    std::vector<std::vector<double>> table(nc);
    std::vector<double> mean_f1(nc, 0.0);

    for (std::size_t ci = 0; ci < nc; ++ci) {
        std::vector<double> sums(metric_priorities.size(), 0.0);
        double f1_sum = 0.0;
        for (std::size_t fi = 0; fi < folds.size(); ++fi) {
            TrainConfig cfg = grid[ci];
            cfg.seed = cfg.seed + fi; // per-fold run, still deterministic
            TrainResult res = train(task, folds[fi].train, folds[fi].val, cfg,
                                    folds[fi].name.empty() ? "fold" + std::to_string(fi)
                                                           : folds[fi].name);
            auto val_norm = normalize_all(folds[fi].val, res.model.norm_stats);
            auto windows = make_windows(val_norm, cfg.lookback, task);
            std::vector<int> preds, labels;
            Rng rng(0);
            for (const auto& ex : windows) {
                Vec out = forward_window(res.model, ex.x, false, rng);
                if (task == Task::timing) {
                    preds.push_back(out[0] > res.model.threshold ? 1 : 0);
                    labels.push_back(ex.y[0] > 0.5 ? 1 : 0);
                } else {
                    Eigen::Index bp = 0, bl = 0;
                    out.maxCoeff(&bp);
                    ex.y.maxCoeff(&bl);
                    preds.push_back(static_cast<int>(bp));
                    labels.push_back(static_cast<int>(bl));
                }
            }
            MacroMetrics mm = macro_metrics(preds, labels, n_classes);
            for (std::size_t mi = 0; mi < metric_priorities.size(); ++mi)
                sums[mi] += metric_by_name(mm, metric_priorities[mi]);
            f1_sum += mm.f1;
        }
        for (double& s : sums) s /= static_cast<double>(folds.size());
        table[ci] = std::move(sums);
        mean_f1[ci] = f1_sum / static_cast<double>(folds.size());
    }

    std::vector<int> top3(nc, 0);
    for (std::size_t mi = 0; mi < metric_priorities.size(); ++mi) {
        std::vector<std::size_t> idx(nc);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return table[a][mi] > table[b][mi];
        });
        for (std::size_t r = 0; r < std::min<std::size_t>(3, nc); ++r) ++top3[idx[r]];
    }

    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (top3[a] != top3[b]) return top3[a] > top3[b];
        if (mean_f1[a] != mean_f1[b]) return mean_f1[a] > mean_f1[b];
        return a < b;
    });

    GridResult out;
    out.metric_names = metric_priorities;
    for (std::size_t r : order) {
        GridEntry e;
        e.config_index = static_cast<int>(r);
        e.metric_values = table[r];
        e.top3_count = top3[r];
        e.mean_f1 = mean_f1[r];
        out.entries.push_back(std::move(e));
    }
    return out;
}

} // namespace bc::nnet
