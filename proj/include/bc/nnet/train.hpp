#pragma once

#include "bc/corpus.hpp"
#include "bc/nnet/loss.hpp"
#include "bc/nnet/model.hpp"

#include <string>
#include <vector>

namespace bc::nnet {

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int stop_epoch = 0;
    std::string stop_reason; // max_epochs | early_stop_loss | early_stop_val
};

struct TrainResult {
    RecurrentModel model;
    TrainHistory history;
};

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::sgd;
    double lr = 1e-2;
    Params m, v; // adam moments
    long step = 0;

    static OptimizerState make(const RecurrentModel& model, OptimizerKind kind, double lr);
};

void optimize_step(Params& params, const Params& grads, OptimizerState& state);

// Masked copy; labels and length are untouched. Expects normalized states, so
// masked cells are zeroed (the post-normalization mean).
LabeledSequence augment(const LabeledSequence& seq, Rng& rng);

struct TrainingExample {
    Window x;
    Vec y;
};

// One example per step with a full trailing lookback window. The type task
// keeps only timing-positive steps, with one-hot 3-class targets.
std::vector<TrainingExample> make_windows(const std::vector<LabeledSequence>& seqs, int lookback,
                                          Task task);

// Trains one model on normalized copies of the given raw sequences;
// normalization stats are fit on train_seqs only and stored in the model.
TrainResult train(Task task, const std::vector<LabeledSequence>& train_seqs,
                  const std::vector<LabeledSequence>& val_seqs, const TrainConfig& cfg,
                  const std::string& fold_name = "");

struct PredictedBc {
    double t = 0.0; // onset: start of the triggering 0.5 s step
    BcClass type = BcClass::vocal;
};

// Two-stage inference over a raw StateVector stream. Each model applies its
// own stored normalization; steps without full history for every involved
// model produce nothing. type_model may be null (events default to vocal).
std::vector<PredictedBc> predict_events(const RecurrentModel& timing_model,
                                        const RecurrentModel* type_model,
                                        const std::vector<StateVector>& states, double threshold);

struct FoldData {
    std::string name;
    std::vector<LabeledSequence> train;
    std::vector<LabeledSequence> val;
};

struct GridEntry {
    int config_index = 0;
    std::vector<double> metric_values; // mean over folds, aligned with metric_names
    int top3_count = 0;
    double mean_f1 = 0.0;
};

struct GridResult {
    std::vector<std::string> metric_names;
    std::vector<GridEntry> entries; // best first
};

// Ranks configs by how often each lands in the top 3 per metric (mean over
// validation folds); ties break by mean macro F1, then input order.
GridResult grid_search(Task task, const std::vector<FoldData>& folds,
                       const std::vector<TrainConfig>& grid,
                       const std::vector<std::string>& metric_priorities = {"macro_accuracy",
                                                                            "macro_f1"});

} // namespace bc::nnet
