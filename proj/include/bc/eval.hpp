#pragma once

#include "bc/dsp.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bc {

struct MacroMetrics {
    double accuracy = 0.0; // balanced accuracy: mean per-class recall
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Unweighted means over classes 0..n_classes-1; a class absent from labels
// contributes 0 to each mean.
MacroMetrics macro_metrics(const std::vector<int>& preds, const std::vector<int>& labels,
                           int n_classes);

struct MarginCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    MarginCounts& operator+=(const MarginCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

// One-to-one matching of predicted to true onsets within +-margin seconds,
// maximizing the number of pairs.
MarginCounts margin_match(std::vector<double> pred_onsets, std::vector<double> true_onsets,
                          double margin_s = 0.5);

struct MarginMetrics {
    double accuracy = 0.0; // (TP + TN*) / total_steps, TN* over the 0.5 s step universe
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

MarginMetrics margin_metrics(const MarginCounts& c, long total_steps);

// |y_true - y_pred| / y_true; undefined when y_true = 0.
std::optional<double> bc_deviation(long y_true, long y_pred);

struct RatePoint {
    double t_s = 0.0;
    long count = 0;
};

// Onset counts over sliding windows (t-window, t] for t = window, window+hop,
// ... <= duration. The first partial windows are omitted.
std::vector<RatePoint> bc_rate_series(const std::vector<double>& onsets, double duration_s,
                                      double window_s = 60.0, double hop_s = 15.0);

std::string serialize_rate_series(const std::vector<RatePoint>& series);
void save_rate_series(const std::string& path, const std::vector<RatePoint>& series);

struct EngagementMetrics {
    long utterance_count = 0;
    double utterances_per_second = 0.0;
    double mean_duration_s = 0.0;
    double speech_to_silence = 0.0; // +inf when speech fills the session
};

EngagementMetrics engagement_metrics(const std::vector<Interval>& speech_intervals,
                                     double session_duration_s);

struct MetricsReport {
    MacroMetrics macro;
    MarginMetrics margin;
    std::optional<double> bc_prediction_deviation; // mean over participants with y_true > 0
    struct PerParticipant {
        std::string id;
        long y_true = 0;
        long y_pred = 0;
        std::optional<double> deviation;
    };
    std::vector<PerParticipant> per_participant;
};

std::string metrics_report_json(const MetricsReport& report);
void save_metrics_report(const std::string& path, const MetricsReport& report);

} // namespace bc
