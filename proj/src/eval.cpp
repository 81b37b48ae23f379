#include "bc/eval.hpp"

#include "bc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace bc {

MacroMetrics macro_metrics(const std::vector<int>& preds, const std::vector<int>& labels,
                           int n_classes) {
    if (preds.size() != labels.size())
        throw ValidationError("macro_metrics: prediction/label length mismatch");
    if (n_classes < 2) throw ValidationError("macro_metrics: need at least 2 classes");
    std::vector<long> tp(static_cast<std::size_t>(n_classes), 0);
    std::vector<long> fp(static_cast<std::size_t>(n_classes), 0);
    std::vector<long> fn(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        int p = preds[i], l = labels[i];
        if (p < 0 || p >= n_classes || l < 0 || l >= n_classes)
            throw ValidationError("macro_metrics: class index out of range");
        if (p == l) {
            ++tp[static_cast<std::size_t>(p)];
        } else {
            ++fp[static_cast<std::size_t>(p)];
            ++fn[static_cast<std::size_t>(l)];
        }
    }
    MacroMetrics m;
    for (int c = 0; c < n_classes; ++c) {
        auto cs = static_cast<std::size_t>(c);
        double prec = tp[cs] + fp[cs] > 0
                          ? static_cast<double>(tp[cs]) / static_cast<double>(tp[cs] + fp[cs])
                          : 0.0;
        double rec = tp[cs] + fn[cs] > 0
                         ? static_cast<double>(tp[cs]) / static_cast<double>(tp[cs] + fn[cs])
                         : 0.0;
        double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
        m.precision += prec;
        m.recall += rec;
        m.f1 += f1;
    }
    m.precision /= n_classes;
    m.recall /= n_classes;
    m.f1 /= n_classes;
    m.accuracy = m.recall;
    return m;
}

MarginCounts margin_match(std::vector<double> pred_onsets, std::vector<double> true_onsets,
                          double margin_s) {
    std::sort(pred_onsets.begin(), pred_onsets.end());
    std::sort(true_onsets.begin(), true_onsets.end());
    // With uniform +-margin intervals, matching each true onset (ascending) to
    // the earliest live prediction is a maximum matching: preds that fall
    // behind can never serve a later true onset.
    MarginCounts c;
    std::size_t i = 0;
    for (double t : true_onsets) {
        while (i < pred_onsets.size() && pred_onsets[i] < t - margin_s) ++i;
        if (i < pred_onsets.size() && pred_onsets[i] <= t + margin_s) {
            ++c.tp;
            ++i;
        }
    }
    c.fp = static_cast<long>(pred_onsets.size()) - c.tp;
    c.fn = static_cast<long>(true_onsets.size()) - c.tp;
    return c;
}

MarginMetrics margin_metrics(const MarginCounts& c, long total_steps) {
    MarginMetrics m;
    m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                                  : 0.0;
    m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                                      : 0.0;
    if (total_steps > 0) {
        long tn = total_steps - c.tp - c.fp - c.fn;
        if (tn < 0) tn = 0;
        m.accuracy = static_cast<double>(c.tp + tn) / static_cast<double>(total_steps);
        if (m.accuracy > 1.0) m.accuracy = 1.0;
    }
    return m;
}

std::optional<double> bc_deviation(long y_true, long y_pred) {
    if (y_true == 0) return std::nullopt;
    return std::abs(static_cast<double>(y_true - y_pred)) / static_cast<double>(y_true);
}

std::vector<RatePoint> bc_rate_series(const std::vector<double>& onsets, double duration_s,
                                      double window_s, double hop_s) {
    std::vector<RatePoint> out;
    if (window_s <= 0 || hop_s <= 0) throw ValidationError("bc_rate_series: window and hop must be positive");
    for (double t = window_s; t <= duration_s + 1e-9; t += hop_s) {
        long n = 0;
        for (double o : onsets)
            if (o > t - window_s && o <= t) ++n;
        out.push_back({t, n});
    }
    return out;
}

std::string serialize_rate_series(const std::vector<RatePoint>& series) {
    std::ostringstream out;
    out << "t_s,count_per_min\n";
    char buf[32];
    for (const auto& p : series) {
        std::snprintf(buf, sizeof(buf), "%.3f", p.t_s);
        out << buf << "," << p.count << "\n";
    }
    return out.str();
}

void save_rate_series(const std::string& path, const std::vector<RatePoint>& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << serialize_rate_series(series);
    if (!out) throw IoError("write failed: " + path);
}

EngagementMetrics engagement_metrics(const std::vector<Interval>& speech_intervals,
                                     double session_duration_s) {
    if (session_duration_s < 0) throw ValidationError("engagement_metrics: negative duration");
    EngagementMetrics m;
    m.utterance_count = static_cast<long>(speech_intervals.size());
    if (speech_intervals.empty()) return m;
    double total = 0.0;
    for (const auto& iv : speech_intervals) total += iv.end_s - iv.start_s;
    m.mean_duration_s = total / static_cast<double>(m.utterance_count);
    if (session_duration_s > 0)
        m.utterances_per_second = static_cast<double>(m.utterance_count) / session_duration_s;
    double silence = session_duration_s - total;
    m.speech_to_silence = silence > 0 ? total / silence : std::numeric_limits<double>::infinity();
    return m;
}

std::string metrics_report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["macro"] = {{"accuracy", r.macro.accuracy},
                  {"precision", r.macro.precision},
                  {"recall", r.macro.recall},
                  {"f1", r.macro.f1}};
    j["margin"] = {{"accuracy", r.margin.accuracy},
                   {"precision", r.margin.precision},
                   {"recall", r.margin.recall},
                   {"f1", r.margin.f1}};
    if (r.bc_prediction_deviation)
        j["bc_prediction_deviation"] = *r.bc_prediction_deviation;
    else
        j["bc_prediction_deviation"] = nullptr;
    j["per_participant"] = nlohmann::json::array();
    for (const auto& p : r.per_participant) {
        nlohmann::json e;
        e["id"] = p.id;
        e["y_true"] = p.y_true;
        e["y_pred"] = p.y_pred;
        if (p.deviation)
            e["deviation"] = *p.deviation;
        else
            e["deviation"] = nullptr;
        j["per_participant"].push_back(e);
    }
    return j.dump(2) + "\n";
}

void save_metrics_report(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << metrics_report_json(report);
    if (!out) throw IoError("write failed: " + path);
}

} // namespace bc
