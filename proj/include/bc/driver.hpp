#pragma once

#include "bc/behavior.hpp"
#include "bc/config.hpp"
#include "bc/corpus.hpp"
#include "bc/dsp.hpp"
#include "bc/heuristic.hpp"
#include "bc/nnet/train.hpp"

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

namespace bc {

// The two tasks ship with different tuned defaults.
nnet::TrainConfig default_timing_config();
nnet::TrainConfig default_type_config();

// Every tunable default in one place; populated from a config file, then
// overridden by command-line flags.
struct Settings {
    DspConfig dsp;
    HeuristicConfig heuristic;
    BehaviorConfig behavior;
    nnet::TrainConfig train = default_timing_config();          // [train] section
    nnet::TrainConfig train_type = default_type_config();       // [train_type] section
    double min_turn_s = 1.0;
    double threshold = 0.5;          // timing decision threshold
    double random_rate_per_min = 6.0; // Poisson baseline
    int folds = 8;
};

Settings settings_from_config(const ConfigFile& file);

enum class Policy { naive, learned, random };

Policy policy_from_string(const std::string& s);
std::string to_string(Policy p);

struct ExtractOptions {
    std::string audio;
    std::string out_features;
    std::string out_prosody; // default: features path with .prosody.csv
};

void run_extract(const ExtractOptions& opts, const Settings& st);

struct TrainOptions {
    std::string manifest;
    nnet::Task task = nnet::Task::timing;
    std::string out_model;
    std::uint64_t seed = 0;
    std::string cache_dir;  // reuse extracted feature CSVs when set
    std::string grid_file;  // JSON config list; emits a ranked table instead
    std::string out_report; // default: out_model + .metrics.json
    std::string out_history; // default: out_model + .history.json
};

void run_train(const TrainOptions& opts, const Settings& st);

struct PredictOptions {
    std::string features;
    std::string prosody; // default: features path with .prosody.csv
    Policy policy = Policy::naive;
    std::string timing_model;
    std::string type_model;
    std::string truth;          // annotation CSV enables the metrics report
    std::string truth_listener; // participant id; inferred when unambiguous
    std::string out_events;
    std::string out_report; // default: out_events + .metrics.json
    std::uint64_t seed = 0;
    bool gaze = false;
};

void run_predict(const PredictOptions& opts, const Settings& st);

struct StreamOptions {
    std::string audio;
    Policy policy = Policy::naive;
    std::string timing_model;
    std::string type_model;
    double real_time_factor = 0.0; // 0 = as fast as possible
    std::uint64_t seed = 0;
    bool gaze = false;
    std::string out_events; // optional copy of the streamed log
};

// interrupted (usually wired to SIGINT) stops the stream early but cleanly.
void run_stream(const StreamOptions& opts, const Settings& st,
                const std::atomic<bool>* interrupted = nullptr);

struct CompareOptions {
    std::string manifest;
    std::vector<Policy> policies;
    std::string timing_model;
    std::string type_model;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string cache_dir;
};

void run_compare(const CompareOptions& opts, const Settings& st);

struct MetricsOptions {
    std::string events;
    std::string audio;     // optional: engagement metrics via VAD
    double duration_s = 0; // optional override
    std::string out_report; // default: events + .analytics.json
    std::string out_rate_csv; // default: events + .rate.csv
};

void run_metrics(const MetricsOptions& opts, const Settings& st);

} // namespace bc
