// Python bindings: the six pipeline commands plus the small pure helpers that
// are convenient to call from notebooks.

#include "bc/driver.hpp"
#include "bc/errors.hpp"
#include "bc/eval.hpp"
#include "bc/heuristic.hpp"
#include "bc/nnet/model.hpp"
#include "bc/rng.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

namespace py = pybind11;

namespace {

bc::Settings make_settings(const std::string& config_path,
                           const std::map<std::string, std::string>& overrides) {
    bc::ConfigFile file;
    if (!config_path.empty()) file = bc::load_config(config_path);
    for (const auto& [key, value] : overrides) file.values[key] = value;
    return bc::settings_from_config(file);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Listener backchannel prediction: feature extraction, rule and "
              "learned policies, training, and evaluation.";

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const bc::IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const bc::Error& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def(
        "extract",
        [](const std::string& audio, const std::string& out_features,
           const std::string& out_prosody, const std::string& config,
           const std::map<std::string, std::string>& settings) {
            bc::ExtractOptions opts;
            opts.audio = audio;
            opts.out_features = out_features;
            opts.out_prosody = out_prosody;
            bc::Settings st = make_settings(config, settings);
            py::gil_scoped_release release;
            bc::run_extract(opts, st);
        },
        py::arg("audio"), py::arg("out_features"), py::kw_only(), py::arg("out_prosody") = "",
        py::arg("config") = "", py::arg("settings") = std::map<std::string, std::string>{},
        "Extract per-window features and a prosody sidecar from a wav file.");

    m.def(
        "train",
        [](const std::string& manifest, const std::string& out_model, const std::string& task,
           std::uint64_t seed, const std::string& cache_dir, const std::string& grid,
           const std::string& out_report, const std::string& out_history,
           const std::string& config, const std::map<std::string, std::string>& settings) {
            bc::TrainOptions opts;
            opts.manifest = manifest;
            opts.out_model = out_model;
            opts.task = bc::nnet::task_from_string(task);
            opts.seed = seed;
            opts.cache_dir = cache_dir;
            opts.grid_file = grid;
            opts.out_report = out_report;
            opts.out_history = out_history;
            bc::Settings st = make_settings(config, settings);
            py::gil_scoped_release release;
            bc::run_train(opts, st);
        },
        py::arg("manifest"), py::arg("out_model"), py::kw_only(), py::arg("task") = "timing",
        py::arg("seed") = 0, py::arg("cache_dir") = "", py::arg("grid") = "",
        py::arg("out_report") = "", py::arg("out_history") = "", py::arg("config") = "",
        py::arg("settings") = std::map<std::string, std::string>{},
        "Cross-validated training over a conversation manifest; writes the "
        "model, a metrics report, and a loss history.");

    m.def(
        "predict",
        [](const std::string& features, const std::string& out_events, const std::string& policy,
           const std::string& prosody, const std::string& timing_model,
           const std::string& type_model, const std::string& truth,
           const std::string& truth_listener, const std::string& out_report, std::uint64_t seed,
           bool gaze, const std::string& config,
           const std::map<std::string, std::string>& settings) {
            bc::PredictOptions opts;
            opts.features = features;
            opts.out_events = out_events;
            opts.policy = bc::policy_from_string(policy);
            opts.prosody = prosody;
            opts.timing_model = timing_model;
            opts.type_model = type_model;
            opts.truth = truth;
            opts.truth_listener = truth_listener;
            opts.out_report = out_report;
            opts.seed = seed;
            opts.gaze = gaze;
            bc::Settings st = make_settings(config, settings);
            py::gil_scoped_release release;
            bc::run_predict(opts, st);
        },
        py::arg("features"), py::arg("out_events"), py::kw_only(), py::arg("policy") = "naive",
        py::arg("prosody") = "", py::arg("timing_model") = "", py::arg("type_model") = "",
        py::arg("truth") = "", py::arg("truth_listener") = "", py::arg("out_report") = "",
        py::arg("seed") = 0, py::arg("gaze") = false, py::arg("config") = "",
        py::arg("settings") = std::map<std::string, std::string>{},
        "Turn extracted features into a timed event log; with truth "
        "annotations, also writes a metrics report.");

    m.def(
        "stream",
        [](const std::string& audio, const std::string& policy, const std::string& timing_model,
           const std::string& type_model, double realtime_factor, std::uint64_t seed, bool gaze,
           const std::string& out_events, const std::string& config,
           const std::map<std::string, std::string>& settings) {
            bc::StreamOptions opts;
            opts.audio = audio;
            opts.policy = bc::policy_from_string(policy);
            opts.timing_model = timing_model;
            opts.type_model = type_model;
            opts.real_time_factor = realtime_factor;
            opts.seed = seed;
            opts.gaze = gaze;
            opts.out_events = out_events;
            bc::Settings st = make_settings(config, settings);
            py::gil_scoped_release release;
            bc::run_stream(opts, st);
        },
        py::arg("audio"), py::kw_only(), py::arg("policy") = "naive",
        py::arg("timing_model") = "", py::arg("type_model") = "",
        py::arg("realtime_factor") = 0.0, py::arg("seed") = 0, py::arg("gaze") = false,
        py::arg("out_events") = "", py::arg("config") = "",
        py::arg("settings") = std::map<std::string, std::string>{},
        "Simulate live decoding of a wav file, printing events as they fire; "
        "realtime_factor 0 runs as fast as possible.");

    m.def(
        "compare",
        [](const std::string& manifest, const std::string& out_dir,
           const std::vector<std::string>& policies, const std::string& timing_model,
           const std::string& type_model, std::uint64_t seed, const std::string& cache_dir,
           const std::string& config, const std::map<std::string, std::string>& settings) {
            bc::CompareOptions opts;
            opts.manifest = manifest;
            opts.out_dir = out_dir;
            for (const auto& p : policies) opts.policies.push_back(bc::policy_from_string(p));
            opts.timing_model = timing_model;
            opts.type_model = type_model;
            opts.seed = seed;
            opts.cache_dir = cache_dir;
            bc::Settings st = make_settings(config, settings);
            py::gil_scoped_release release;
            bc::run_compare(opts, st);
        },
        py::arg("manifest"), py::arg("out_dir"), py::kw_only(),
        py::arg("policies") = std::vector<std::string>{"naive", "random"},
        py::arg("timing_model") = "", py::arg("type_model") = "", py::arg("seed") = 0,
        py::arg("cache_dir") = "", py::arg("config") = "",
        py::arg("settings") = std::map<std::string, std::string>{},
        "Run several policies over a manifest and write side-by-side metric "
        "reports plus a summary.");

    m.def(
        "metrics",
        [](const std::string& events, const std::string& audio, double duration_s,
           const std::string& out_report, const std::string& out_rate_csv,
           const std::string& config, const std::map<std::string, std::string>& settings) {
            bc::MetricsOptions opts;
            opts.events = events;
            opts.audio = audio;
            opts.duration_s = duration_s;
            opts.out_report = out_report;
            opts.out_rate_csv = out_rate_csv;
            bc::Settings st = make_settings(config, settings);
            py::gil_scoped_release release;
            bc::run_metrics(opts, st);
        },
        py::arg("events"), py::kw_only(), py::arg("audio") = "", py::arg("duration_s") = 0.0,
        py::arg("out_report") = "", py::arg("out_rate_csv") = "", py::arg("config") = "",
        py::arg("settings") = std::map<std::string, std::string>{},
        "Summarize an event log: rates, counts, and (with audio) engagement.");

    // -- pure helpers ------------------------------------------------------

    m.def("bc_deviation", &bc::bc_deviation, py::arg("n_true"), py::arg("n_pred"),
          "Relative count deviation |pred - true| / true; None when undefined.");

    m.def(
        "margin_counts",
        [](std::vector<double> predicted, std::vector<double> truth, double margin_s) {
            auto c = bc::margin_match(std::move(predicted), std::move(truth), margin_s);
            return py::make_tuple(c.tp, c.fp, c.fn);
        },
        py::arg("predicted"), py::arg("truth"), py::arg("margin_s") = 0.5,
        "Optimal onset matching within +/- margin_s; returns (tp, fp, fn).");

    m.def(
        "rate_series",
        [](const std::vector<double>& onsets, double duration_s, double window_s, double hop_s) {
            std::vector<std::pair<double, long>> out;
            for (const auto& p : bc::bc_rate_series(onsets, duration_s, window_s, hop_s))
                out.emplace_back(p.t_s, p.count);
            return out;
        },
        py::arg("onsets"), py::arg("duration_s"), py::arg("window_s") = 60.0,
        py::arg("hop_s") = 15.0,
        "Sliding-window onset counts as (window_end_s, count) pairs.");

    m.def(
        "run_heuristic",
        [](const std::vector<double>& pitch, const std::vector<bool>& voiced,
           std::uint64_t seed) {
            bc::Rng rng(seed);
            std::vector<std::pair<double, std::string>> out;
            for (const auto& d : bc::run_offline(pitch, voiced, bc::HeuristicConfig{}, rng))
                out.emplace_back(d.t, bc::to_string(d.bc_type));
            return out;
        },
        py::arg("pitch"), py::arg("voiced"), py::arg("seed"),
        "Run the rule policy over aligned 10 ms pitch/voicing streams; returns "
        "(time_s, type) decisions.");

    m.def(
        "model_info",
        [](const std::string& path) {
            auto model = bc::nnet::load_model(path);
            py::dict d;
            d["cell_kind"] = bc::nnet::to_string(model.cell_kind);
            d["input_dim"] = model.input_dim;
            d["hidden_dim"] = model.hidden_dim;
            d["out_dim"] = model.out_dim;
            d["lookback"] = model.lookback;
            d["threshold"] = model.threshold;
            d["loss"] = bc::nnet::to_string(model.config.loss);
            d["optimizer"] = bc::nnet::to_string(model.config.optimizer);
            d["seed"] = model.seed;
            d["source_fold"] = model.norm_stats.source_fold;
            return d;
        },
        py::arg("path"), "Read a serialized model and report its configuration.");
}
