#include "bc/driver.hpp"
#include "bc/errors.hpp"
#include "bc/nnet/model.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) {
    g_interrupted.store(true);
}

struct Common {
    std::string config_path;
    std::vector<std::string> overrides; // section.key=value
    std::uint64_t seed = 0;
};

std::string trim_copy(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

bc::Settings make_settings(const Common& c) {
    bc::ConfigFile file;
    if (!c.config_path.empty()) file = bc::load_config(c.config_path);
    for (const auto& kv : c.overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw bc::ConfigError("--set expects section.key=value, got: " + kv);
        std::string key = trim_copy(kv.substr(0, eq));
        std::string value = trim_copy(kv.substr(eq + 1));
        if (key.empty()) throw bc::ConfigError("--set expects section.key=value, got: " + kv);
        file.values[key] = value;
    }
    return bc::settings_from_config(file);
}

// --config/--set/--seed are accepted both before and after the subcommand.
struct CommonOpts {
    CLI::Option* seed = nullptr;
};

CommonOpts add_common(CLI::App* cmd, Common& common) {
    CommonOpts opts;
    cmd->add_option("--config", common.config_path, "Settings file (INI-style sections)");
    cmd->add_option("--set", common.overrides, "Override one setting, e.g. --set predict.threshold=0.6")
        ->take_all();
    opts.seed = cmd->add_option("--seed", common.seed, "Random seed");
    return opts;
}

void require_seed(const CLI::Option* parent, const CLI::Option* sub) {
    if (parent->count() == 0 && sub->count() == 0)
        throw bc::ConfigError("--seed is required for this subcommand");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Backchannel generation toolkit: turns speaker audio into timed "
                 "listener-response events"};
    app.require_subcommand(1);

    Common common;
    CommonOpts root_opts = add_common(&app, common);

    bc::ExtractOptions ex;
    CLI::App* extract = app.add_subcommand("extract", "Compute feature CSVs from a WAV file");
    extract->add_option("--audio", ex.audio, "Input WAV")->required();
    extract->add_option("-o,--out", ex.out_features, "Output feature CSV")->required();
    extract->add_option("--prosody-out", ex.out_prosody,
                        "Output prosody CSV (default: <out>.prosody.csv)");
    CommonOpts ex_opts = add_common(extract, common);

    bc::TrainOptions tr;
    std::string task_name = "timing";
    CLI::App* train = app.add_subcommand("train", "Train a model with listener-wise cross-validation");
    train->add_option("--manifest", tr.manifest, "Corpus manifest JSON")->required();
    train->add_option("--task", task_name, "timing or type")->capture_default_str();
    train->add_option("-o,--out", tr.out_model, "Output model JSON (or grid table with --grid)")
        ->required();
    train->add_option("--cache-dir", tr.cache_dir, "Directory for cached feature CSVs");
    train->add_option("--grid", tr.grid_file, "JSON array of config overrides; runs a grid search");
    train->add_option("--report-out", tr.out_report, "Metrics report path (default: <out>.metrics.json)");
    train->add_option("--history-out", tr.out_history,
                      "Training history path (default: <out>.history.json)");
    CommonOpts tr_opts = add_common(train, common);

    bc::PredictOptions pr;
    std::string pr_policy = "naive";
    CLI::App* predict = app.add_subcommand("predict", "Generate a backchannel event log from feature CSVs");
    predict->add_option("--features", pr.features, "Feature CSV")->required();
    predict->add_option("--prosody", pr.prosody, "Prosody CSV (default: <features>.prosody.csv)");
    predict->add_option("--policy", pr_policy, "naive, learned, or random")->capture_default_str();
    predict->add_option("--timing-model", pr.timing_model, "Timing model JSON");
    predict->add_option("--type-model", pr.type_model, "Type model JSON");
    predict->add_option("--truth", pr.truth, "Annotation CSV for a metrics report");
    predict->add_option("--listener", pr.truth_listener, "Participant id of the listener in --truth");
    predict->add_option("-o,--out", pr.out_events, "Output event log (JSON lines)")->required();
    predict->add_option("--report-out", pr.out_report, "Metrics report path (default: <out>.metrics.json)");
    predict->add_flag("--gaze", pr.gaze, "Include the listening gaze schedule");
    CommonOpts pr_opts = add_common(predict, common);

    bc::StreamOptions sm;
    std::string sm_policy = "naive";
    CLI::App* stream = app.add_subcommand("stream", "Emit the event log for a WAV file as it plays");
    stream->add_option("--audio", sm.audio, "Input WAV")->required();
    stream->add_option("--policy", sm_policy, "naive, learned, or random")->capture_default_str();
    stream->add_option("--timing-model", sm.timing_model, "Timing model JSON");
    stream->add_option("--type-model", sm.type_model, "Type model JSON");
    stream->add_option("--realtime-factor", sm.real_time_factor,
                       "Pacing multiplier; 0 emits immediately")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    stream->add_flag("--gaze", sm.gaze, "Include the listening gaze schedule");
    stream->add_option("-o,--out", sm.out_events, "Also save the emitted log to this path");
    CommonOpts sm_opts = add_common(stream, common);

    bc::CompareOptions cp;
    std::vector<std::string> cp_policies = {"naive", "random"};
    CLI::App* compare = app.add_subcommand("compare", "Evaluate policies side by side on a corpus");
    compare->add_option("--manifest", cp.manifest, "Corpus manifest JSON")->required();
    compare->add_option("--policies", cp_policies, "Policies to evaluate")
        ->delimiter(',')
        ->capture_default_str();
    compare->add_option("--timing-model", cp.timing_model, "Timing model JSON (learned policy)");
    compare->add_option("--type-model", cp.type_model, "Type model JSON (learned policy)");
    compare->add_option("-o,--out", cp.out_dir, "Output directory")->required();
    compare->add_option("--cache-dir", cp.cache_dir, "Directory for cached feature CSVs");
    CommonOpts cp_opts = add_common(compare, common);

    bc::MetricsOptions mt;
    CLI::App* metrics = app.add_subcommand("metrics", "Analyze an event log");
    metrics->add_option("--events", mt.events, "Event log (JSON lines)")->required();
    metrics->add_option("--audio", mt.audio, "Speaker WAV for engagement metrics");
    metrics->add_option("--duration", mt.duration_s, "Session duration override, seconds")
        ->check(CLI::NonNegativeNumber);
    metrics->add_option("-o,--out", mt.out_report, "Analytics report path (default: <events>.analytics.json)");
    metrics->add_option("--rate-out", mt.out_rate_csv,
                        "Rate series CSV path (default: <events>.rate.csv)");
    CommonOpts mt_opts = add_common(metrics, common);
    (void)mt_opts;

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        bc::Settings st = make_settings(common);
        if (app.got_subcommand(extract)) {
            (void)ex_opts;
            bc::run_extract(ex, st);
        } else if (app.got_subcommand(train)) {
            require_seed(root_opts.seed, tr_opts.seed);
            tr.task = bc::nnet::task_from_string(task_name);
            tr.seed = common.seed;
            bc::run_train(tr, st);
        } else if (app.got_subcommand(predict)) {
            require_seed(root_opts.seed, pr_opts.seed);
            pr.policy = bc::policy_from_string(pr_policy);
            pr.seed = common.seed;
            bc::run_predict(pr, st);
        } else if (app.got_subcommand(stream)) {
            require_seed(root_opts.seed, sm_opts.seed);
            sm.policy = bc::policy_from_string(sm_policy);
            sm.seed = common.seed;
            std::signal(SIGINT, handle_sigint);
            bc::run_stream(sm, st, &g_interrupted);
        } else if (app.got_subcommand(compare)) {
            require_seed(root_opts.seed, cp_opts.seed);
            cp.policies.clear();
            for (const auto& name : cp_policies) cp.policies.push_back(bc::policy_from_string(name));
            cp.seed = common.seed;
            bc::run_compare(cp, st);
        } else if (app.got_subcommand(metrics)) {
            bc::run_metrics(mt, st);
        }
    } catch (const bc::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bc::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bc::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bc::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
