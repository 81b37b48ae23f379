#include "bc/driver.hpp"

#include "bc/audio.hpp"
#include "bc/errors.hpp"
#include "bc/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace bc {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Features always pass through the 9-significant-digit CSV representation so
// that in-memory pipelines (stream) and file-based ones (extract + predict)
// see bit-identical values.
double q9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::stod(buf);
}

void quantize(Features& f) {
    for (auto& s : f.states) {
        s.t = q9(s.t);
        for (auto& v : s.values) v = q9(v);
    }
    for (auto& tk : f.ticks) {
        tk.t = q9(tk.t);
        tk.pitch_hz = q9(tk.pitch_hz);
    }
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void require_readable(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot read input file: " + path);
}

std::string default_sidecar(const std::string& features_path) {
    fs::path p(features_path);
    p.replace_extension();
    return p.string() + ".prosody.csv";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

using nnet::RecurrentModel;
using nnet::TrainConfig;
using nnet::Vec;
using nnet::Window;

Vec to_vec(const StateVector& s) {
    Vec v(StateVector::kDims);
    for (int d = 0; d < StateVector::kDims; ++d) v(d) = s.values[static_cast<std::size_t>(d)];
    return v;
}

} // namespace

nnet::TrainConfig default_timing_config() {
    return {};
}

nnet::TrainConfig default_type_config() {
    nnet::TrainConfig c;
    c.lookback = 10;
    c.batch_size = 32;
    c.dropout = 0.2;
    c.loss = nnet::LossKind::mse;
    c.optimizer = nnet::OptimizerKind::sgd;
    return c;
}

namespace {

void read_train_section(const ConfigFile& f, const std::string& sec, nnet::TrainConfig& c) {
    auto key = [&](const char* k) { return sec + "." + k; };
    c.cell_kind = nnet::cell_kind_from_string(
        f.get_string(key("cell_kind"), nnet::to_string(c.cell_kind)));
    c.lookback = f.get_int(key("lookback"), c.lookback);
    c.activation = nnet::activation_from_string(
        f.get_string(key("activation"), nnet::to_string(c.activation)));
    c.batch_size = f.get_int(key("batch_size"), c.batch_size);
    c.dropout = f.get_double(key("dropout"), c.dropout);
    c.l2 = f.get_double(key("l2"), c.l2);
    c.loss = nnet::loss_from_string(f.get_string(key("loss"), nnet::to_string(c.loss)));
    c.optimizer = nnet::optimizer_from_string(
        f.get_string(key("optimizer"), nnet::to_string(c.optimizer)));
    c.max_epochs = f.get_int(key("max_epochs"), c.max_epochs);
    c.patience = f.get_int(key("patience"), c.patience);
    c.augment = f.get_bool(key("augment"), c.augment);
    c.hidden_dim = f.get_int(key("hidden_dim"), c.hidden_dim);
    c.learning_rate = f.get_double(key("learning_rate"), c.learning_rate);
    c.focal_alpha = f.get_double(key("focal_alpha"), c.focal_alpha);
    c.focal_gamma = f.get_double(key("focal_gamma"), c.focal_gamma);
}

} // namespace

Settings settings_from_config(const ConfigFile& f) {
    Settings s;
    auto& d = s.dsp;
    d.frame_window_ms = f.get_double("dsp.frame_window_ms", d.frame_window_ms);
    d.frame_hop_ms = f.get_double("dsp.frame_hop_ms", d.frame_hop_ms);
    d.agg_window_s = f.get_double("dsp.agg_window_s", d.agg_window_s);
    d.f_min_hz = f.get_double("dsp.f_min_hz", d.f_min_hz);
    d.f_max_hz = f.get_double("dsp.f_max_hz", d.f_max_hz);
    d.yin_threshold = f.get_double("dsp.yin_threshold", d.yin_threshold);
    d.tick_ms = f.get_double("dsp.tick_ms", d.tick_ms);
    d.tick_window_ms = f.get_double("dsp.tick_window_ms", d.tick_window_ms);
    d.mfcc.n_filters = f.get_int("mfcc.n_filters", d.mfcc.n_filters);
    d.mfcc.f_lo_hz = f.get_double("mfcc.f_lo_hz", d.mfcc.f_lo_hz);
    d.mfcc.f_hi_hz = f.get_double("mfcc.f_hi_hz", d.mfcc.f_hi_hz);
    d.mfcc.log_floor = f.get_double("mfcc.log_floor", d.mfcc.log_floor);
    d.vad.frame_ms = f.get_double("vad.frame_ms", d.vad.frame_ms);
    d.vad.threshold_db = f.get_double("vad.threshold_db", d.vad.threshold_db);
    d.vad.hangover_ms = f.get_double("vad.hangover_ms", d.vad.hangover_ms);

    auto& h = s.heuristic;
    h.percentile_threshold = f.get_double("heuristic.percentile_threshold", h.percentile_threshold);
    h.min_region_s = f.get_double("heuristic.min_region_s", h.min_region_s);
    h.min_speech_s = f.get_double("heuristic.min_speech_s", h.min_speech_s);
    h.cooldown_s = f.get_double("heuristic.cooldown_s", h.cooldown_s);
    h.emission_delay_s = f.get_double("heuristic.emission_delay_s", h.emission_delay_s);
    h.buffer_window_s = f.get_double("heuristic.buffer_window_s", h.buffer_window_s);
    h.min_history_s = f.get_double("heuristic.min_history_s", h.min_history_s);

    auto& b = s.behavior;
    b.cue_set = f.get_list("behavior.cue_set", b.cue_set);
    b.nod_amplitude_lo = f.get_double("behavior.nod_amplitude_lo", b.nod_amplitude_lo);
    b.nod_amplitude_hi = f.get_double("behavior.nod_amplitude_hi", b.nod_amplitude_hi);
    b.gaze_at_user_lo_s = f.get_double("behavior.gaze_at_user_lo_s", b.gaze_at_user_lo_s);
    b.gaze_at_user_hi_s = f.get_double("behavior.gaze_at_user_hi_s", b.gaze_at_user_hi_s);
    b.gaze_away_lo_s = f.get_double("behavior.gaze_away_lo_s", b.gaze_away_lo_s);
    b.gaze_away_hi_s = f.get_double("behavior.gaze_away_hi_s", b.gaze_away_hi_s);

    read_train_section(f, "train", s.train);
    read_train_section(f, "train_type", s.train_type);

    s.min_turn_s = f.get_double("corpus.min_turn_s", s.min_turn_s);
    s.threshold = f.get_double("predict.threshold", s.threshold);
    s.random_rate_per_min = f.get_double("random.rate_per_min", s.random_rate_per_min);
    s.folds = f.get_int("cv.folds", s.folds);
    return s;
}

Policy policy_from_string(const std::string& s) {
    if (s == "naive") return Policy::naive;
    if (s == "learned") return Policy::learned;
    if (s == "random") return Policy::random;
    throw ConfigError("unknown policy: " + s + " (expected naive, learned, or random)");
}

std::string to_string(Policy p) {
    switch (p) {
    case Policy::naive: return "naive";
    case Policy::learned: return "learned";
    case Policy::random: return "random";
    }
    return "naive";
}

// ---------------------------------------------------------------------------
// extract

void run_extract(const ExtractOptions& opts, const Settings& st) {
    require_readable(opts.audio);
    AudioClip clip = load_wav(opts.audio);
    Features f = extract_features(clip, st.dsp);
    write_state_csv(opts.out_features, f.states);
    std::string pros = opts.out_prosody.empty() ? default_sidecar(opts.out_features)
                                                : opts.out_prosody;
    write_prosody_csv(pros, f.ticks);
}

// ---------------------------------------------------------------------------
// corpus loading (train / compare)

namespace {

struct ConversationData {
    ConversationEntry entry;
    std::string id_a, id_b;
    std::vector<AnnotationTrack> tracks;
    std::map<std::string, Features> features; // by participant id
    std::vector<ListenerSegment> segments;
    std::vector<LabeledSequence> sequences;
    double duration_s = 0.0;
};

struct CorpusData {
    std::vector<ConversationData> conversations;
    std::vector<std::string> participant_ids; // sorted, unique across conversations
    std::vector<LabeledSequence> sequences;   // all conversations, manifest order
};

Features load_or_extract(const std::string& audio_path, const Settings& st,
                         const std::string& cache_dir) {
    if (!cache_dir.empty()) {
        std::error_code ec;
        fs::create_directories(cache_dir, ec);
        std::string key = fs::absolute(audio_path).lexically_normal().string();
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a(key)));
        std::string base = (fs::path(cache_dir) / hex).string();
        std::string fpath = base + ".features.csv";
        std::string ppath = base + ".prosody.csv";
        if (fs::exists(fpath) && fs::exists(ppath)) {
            Features f;
            f.states = read_state_csv(fpath);
            f.ticks = read_prosody_csv(ppath);
            return f;
        }
        Features f = extract_features(load_wav(audio_path), st.dsp);
        write_state_csv(fpath, f.states);
        write_prosody_csv(ppath, f.ticks);
        quantize(f);
        return f;
    }
    Features f = extract_features(load_wav(audio_path), st.dsp);
    quantize(f);
    return f;
}

CorpusData load_corpus(const std::string& manifest_path, const Settings& st,
                       const std::string& cache_dir) {
    require_readable(manifest_path);
    Manifest man = load_manifest(manifest_path);
    if (man.conversations.empty()) throw DataError("manifest lists no conversations");

    CorpusData corpus;
    std::set<std::string> seen;
    for (const auto& entry : man.conversations) {
        require_readable(entry.audio_a);
        require_readable(entry.audio_b);
        require_readable(entry.annotations);

        ConversationData conv;
        conv.entry = entry;
        conv.tracks = load_annotations(entry.annotations);
        auto [ida, idb] = resolve_participants(entry, conv.tracks);
        conv.id_a = ida;
        conv.id_b = idb;
        const AnnotationTrack* track_a = nullptr;
        const AnnotationTrack* track_b = nullptr;
        for (const auto& t : conv.tracks) {
            if (t.participant_id == ida) track_a = &t;
            if (t.participant_id == idb) track_b = &t;
        }
        if (!track_a || !track_b)
            throw DataError("annotation file " + entry.annotations +
                            " lacks a track for participant " + (track_a ? idb : ida));
        for (const auto& id : {ida, idb})
            if (!seen.insert(id).second)
                throw DataError("participant id appears in more than one conversation: " + id);

        conv.features[ida] = load_or_extract(entry.audio_a, st, cache_dir);
        conv.features[idb] = load_or_extract(entry.audio_b, st, cache_dir);
        for (const auto& [id, f] : conv.features)
            conv.duration_s = std::max(conv.duration_s,
                                       static_cast<double>(f.states.size()) * st.dsp.agg_window_s);

        conv.segments = segment_roles(*track_a, *track_b, st.min_turn_s);
        std::map<std::string, std::vector<StateVector>> by_id;
        for (const auto& [id, f] : conv.features) by_id[id] = f.states;
        conv.sequences = build_dataset(by_id, conv.tracks, conv.segments);

        corpus.participant_ids.push_back(ida);
        corpus.participant_ids.push_back(idb);
        for (const auto& s : conv.sequences) corpus.sequences.push_back(s);
        corpus.conversations.push_back(std::move(conv));
    }
    std::sort(corpus.participant_ids.begin(), corpus.participant_ids.end());
    return corpus;
}

// True-onset times (step starts) of one labeled sequence.
std::vector<double> true_onsets(const LabeledSequence& seq, double step_s) {
    std::vector<double> out;
    for (std::size_t i = 0; i < seq.timing_labels.size(); ++i)
        if (seq.timing_labels[i] == 1) out.push_back(seq.states[i].t - step_s);
    return out;
}

int step_index(const LabeledSequence& seq, double t, double step_s) {
    if (seq.states.empty()) return -1;
    double first = seq.states.front().t - step_s;
    long i = std::lround((t - first) / step_s);
    if (i < 0 || i >= static_cast<long>(seq.states.size())) return -1;
    return static_cast<int>(i);
}

int argmax_first(const Vec& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

MacroMetrics safe_macro(const std::vector<int>& preds, const std::vector<int>& labels,
                        int n_classes) {
    if (labels.empty()) return {};
    return macro_metrics(preds, labels, n_classes);
}

// Pooled per-listener counting used by train and compare reports.
struct ReportPool {
    std::vector<int> step_preds, step_labels;
    MarginCounts counts;
    long total_steps = 0;
    std::map<std::string, std::pair<long, long>> per_listener; // y_true, y_pred

    MetricsReport finish(int n_classes, bool with_margin) const {
        MetricsReport rep;
        rep.macro = safe_macro(step_preds, step_labels, n_classes);
        if (with_margin) rep.margin = margin_metrics(counts, total_steps);
        double dev_sum = 0.0;
        long dev_n = 0;
        for (const auto& [id, yy] : per_listener) {
            MetricsReport::PerParticipant p;
            p.id = id;
            p.y_true = yy.first;
            p.y_pred = yy.second;
            p.deviation = bc_deviation(yy.first, yy.second);
            if (p.deviation) {
                dev_sum += *p.deviation;
                ++dev_n;
            }
            rep.per_participant.push_back(std::move(p));
        }
        if (dev_n > 0) rep.bc_prediction_deviation = dev_sum / dev_n;
        return rep;
    }
};

} // namespace

// ---------------------------------------------------------------------------
// train

namespace {

json train_config_json(const TrainConfig& c) {
    json j;
    j["cell_kind"] = nnet::to_string(c.cell_kind);
    j["lookback"] = c.lookback;
    j["activation"] = nnet::to_string(c.activation);
    j["batch_size"] = c.batch_size;
    j["dropout"] = c.dropout;
    j["l2"] = c.l2;
    j["loss"] = nnet::to_string(c.loss);
    j["optimizer"] = nnet::to_string(c.optimizer);
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["augment"] = c.augment;
    j["hidden_dim"] = c.hidden_dim;
    j["learning_rate"] = c.learning_rate;
    j["focal_alpha"] = c.focal_alpha;
    j["focal_gamma"] = c.focal_gamma;
    return j;
}

// Overlays the keys present in j onto base; unknown keys are rejected.
TrainConfig overlay_config(TrainConfig base, const json& j) {
    if (!j.is_object()) throw ParseError("grid entries must be JSON objects");
    for (const auto& [k, v] : j.items()) {
        if (k == "cell_kind") base.cell_kind = nnet::cell_kind_from_string(v.get<std::string>());
        else if (k == "lookback") base.lookback = v.get<int>();
        else if (k == "activation")
            base.activation = nnet::activation_from_string(v.get<std::string>());
        else if (k == "batch_size") base.batch_size = v.get<int>();
        else if (k == "dropout") base.dropout = v.get<double>();
        else if (k == "l2") base.l2 = v.get<double>();
        else if (k == "loss") base.loss = nnet::loss_from_string(v.get<std::string>());
        else if (k == "optimizer")
            base.optimizer = nnet::optimizer_from_string(v.get<std::string>());
        else if (k == "max_epochs") base.max_epochs = v.get<int>();
        else if (k == "patience") base.patience = v.get<int>();
        else if (k == "augment") base.augment = v.get<bool>();
        else if (k == "hidden_dim") base.hidden_dim = v.get<int>();
        else if (k == "learning_rate") base.learning_rate = v.get<double>();
        else if (k == "focal_alpha") base.focal_alpha = v.get<double>();
        else if (k == "focal_gamma") base.focal_gamma = v.get<double>();
        else throw ParseError("unknown grid config key: " + k);
    }
    return base;
}

void run_grid(const TrainOptions& opts, const FoldSplit& split, const TrainConfig& base,
              const std::map<std::string, std::vector<const LabeledSequence*>>& by_listener) {
    require_readable(opts.grid_file);
    json spec;
    try {
        spec = json::parse(read_text(opts.grid_file));
    } catch (const json::exception& e) {
        throw ParseError(std::string("grid file: ") + e.what());
    }
    if (!spec.is_array() || spec.empty())
        throw ParseError("grid file must be a non-empty JSON array of config objects");

    std::vector<TrainConfig> grid;
    for (const auto& entry : spec) {
        TrainConfig c = overlay_config(base, entry);
        c.seed = opts.seed;
        c.validate();
        grid.push_back(c);
    }

    auto gather = [&](const std::vector<std::string>& ids) {
        std::vector<LabeledSequence> out;
        for (const auto& id : ids) {
            auto it = by_listener.find(id);
            if (it == by_listener.end()) continue;
            for (const auto* p : it->second) out.push_back(*p);
        }
        return out;
    };

    std::vector<nnet::FoldData> folds;
    for (int f = 0; f < split.k; ++f) {
        nnet::FoldData fd;
        fd.name = "fold" + std::to_string(f);
        fd.train = gather(split.assignments[static_cast<std::size_t>(f)].train_ids);
        fd.val = gather(split.assignments[static_cast<std::size_t>(f)].val_ids);
        folds.push_back(std::move(fd));
    }

    nnet::GridResult result = nnet::grid_search(opts.task, folds, grid);
    json out;
    out["task"] = nnet::to_string(opts.task);
    out["metric_names"] = result.metric_names;
    out["entries"] = json::array();
    for (const auto& e : result.entries) {
        json je;
        je["config_index"] = e.config_index;
        je["config"] = train_config_json(grid[static_cast<std::size_t>(e.config_index)]);
        json metrics;
        for (std::size_t i = 0; i < result.metric_names.size(); ++i)
            metrics[result.metric_names[i]] = e.metric_values[i];
        je["metrics"] = metrics;
        je["top3_count"] = e.top3_count;
        je["mean_macro_f1"] = e.mean_f1;
        out["entries"].push_back(je);
    }
    write_text(opts.out_model, out.dump(2) + "\n");
}

} // namespace

void run_train(const TrainOptions& opts, const Settings& st) {
    CorpusData corpus = load_corpus(opts.manifest, st, opts.cache_dir);
    const bool timing = opts.task == nnet::Task::timing;
    const double step_s = st.dsp.agg_window_s;

    TrainConfig base = timing ? st.train : st.train_type;
    base.seed = opts.seed;
    base.validate();

    FoldSplit split = kfold_split(corpus.participant_ids, st.folds, opts.seed);

    std::map<std::string, std::vector<const LabeledSequence*>> by_listener;
    for (const auto& s : corpus.sequences) by_listener[s.segment.listener_id].push_back(&s);

    if (!opts.grid_file.empty()) {
        run_grid(opts, split, base, by_listener);
        return;
    }

    auto gather = [&](const std::vector<std::string>& ids) {
        std::vector<LabeledSequence> out;
        for (const auto& id : ids) {
            auto it = by_listener.find(id);
            if (it == by_listener.end()) continue;
            for (const auto* p : it->second) out.push_back(*p);
        }
        return out;
    };

    struct FoldOutcome {
        std::string name;
        nnet::TrainResult result;
        double best_val = std::numeric_limits<double>::infinity();
        ReportPool pool;
        MetricsReport report;
    };
    std::vector<FoldOutcome> outcomes;

    for (int f = 0; f < split.k; ++f) {
        const auto& fa = split.assignments[static_cast<std::size_t>(f)];
        auto train_seqs = gather(fa.train_ids);
        auto val_seqs = gather(fa.val_ids);
        auto test_seqs = gather(fa.test_ids);

        TrainConfig cfg = base;
        cfg.seed = opts.seed + static_cast<std::uint64_t>(f);
        FoldOutcome fo;
        fo.name = "fold" + std::to_string(f);
        fo.result = nnet::train(opts.task, train_seqs, val_seqs, cfg, fo.name);
        for (double v : fo.result.history.val_loss) fo.best_val = std::min(fo.best_val, v);

        const RecurrentModel& model = fo.result.model;
        if (timing) {
            for (const auto& seq : test_seqs) {
                auto events = nnet::predict_events(model, nullptr, seq.states, st.threshold);
                std::vector<int> pred_flags(seq.states.size(), 0);
                std::vector<double> pred_times;
                for (const auto& e : events) {
                    pred_times.push_back(e.t);
                    int i = step_index(seq, e.t, step_s);
                    if (i >= 0) pred_flags[static_cast<std::size_t>(i)] = 1;
                }
                auto trues = true_onsets(seq, step_s);
                fo.pool.counts += margin_match(pred_times, trues);
                fo.pool.total_steps += static_cast<long>(seq.states.size());
                for (std::size_t i = 0; i < seq.states.size(); ++i) {
                    fo.pool.step_preds.push_back(pred_flags[i]);
                    fo.pool.step_labels.push_back(seq.timing_labels[i]);
                }
                auto& yy = fo.pool.per_listener[seq.segment.listener_id];
                yy.first += static_cast<long>(trues.size());
                yy.second += static_cast<long>(pred_times.size());
            }
            fo.report = fo.pool.finish(2, true);
        } else {
            const int lb = model.lookback;
            for (const auto& seq : test_seqs) {
                auto norm = apply_norm(seq.states, model.norm_stats);
                for (std::size_t i = static_cast<std::size_t>(lb) - 1; i < norm.size(); ++i) {
                    if (seq.timing_labels[i] != 1 || seq.type_labels[i] < 0) continue;
                    Window w;
                    for (std::size_t j = i + 1 - static_cast<std::size_t>(lb); j <= i; ++j)
                        w.push_back(to_vec(norm[j]));
                    Rng dummy(0);
                    Vec out = nnet::forward_window(model, w, false, dummy);
                    fo.pool.step_preds.push_back(argmax_first(out));
                    fo.pool.step_labels.push_back(seq.type_labels[i]);
                }
                fo.pool.total_steps += static_cast<long>(seq.states.size());
            }
            fo.report = fo.pool.finish(3, false);
        }
        outcomes.push_back(std::move(fo));
    }

    std::size_t selected = 0;
    for (std::size_t i = 1; i < outcomes.size(); ++i)
        if (outcomes[i].best_val < outcomes[selected].best_val) selected = i;

    RecurrentModel model = outcomes[selected].result.model;
    model.threshold = st.threshold;
    nnet::save_model(opts.out_model, model);

    ReportPool all;
    for (const auto& fo : outcomes) {
        all.step_preds.insert(all.step_preds.end(), fo.pool.step_preds.begin(),
                              fo.pool.step_preds.end());
        all.step_labels.insert(all.step_labels.end(), fo.pool.step_labels.begin(),
                               fo.pool.step_labels.end());
        all.counts += fo.pool.counts;
        all.total_steps += fo.pool.total_steps;
        for (const auto& [id, yy] : fo.pool.per_listener) {
            auto& acc = all.per_listener[id];
            acc.first += yy.first;
            acc.second += yy.second;
        }
    }
    MetricsReport aggregate = all.finish(timing ? 2 : 3, timing);
    std::string report_path = opts.out_report.empty() ? opts.out_model + ".metrics.json"
                                                      : opts.out_report;
    save_metrics_report(report_path, aggregate);

    json hist;
    hist["task"] = nnet::to_string(opts.task);
    hist["config"] = train_config_json(base);
    hist["folds"] = json::array();
    for (const auto& fo : outcomes) {
        json jf;
        jf["name"] = fo.name;
        jf["train_loss"] = fo.result.history.train_loss;
        jf["val_loss"] = fo.result.history.val_loss;
        jf["stop_epoch"] = fo.result.history.stop_epoch;
        jf["stop_reason"] = fo.result.history.stop_reason;
        jf["best_val_loss"] = fo.best_val;
        jf["test"] = json::parse(metrics_report_json(fo.report));
        hist["folds"].push_back(jf);
    }
    hist["selected_fold"] = selected;
    hist["selected_fold_name"] = outcomes[selected].name;
    std::string hist_path = opts.out_history.empty() ? opts.out_model + ".history.json"
                                                     : opts.out_history;
    write_text(hist_path, hist.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// shared decision pipeline (predict / stream)

namespace {

struct TimedAction {
    double t = 0.0;
    BcAction action = BcAction::vocal;
};

std::vector<TimedAction> poisson_actions(double start_s, double end_s, double rate_per_min,
                                         Rng& rng) {
    std::vector<TimedAction> out;
    double rate = rate_per_min / 60.0;
    if (rate <= 0.0) return out;
    double t = start_s;
    for (;;) {
        t += -std::log(1.0 - rng.uniform01()) / rate;
        if (t >= end_s) break;
        TimedAction a;
        a.t = t;
        a.action = static_cast<BcAction>(rng.uniform_int(3));
        out.push_back(a);
    }
    return out;
}

struct LoadedModels {
    std::optional<RecurrentModel> timing;
    std::optional<RecurrentModel> type;
};

LoadedModels load_models(const std::string& timing_path, const std::string& type_path,
                         Policy policy) {
    LoadedModels m;
    if (!timing_path.empty()) {
        require_readable(timing_path);
        m.timing = nnet::load_model(timing_path);
    }
    if (!type_path.empty()) {
        require_readable(type_path);
        m.type = nnet::load_model(type_path);
    }
    if (policy == Policy::learned && (!m.timing || !m.type))
        throw ConfigError("the learned policy needs both --timing-model and --type-model");
    return m;
}

std::vector<TimedAction> decide(Policy policy, const Features& feats, const Settings& st,
                                const LoadedModels& models, double duration_s, Rng& rng) {
    std::vector<TimedAction> out;
    switch (policy) {
    case Policy::naive: {
        std::vector<double> pitch;
        std::vector<bool> voiced;
        pitch.reserve(feats.ticks.size());
        voiced.reserve(feats.ticks.size());
        for (const auto& tk : feats.ticks) {
            pitch.push_back(tk.pitch_hz);
            voiced.push_back(tk.speech);
        }
        for (const auto& d : run_offline(pitch, voiced, st.heuristic, rng))
            out.push_back({d.t, to_action(d.bc_type)});
        break;
    }
    case Policy::learned: {
        auto preds = nnet::predict_events(*models.timing, &*models.type, feats.states,
                                          st.threshold);
        for (const auto& p : preds) out.push_back({p.t, to_action(p.type)});
        break;
    }
    case Policy::random:
        out = poisson_actions(0.0, duration_s, st.random_rate_per_min, rng);
        break;
    }
    return out;
}

double session_duration(const Features& feats, const Settings& st) {
    double from_states = static_cast<double>(feats.states.size()) * st.dsp.agg_window_s;
    double from_ticks = static_cast<double>(feats.ticks.size()) * st.heuristic.tick_s;
    return std::max(from_states, from_ticks);
}

// Root RNG layout shared by predict and stream: one child stream per concern
// so enabling gaze never shifts the backchannel decisions.
struct SessionRngs {
    Rng decision;
    Rng realize;
    Rng gaze;

    explicit SessionRngs(std::uint64_t seed)
        : decision(Rng(seed).split(1)), realize(Rng(seed).split(2)), gaze(Rng(seed).split(3)) {}
};

std::vector<SessionEvent> build_session(Policy policy, const Features& feats, const Settings& st,
                                        const LoadedModels& models, std::uint64_t seed,
                                        bool with_gaze, std::vector<double>* bc_times_out) {
    SessionRngs rngs(seed);
    double duration = session_duration(feats, st);
    auto actions = decide(policy, feats, st, models, duration, rngs.decision);

    std::vector<BCEvent> bc;
    bc.reserve(actions.size());
    for (const auto& a : actions) bc.push_back(realize(a.t, a.action, rngs.realize, st.behavior));
    if (bc_times_out) {
        bc_times_out->clear();
        for (const auto& a : actions) bc_times_out->push_back(a.t);
    }

    std::vector<GazeTransition> gaze;
    if (with_gaze) gaze = gaze_schedule(duration, rngs.gaze, st.behavior);
    return merge_streams(bc, gaze);
}

} // namespace

// ---------------------------------------------------------------------------
// predict

namespace {

MetricsReport truth_report(const std::vector<double>& bc_times, const std::string& truth_path,
                           const std::string& listener_arg, std::size_t n_steps, double step_s) {
    require_readable(truth_path);
    auto tracks = load_annotations(truth_path);
    const AnnotationTrack* listener = nullptr;
    if (!listener_arg.empty()) {
        for (const auto& t : tracks)
            if (t.participant_id == listener_arg) listener = &t;
        if (!listener)
            throw ConfigError("participant " + listener_arg + " not found in " + truth_path);
    } else if (tracks.size() == 1) {
        listener = &tracks.front();
    } else {
        throw ConfigError("--listener is required when the annotation file has multiple "
                          "participants");
    }

    std::vector<double> truth_onsets;
    for (const auto& iv : listener->intervals)
        if (iv.label != Label::speech) truth_onsets.push_back(iv.start_s);

    ReportPool pool;
    pool.total_steps = static_cast<long>(n_steps);
    pool.counts = margin_match(bc_times, truth_onsets);

    std::vector<int> pred_flags(n_steps, 0), true_flags(n_steps, 0);
    for (double t : bc_times) {
        long k = static_cast<long>(std::floor(t / step_s + 1e-9));
        if (k >= 0 && k < static_cast<long>(n_steps)) pred_flags[static_cast<std::size_t>(k)] = 1;
    }
    for (double t : truth_onsets) {
        long k = static_cast<long>(std::floor(t / step_s + 1e-9));
        if (k >= 0 && k < static_cast<long>(n_steps)) true_flags[static_cast<std::size_t>(k)] = 1;
    }
    pool.step_preds.assign(pred_flags.begin(), pred_flags.end());
    pool.step_labels.assign(true_flags.begin(), true_flags.end());
    pool.per_listener[listener->participant_id] = {static_cast<long>(truth_onsets.size()),
                                                   static_cast<long>(bc_times.size())};
    return pool.finish(2, true);
}

} // namespace

void run_predict(const PredictOptions& opts, const Settings& st) {
    require_readable(opts.features);
    Features feats;
    feats.states = read_state_csv(opts.features);
    if (opts.policy == Policy::naive) {
        std::string pros = opts.prosody.empty() ? default_sidecar(opts.features) : opts.prosody;
        require_readable(pros);
        feats.ticks = read_prosody_csv(pros);
    }

    LoadedModels models = load_models(opts.timing_model, opts.type_model, opts.policy);

    std::vector<double> bc_times;
    auto session = build_session(opts.policy, feats, st, models, opts.seed, opts.gaze, &bc_times);
    save_event_log(opts.out_events, session);

    if (!opts.truth.empty()) {
        MetricsReport rep = truth_report(bc_times, opts.truth, opts.truth_listener,
                                         feats.states.size(), st.dsp.agg_window_s);
        std::string path = opts.out_report.empty() ? opts.out_events + ".metrics.json"
                                                   : opts.out_report;
        save_metrics_report(path, rep);
    }
}

// ---------------------------------------------------------------------------
// stream

void run_stream(const StreamOptions& opts, const Settings& st,
                const std::atomic<bool>* interrupted) {
    require_readable(opts.audio);
    AudioClip clip = load_wav(opts.audio);
    Features feats = extract_features(clip, st.dsp);
    quantize(feats); // match the values predict reads back from CSV

    LoadedModels models = load_models(opts.timing_model, opts.type_model, opts.policy);
    auto session = build_session(opts.policy, feats, st, models, opts.seed, opts.gaze, nullptr);

    auto stopped = [&] { return interrupted && interrupted->load(); };
    std::vector<SessionEvent> emitted;
    double prev_t = 0.0;
    for (const auto& ev : session) {
        if (opts.real_time_factor > 0.0) {
            double wait_s = (ev.t - prev_t) * opts.real_time_factor;
            auto deadline = std::chrono::steady_clock::now() +
                            std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(wait_s));
            while (!stopped() && std::chrono::steady_clock::now() < deadline) {
                auto remaining = deadline - std::chrono::steady_clock::now();
                auto chunk = std::min<std::chrono::steady_clock::duration>(
                    remaining, std::chrono::milliseconds(50));
                if (chunk.count() > 0) std::this_thread::sleep_for(chunk);
            }
        }
        if (stopped()) break;
        std::cout << serialize_event_log({ev}) << std::flush;
        emitted.push_back(ev);
        prev_t = ev.t;
    }
    if (!opts.out_events.empty()) save_event_log(opts.out_events, emitted);
}

// ---------------------------------------------------------------------------
// compare

void run_compare(const CompareOptions& opts, const Settings& st) {
    CorpusData corpus = load_corpus(opts.manifest, st, opts.cache_dir);
    const double step_s = st.dsp.agg_window_s;

    bool wants_learned = false;
    for (Policy p : opts.policies) wants_learned |= p == Policy::learned;
    LoadedModels models = load_models(opts.timing_model, opts.type_model,
                                      wants_learned ? Policy::learned : Policy::naive);

    std::error_code ec;
    fs::create_directories(opts.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + opts.out_dir);

    json summary;
    summary["policies"] = json::array();

    for (Policy policy : opts.policies) {
        std::string name = to_string(policy);
        Rng rng = Rng(opts.seed).split(fnv1a(name));

        ReportPool pool;
        std::vector<std::vector<double>> conv_onsets(corpus.conversations.size());

        for (std::size_t ci = 0; ci < corpus.conversations.size(); ++ci) {
            const auto& conv = corpus.conversations[ci];
            // Predicted onsets per listener in this conversation.
            std::map<std::string, std::vector<double>> preds;
            preds[conv.id_a];
            preds[conv.id_b];

            if (policy == Policy::naive) {
                for (const auto& speaker : {conv.id_a, conv.id_b}) {
                    const Features& f = conv.features.at(speaker);
                    std::vector<double> pitch;
                    std::vector<bool> voiced;
                    for (const auto& tk : f.ticks) {
                        pitch.push_back(tk.pitch_hz);
                        voiced.push_back(tk.speech);
                    }
                    auto decisions = run_offline(pitch, voiced, st.heuristic, rng);
                    for (const auto& d : decisions) {
                        for (const auto& seg : conv.segments) {
                            if (seg.speaker_id != speaker) continue;
                            if (d.t >= seg.start_s && d.t < seg.end_s) {
                                preds[seg.listener_id].push_back(d.t);
                                break;
                            }
                        }
                    }
                }
            } else if (policy == Policy::learned) {
                for (const auto& seq : conv.sequences) {
                    auto events = nnet::predict_events(*models.timing, &*models.type, seq.states,
                                                       st.threshold);
                    for (const auto& e : events) preds[seq.segment.listener_id].push_back(e.t);
                }
            } else {
                for (const auto& seg : conv.segments) {
                    auto actions = poisson_actions(seg.start_s, seg.end_s,
                                                   st.random_rate_per_min, rng);
                    for (const auto& a : actions) preds[seg.listener_id].push_back(a.t);
                }
            }

            // Margin + step pooling against the labeled sequences.
            for (const auto& [listener, times] : preds) {
                std::vector<double> trues;
                std::vector<const LabeledSequence*> seqs;
                for (const auto& seq : conv.sequences)
                    if (seq.segment.listener_id == listener) seqs.push_back(&seq);
                for (const auto* seq : seqs) {
                    auto t = true_onsets(*seq, step_s);
                    trues.insert(trues.end(), t.begin(), t.end());
                }
                std::vector<double> sorted_times = times;
                std::sort(sorted_times.begin(), sorted_times.end());
                pool.counts += margin_match(sorted_times, trues);
                auto& yy = pool.per_listener[listener];
                yy.first += static_cast<long>(trues.size());
                yy.second += static_cast<long>(times.size());

                for (const auto* seq : seqs) {
                    std::vector<int> pred_flags(seq->states.size(), 0);
                    for (double t : times) {
                        int i = step_index(*seq, t, step_s);
                        if (i >= 0) pred_flags[static_cast<std::size_t>(i)] = 1;
                    }
                    for (std::size_t i = 0; i < seq->states.size(); ++i) {
                        pool.step_preds.push_back(pred_flags[i]);
                        pool.step_labels.push_back(seq->timing_labels[i]);
                    }
                    pool.total_steps += static_cast<long>(seq->states.size());
                }
                auto& pooled = conv_onsets[ci];
                pooled.insert(pooled.end(), times.begin(), times.end());
            }
        }

        MetricsReport rep = pool.finish(2, true);
        std::string metrics_path = (fs::path(opts.out_dir) / ("metrics_" + name + ".json")).string();
        save_metrics_report(metrics_path, rep);

        for (std::size_t ci = 0; ci < corpus.conversations.size(); ++ci) {
            std::sort(conv_onsets[ci].begin(), conv_onsets[ci].end());
            auto series = bc_rate_series(conv_onsets[ci], corpus.conversations[ci].duration_s);
            std::string rate_path = (fs::path(opts.out_dir) /
                                     ("rate_" + name + "_conv" + std::to_string(ci + 1) + ".csv"))
                                        .string();
            save_rate_series(rate_path, series);
        }

        json jp = json::parse(metrics_report_json(rep));
        jp["name"] = name;
        summary["policies"].push_back(jp);
    }

    write_text((fs::path(opts.out_dir) / "compare.json").string(), summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// metrics

void run_metrics(const MetricsOptions& opts, const Settings& st) {
    require_readable(opts.events);
    auto session = load_event_log(opts.events);

    std::vector<double> onsets;
    long n_vocal = 0, n_nod = 0, n_both = 0, n_gaze = 0;
    for (const auto& ev : session) {
        if (ev.kind == SessionEvent::Kind::bc) {
            onsets.push_back(ev.t);
            switch (ev.bc.action) {
            case BcAction::vocal: ++n_vocal; break;
            case BcAction::nod: ++n_nod; break;
            case BcAction::both: ++n_both; break;
            }
        } else {
            ++n_gaze;
        }
    }

    std::optional<AudioClip> clip;
    if (!opts.audio.empty()) {
        require_readable(opts.audio);
        clip = load_wav(opts.audio);
    }
    double duration = opts.duration_s;
    if (duration <= 0.0 && clip) duration = clip->duration_s();
    if (duration <= 0.0 && !session.empty()) duration = session.back().t;

    auto series = bc_rate_series(onsets, duration);
    std::string rate_path = opts.out_rate_csv.empty() ? opts.events + ".rate.csv"
                                                      : opts.out_rate_csv;
    save_rate_series(rate_path, series);

    json j;
    j["bc_count"] = onsets.size();
    j["duration_s"] = duration;
    j["bc_per_minute"] = duration > 0.0 ? static_cast<double>(onsets.size()) / duration * 60.0
                                        : 0.0;
    j["actions"] = {{"vocal", n_vocal}, {"nod", n_nod}, {"both", n_both}};
    j["gaze_transitions"] = n_gaze;
    if (clip) {
        auto intervals = vad(*clip, st.dsp.vad);
        EngagementMetrics em = engagement_metrics(intervals, duration);
        json je;
        je["utterance_count"] = em.utterance_count;
        je["utterances_per_second"] = em.utterances_per_second;
        je["mean_duration_s"] = em.mean_duration_s;
        if (std::isinf(em.speech_to_silence))
            je["speech_to_silence"] = "inf";
        else
            je["speech_to_silence"] = em.speech_to_silence;
        j["engagement"] = je;
    } else {
        j["engagement"] = nullptr;
    }

    std::string report_path = opts.out_report.empty() ? opts.events + ".analytics.json"
                                                      : opts.out_report;
    write_text(report_path, j.dump(2) + "\n");
}

} // namespace bc
