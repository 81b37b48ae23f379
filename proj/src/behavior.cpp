#include "bc/behavior.hpp"

#include "bc/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace bc {

std::string to_string(BcAction a) {
    switch (a) {
        case BcAction::vocal: return "vocal";
        case BcAction::nod: return "nod";
        case BcAction::both: return "both";
    }
    throw ValidationError("unknown action");
}

BcAction action_from_string(const std::string& s) {
    if (s == "vocal") return BcAction::vocal;
    if (s == "nod") return BcAction::nod;
    if (s == "both") return BcAction::both;
    throw ParseError("unknown action: " + s);
}

BcAction to_action(BcType t) { return t == BcType::vocal ? BcAction::vocal : BcAction::nod; }

BcAction to_action(BcClass c) {
    switch (c) {
        case BcClass::vocal: return BcAction::vocal;
        case BcClass::nonvocal: return BcAction::nod;
        case BcClass::both: return BcAction::both;
    }
    throw ValidationError("unknown bc class");
}

std::string to_string(GazeMode m) { return m == GazeMode::at_user ? "at_user" : "away"; }

namespace {

double round_ms(double t) { return std::round(t * 1000.0) / 1000.0; }

} // namespace

BCEvent realize(double t, BcAction action, Rng& rng, const BehaviorConfig& cfg) {
    BCEvent e;
    e.t = t;
    e.action = action;
    if (action == BcAction::vocal || action == BcAction::both) {
        if (cfg.cue_set.empty()) throw ConfigError("realize: vocal action with an empty cue set");
        e.vocal_cue = cfg.cue_set[rng.uniform_int(cfg.cue_set.size())];
    }
    if (action == BcAction::nod || action == BcAction::both)
        e.nod_amplitude = rng.uniform(cfg.nod_amplitude_lo, cfg.nod_amplitude_hi);
    return e;
}

GazeState gaze_step(GazeState state, double t, Rng& rng, const BehaviorConfig& cfg) {
    while (t >= state.until_t) {
        bool to_away = state.mode == GazeMode::at_user;
        state.mode = to_away ? GazeMode::away : GazeMode::at_user;
        double lo = to_away ? cfg.gaze_away_lo_s : cfg.gaze_at_user_lo_s;
        double hi = to_away ? cfg.gaze_away_hi_s : cfg.gaze_at_user_hi_s;
        state.until_t += rng.uniform(lo, hi);
    }
    return state;
}

std::vector<GazeTransition> gaze_schedule(double duration_s, Rng& rng, const BehaviorConfig& cfg) {
    std::vector<GazeTransition> out;
    GazeState state{GazeMode::at_user, rng.uniform(cfg.gaze_at_user_lo_s, cfg.gaze_at_user_hi_s)};
    out.push_back({0.0, state.mode});
    while (state.until_t < duration_s) {
        double t = state.until_t;
        state = gaze_step(state, t, rng, cfg);
        out.push_back({t, state.mode});
    }
    return out;
}

std::vector<SessionEvent> merge_streams(const std::vector<BCEvent>& bc_events,
                                        const std::vector<GazeTransition>& gaze_transitions) {
    std::vector<SessionEvent> out;
    std::size_t bi = 0, gi = 0;
    while (bi < bc_events.size() || gi < gaze_transitions.size()) {
        bool take_gaze;
        if (gi >= gaze_transitions.size())
            take_gaze = false;
        else if (bi >= bc_events.size())
            take_gaze = true;
        else
            take_gaze = gaze_transitions[gi].t <= bc_events[bi].t;
        SessionEvent e;
        if (take_gaze) {
            e.kind = SessionEvent::Kind::gaze;
            e.t = gaze_transitions[gi].t;
            e.gaze = gaze_transitions[gi++];
        } else {
            e.kind = SessionEvent::Kind::bc;
            e.t = bc_events[bi].t;
            e.bc = bc_events[bi++];
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::string serialize_event_log(const std::vector<SessionEvent>& events) {
    std::ostringstream out;
    double prev_t = -1e300;
    for (const auto& e : events) {
        nlohmann::json j;
        double t = round_ms(e.t);
        if (t < prev_t) throw ValidationError("event log: timestamps must be non-decreasing");
        prev_t = t;
        j["t"] = t;
        if (e.kind == SessionEvent::Kind::gaze) {
            j["kind"] = "gaze";
            j["mode"] = to_string(e.gaze.mode);
        } else {
            j["kind"] = "bc";
            j["action"] = to_string(e.bc.action);
            j["hold_s"] = e.bc.hold_s;
            if (e.bc.vocal_cue) j["cue"] = *e.bc.vocal_cue;
            if (e.bc.nod_amplitude) j["amplitude"] = round_ms(*e.bc.nod_amplitude);
        }
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<SessionEvent> parse_event_log(const std::string& text) {
    std::vector<SessionEvent> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("event log line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            SessionEvent e;
            e.t = j.at("t").get<double>();
            std::string kind = j.at("kind").get<std::string>();
            if (kind == "gaze") {
                e.kind = SessionEvent::Kind::gaze;
                std::string mode = j.at("mode").get<std::string>();
                if (mode != "at_user" && mode != "away")
                    throw ParseError("event log line " + std::to_string(line_no) +
                                     ": unknown gaze mode " + mode);
                e.gaze = {e.t, mode == "at_user" ? GazeMode::at_user : GazeMode::away};
            } else if (kind == "bc") {
                e.kind = SessionEvent::Kind::bc;
                e.bc.t = e.t;
                e.bc.action = action_from_string(j.at("action").get<std::string>());
                if (j.contains("hold_s")) e.bc.hold_s = j.at("hold_s").get<double>();
                if (j.contains("cue")) e.bc.vocal_cue = j.at("cue").get<std::string>();
                if (j.contains("amplitude")) e.bc.nod_amplitude = j.at("amplitude").get<double>();
            } else {
                throw ParseError("event log line " + std::to_string(line_no) + ": unknown kind " +
                                 kind);
            }
            if (!out.empty() && e.t < out.back().t)
                throw ValidationError("event log line " + std::to_string(line_no) +
                                      ": timestamps must be non-decreasing");
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("event log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_event_log(const std::string& path, const std::vector<SessionEvent>& events) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << serialize_event_log(events);
    if (!out) throw IoError("write failed: " + path);
}

std::vector<SessionEvent> load_event_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_event_log(ss.str());
}

} // namespace bc
