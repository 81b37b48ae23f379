#pragma once

#include "bc/corpus.hpp"
#include "bc/heuristic.hpp"
#include "bc/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bc {

enum class BcAction { vocal = 0, nod = 1, both = 2 };

std::string to_string(BcAction a);
BcAction action_from_string(const std::string& s);
BcAction to_action(BcType t);  // heuristic decisions: vocal or nod
BcAction to_action(BcClass c); // learned decisions: vocal, nonvocal -> nod, both

struct BehaviorConfig {
    std::vector<std::string> cue_set = {"hmm", "ahh", "uh-huh"};
    double nod_amplitude_lo = 0.1;
    double nod_amplitude_hi = 0.3;
    double gaze_at_user_lo_s = 3.0;
    double gaze_at_user_hi_s = 7.0;
    double gaze_away_lo_s = 1.0;
    double gaze_away_hi_s = 3.0;
};

struct BCEvent {
    double t = 0.0;
    BcAction action = BcAction::vocal;
    std::optional<std::string> vocal_cue;  // present iff action is vocal or both
    std::optional<double> nod_amplitude;   // present iff action is nod or both
    double hold_s = 0.5;
};

enum class GazeMode { at_user, away };

std::string to_string(GazeMode m);

struct GazeState {
    GazeMode mode = GazeMode::at_user;
    double until_t = 0.0;
};

struct GazeTransition {
    double t = 0.0;
    GazeMode mode = GazeMode::at_user;
};

BCEvent realize(double t, BcAction action, Rng& rng, const BehaviorConfig& cfg);

// Advances gaze to time t, flipping (possibly several times) whenever until_t
// is reached; each flip draws the new mode's duration.
GazeState gaze_step(GazeState state, double t, Rng& rng, const BehaviorConfig& cfg);

// Full listening-mode gaze schedule for a session, starting at_user at t = 0.
std::vector<GazeTransition> gaze_schedule(double duration_s, Rng& rng, const BehaviorConfig& cfg);

struct SessionEvent {
    enum class Kind { gaze, bc };
    Kind kind = Kind::bc;
    double t = 0.0;
    BCEvent bc;          // valid when kind == bc
    GazeTransition gaze; // valid when kind == gaze
};

// Stable time-ordered merge; equal timestamps put the gaze record first.
std::vector<SessionEvent> merge_streams(const std::vector<BCEvent>& bc_events,
                                        const std::vector<GazeTransition>& gaze_transitions);

// One JSON record per line, times rounded to ms, non-decreasing.
std::string serialize_event_log(const std::vector<SessionEvent>& events);
std::vector<SessionEvent> parse_event_log(const std::string& text);
void save_event_log(const std::string& path, const std::vector<SessionEvent>& events);
std::vector<SessionEvent> load_event_log(const std::string& path);

} // namespace bc
