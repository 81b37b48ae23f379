#pragma once

#include "bc/rng.hpp"

#include <deque>
#include <optional>
#include <string>
#include <vector>

namespace bc {

struct HeuristicConfig {
    double percentile_threshold = 26.0; // low-pitch trigger, strictly below
    double min_region_s = 0.110;        // low-pitch run must last this long
    double min_speech_s = 0.700;        // continuous speech required at the run's last tick
    double cooldown_s = 0.800;          // minimum gap between decisions, checked at emission
    double emission_delay_s = 0.700;    // wait after the low-pitch run ends
    double buffer_window_s = 50.0;      // trailing span of the pitch distribution
    double min_history_s = 5.0;         // voiced history required before triggering
    double tick_s = 0.010;
};

enum class BcType { vocal = 0, nonvocal = 1 };

std::string to_string(BcType t);

struct BCDecision {
    double t = 0.0;
    BcType bc_type = BcType::vocal;
};

struct HeuristicState {
    struct PitchSample {
        double t;
        double pitch_hz;
    };
    std::deque<PitchSample> pitch_buffer;     // voiced ticks in the trailing window
    double speech_run_s = 0.0;                // current continuous-speech duration
    double last_bc_t = -1e300;
    std::optional<double> low_region_start;   // open low-pitch run, if any
    double low_region_last_t = 0.0;           // last tick of the open run
    double low_region_last_run_s = 0.0;       // speech run length at that tick
    std::deque<double> pending_emissions;     // scheduled decision times, ascending
    std::optional<double> last_t;             // time of the previous step call
};

// Fraction of buffered pitches strictly below value, as a percentage.
// Empty buffer has no defined percentile.
std::optional<double> percentile_of(const std::vector<double>& pitches, double value);

// Advance one 10 ms tick. pitch_hz <= 0 means unvoiced; vad_voiced is the
// energy VAD flag. Returns a decision when a scheduled emission fires.
std::optional<BCDecision> step(HeuristicState& state, const HeuristicConfig& cfg, double t,
                               double pitch_hz, bool vad_voiced, Rng& rng);

// Batch equivalent of calling step over aligned pitch/VAD streams whose tick i
// is at time i * cfg.tick_s.
std::vector<BCDecision> run_offline(const std::vector<double>& pitch_stream,
                                    const std::vector<bool>& vad_stream,
                                    const HeuristicConfig& cfg, Rng& rng);

} // namespace bc
