#include "bc/heuristic.hpp"

#include "bc/errors.hpp"

#include <cmath>

namespace bc {

std::string to_string(BcType t) {
    return t == BcType::vocal ? "vocal" : "nonvocal";
}

std::optional<double> percentile_of(const std::vector<double>& pitches, double value) {
    if (pitches.empty()) return std::nullopt;
    std::size_t below = 0;
    for (double p : pitches)
        if (p < value) ++below;
    return 100.0 * static_cast<double>(below) / static_cast<double>(pitches.size());
}

namespace {

// Closes an open low-pitch run and schedules its emission when it qualifies.
void close_region(HeuristicState& state, const HeuristicConfig& cfg) {
    if (!state.low_region_start) return;
    double region_end = state.low_region_last_t + cfg.tick_s;
    double duration = region_end - *state.low_region_start;
    bool long_enough = duration >= cfg.min_region_s - 1e-9;
    bool speech_ok = state.low_region_last_run_s >= cfg.min_speech_s - 1e-9;
    if (long_enough && speech_ok)
        state.pending_emissions.push_back(region_end + cfg.emission_delay_s);
    state.low_region_start.reset();
}

} // namespace

std::optional<BCDecision> step(HeuristicState& state, const HeuristicConfig& cfg, double t,
                               double pitch_hz, bool vad_voiced, Rng& rng) {
    if (state.last_t && t <= *state.last_t)
        throw ValidationError("heuristic step: non-increasing timestamp");
    state.last_t = t;

    // Fire scheduled emissions that have come due; the cooldown is judged at
    // emission time, so a due emission inside the cooldown is dropped.
    std::optional<BCDecision> fired;
    while (!state.pending_emissions.empty() && state.pending_emissions.front() <= t + 1e-9) {
        double e = state.pending_emissions.front();
        state.pending_emissions.pop_front();
        if (e - state.last_bc_t >= cfg.cooldown_s - 1e-9) {
            BCDecision d;
            d.t = e;
            d.bc_type = rng.uniform_int(2) == 0 ? BcType::vocal : BcType::nonvocal;
            state.last_bc_t = e;
            fired = d;
        }
    }

    state.speech_run_s = vad_voiced ? state.speech_run_s + cfg.tick_s : 0.0;

    while (!state.pitch_buffer.empty() &&
           state.pitch_buffer.front().t <= t - cfg.buffer_window_s + 1e-9)
        state.pitch_buffer.pop_front();

    bool voiced = pitch_hz > 0.0;
    bool low = false;
    std::size_t min_samples =
        static_cast<std::size_t>(std::llround(cfg.min_history_s / cfg.tick_s));
    if (voiced && state.pitch_buffer.size() >= min_samples) {
        std::size_t below = 0;
        for (const auto& s : state.pitch_buffer)
            if (s.pitch_hz < pitch_hz) ++below;
        double pct = 100.0 * static_cast<double>(below) /
                     static_cast<double>(state.pitch_buffer.size());
        low = pct < cfg.percentile_threshold;
    }

    if (low) {
        if (!state.low_region_start) state.low_region_start = t;
        state.low_region_last_t = t;
        state.low_region_last_run_s = state.speech_run_s;
    } else {
        close_region(state, cfg);
    }

    if (voiced) state.pitch_buffer.push_back({t, pitch_hz});

    return fired;
}

std::vector<BCDecision> run_offline(const std::vector<double>& pitch_stream,
                                    const std::vector<bool>& vad_stream,
                                    const HeuristicConfig& cfg, Rng& rng) {
    if (pitch_stream.size() != vad_stream.size())
        throw ValidationError("run_offline: pitch and VAD streams differ in length");
    HeuristicState state;
    std::vector<BCDecision> out;
    for (std::size_t i = 0; i < pitch_stream.size(); ++i) {
        double t = static_cast<double>(i) * cfg.tick_s;
        if (auto d = step(state, cfg, t, pitch_stream[i], vad_stream[i], rng)) out.push_back(*d);
    }
    return out;
}

} // namespace bc
