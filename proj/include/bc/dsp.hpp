#pragma once

#include "bc/audio.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace bc {

struct MfccConfig {
    int n_filters = 26;
    double f_lo_hz = 0.0;
    double f_hi_hz = 8000.0;
    double log_floor = 1e-10;
    int n_coeffs = 13; // c1..c13, c0 dropped
};

struct VadConfig {
    double frame_ms = 10.0;
    double threshold_db = -35.0; // relative to the 95th-percentile frame RMS
    double hangover_ms = 300.0;  // gaps shorter than this are bridged
};

struct DspConfig {
    double frame_window_ms = 400.0;
    double frame_hop_ms = 30.0;
    double agg_window_s = 0.5;
    MfccConfig mfcc;
    double f_min_hz = 60.0;
    double f_max_hz = 400.0;
    double yin_threshold = 0.15;
    double tick_ms = 10.0;        // prosody sidecar hop
    double tick_window_ms = 40.0; // prosody sidecar analysis window
    VadConfig vad;
};

// One Hamming-windowed analysis frame.
struct Frame {
    double t_center = 0.0;
    std::vector<double> samples;
};

struct FrameFeatures {
    static constexpr int kDims = 17; // 13 MFCC + pitch, d_pitch, yin_energy, d_energy

    double t = 0.0; // frame center
    std::array<double, 13> mfcc{};
    double pitch_hz = 0.0; // 0 when unvoiced
    double d_pitch = 0.0;
    double yin_energy = 0.0; // periodicity confidence in [0, 1]
    double d_energy = 0.0;

    double component(int i) const;
};

// 34 values: means of the 17 frame components, then their population stds.
struct StateVector {
    static constexpr int kDims = 34;

    double t = 0.0; // aggregation window end
    std::array<double, kDims> values{};
    bool gap = false; // no frames fell inside the window
};

struct NormStats {
    std::array<double, StateVector::kDims> mean{};
    std::array<double, StateVector::kDims> std{};
    std::string source_fold;
};

// 10 ms prosody tick for the rule-based policy.
struct ProsodyTick {
    double t = 0.0;       // tick start
    double pitch_hz = 0.0; // 0 when unvoiced
    bool speech = false;   // VAD flag
};

struct Interval {
    double start_s = 0.0;
    double end_s = 0.0;
};

struct YinResult {
    double pitch_hz = 0.0;
    double energy = 0.0;
};

// 400 ms Hamming frames every 30 ms. Throws ValidationError when the clip is
// shorter than one window.
std::vector<Frame> frame_signal(const AudioClip& clip, const DspConfig& cfg = {});

// Power spectrum -> mel filter bank -> floored log -> DCT-II, keeping c1..c13.
std::vector<double> mfcc13(const std::vector<double>& windowed_frame, int sample_rate,
                           const MfccConfig& cfg = {});

// Cumulative-mean-normalized difference with absolute threshold and parabolic
// interpolation. Unvoiced frames yield {0, 0}.
YinResult yin(const std::vector<double>& frame, int sample_rate, double f_min_hz,
              double f_max_hz, double threshold = 0.15);

// MFCC + pitch per frame, plus first-difference derivatives (first frame 0).
std::vector<FrameFeatures> frame_features(const AudioClip& clip, const DspConfig& cfg = {});

// 2 Hz aggregation over [k*w, (k+1)*w); emits floor(duration/w) windows.
std::vector<StateVector> aggregate(const std::vector<FrameFeatures>& frames, double duration_s,
                                   double window_s = 0.5);

NormStats fit_norm(const std::vector<StateVector>& states);
std::vector<StateVector> apply_norm(const std::vector<StateVector>& states, const NormStats& stats);

// Energy VAD over 10 ms frames; returns merged speech intervals.
std::vector<Interval> vad(const AudioClip& clip, const VadConfig& cfg = {});
std::vector<bool> vad_flags(const AudioClip& clip, const VadConfig& cfg = {});

// Pitch + VAD at the 10 ms tick grid, covering floor(duration/tick) ticks.
std::vector<ProsodyTick> prosody_stream(const AudioClip& clip, const DspConfig& cfg = {});

struct Features {
    std::vector<StateVector> states;
    std::vector<ProsodyTick> ticks;
};

// Full frontend: state vectors at 2 Hz plus the 10 ms prosody sidecar.
Features extract_features(const AudioClip& clip, const DspConfig& cfg = {});

// Feature CSV: header "t,f1,...,f34", 9 significant digits.
void write_state_csv(const std::string& path, const std::vector<StateVector>& states);
std::vector<StateVector> read_state_csv(const std::string& path);

// Prosody CSV: header "t,pitch_hz,voiced".
void write_prosody_csv(const std::string& path, const std::vector<ProsodyTick>& ticks);
std::vector<ProsodyTick> read_prosody_csv(const std::string& path);

} // namespace bc
