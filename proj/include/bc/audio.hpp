#pragma once

#include <string>
#include <vector>

namespace bc {

// Internal processing rate; all input audio is converted to this on load.
inline constexpr int kSampleRate = 16000;

struct AudioClip {
    std::vector<double> samples; // amplitudes in [-1, 1]
    int sample_rate = kSampleRate;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// Reads a mono WAV file (16-bit PCM or 32-bit float) and resamples to 16 kHz.
// Rates below 8 kHz and non-mono files are rejected.
AudioClip load_wav(const std::string& path);

// Writes 16-bit PCM mono. Samples are clamped to [-1, 1].
void save_wav(const std::string& path, const AudioClip& clip);

// Linear-interpolation resampler.
AudioClip resample(const AudioClip& clip, int target_rate);

} // namespace bc
