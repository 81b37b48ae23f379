#include "bc/dsp.hpp"

#include "bc/errors.hpp"
#include "bc/fft.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace bc {

double FrameFeatures::component(int i) const {
    if (i < 13) return mfcc[static_cast<std::size_t>(i)];
    switch (i) {
        case 13: return pitch_hz;
        case 14: return d_pitch;
        case 15: return yin_energy;
        case 16: return d_energy;
        default: throw ValidationError("frame component index out of range");
    }
}

namespace {

std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                      static_cast<double>(n - 1));
    return w;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filter bank over power-spectrum bins.
class MelBank {
public:
    MelBank(int sample_rate, std::size_t fft_size, const MfccConfig& cfg)
        : n_filters_(cfg.n_filters), n_bins_(fft_size / 2 + 1) {
        double mel_lo = hz_to_mel(cfg.f_lo_hz);
        double mel_hi = hz_to_mel(std::min(cfg.f_hi_hz, sample_rate / 2.0));
        std::vector<double> edges(static_cast<std::size_t>(n_filters_) + 2);
        for (std::size_t i = 0; i < edges.size(); ++i)
            edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                              static_cast<double>(n_filters_ + 1));
        weights_.assign(static_cast<std::size_t>(n_filters_) * n_bins_, 0.0);
        double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);
        for (int f = 0; f < n_filters_; ++f) {
            double lo = edges[static_cast<std::size_t>(f)];
            double mid = edges[static_cast<std::size_t>(f) + 1];
            double hi = edges[static_cast<std::size_t>(f) + 2];
            for (std::size_t b = 0; b < n_bins_; ++b) {
                double hz = static_cast<double>(b) * bin_hz;
                double w = 0.0;
                if (hz > lo && hz < mid) w = (hz - lo) / (mid - lo);
                else if (hz >= mid && hz < hi) w = (hi - hz) / (hi - mid);
                weights_[static_cast<std::size_t>(f) * n_bins_ + b] = w;
            }
        }
    }

    std::vector<double> apply(const std::vector<double>& power) const {
        std::vector<double> out(static_cast<std::size_t>(n_filters_), 0.0);
        for (int f = 0; f < n_filters_; ++f) {
            const double* w = &weights_[static_cast<std::size_t>(f) * n_bins_];
            double acc = 0.0;
            for (std::size_t b = 0; b < n_bins_; ++b) acc += w[b] * power[b];
            out[static_cast<std::size_t>(f)] = acc;
        }
        return out;
    }

private:
    int n_filters_;
    std::size_t n_bins_;
    std::vector<double> weights_;
};

const MelBank& cached_bank(int sample_rate, std::size_t fft_size, const MfccConfig& cfg) {
    static std::mutex mu;
    static std::map<std::tuple<int, std::size_t, int, double, double>, MelBank> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(sample_rate, fft_size, cfg.n_filters, cfg.f_lo_hz, cfg.f_hi_hz);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, MelBank(sample_rate, fft_size, cfg)).first;
    return it->second;
}

} // namespace

std::vector<Frame> frame_signal(const AudioClip& clip, const DspConfig& cfg) {
    if (clip.sample_rate <= 0) throw ValidationError("sample rate must be positive");
    std::size_t win = static_cast<std::size_t>(
        std::lround(cfg.frame_window_ms * clip.sample_rate / 1000.0));
    std::size_t hop = static_cast<std::size_t>(
        std::lround(cfg.frame_hop_ms * clip.sample_rate / 1000.0));
    if (clip.samples.size() < win)
        throw ValidationError("clip shorter than one analysis window");
    std::size_t n_frames = (clip.samples.size() - win) / hop + 1;
    std::vector<double> window = hamming_window(win);
    std::vector<Frame> frames;
    frames.reserve(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
        Frame f;
        f.t_center = (static_cast<double>(i * hop) + static_cast<double>(win) / 2.0) /
                     clip.sample_rate;
        f.samples.resize(win);
        const double* src = clip.samples.data() + i * hop;
        for (std::size_t j = 0; j < win; ++j) f.samples[j] = src[j] * window[j];
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<double> mfcc13(const std::vector<double>& windowed_frame, int sample_rate,
                           const MfccConfig& cfg) {
    std::size_t fft_size = next_pow2(windowed_frame.size());
    std::vector<double> power = power_spectrum(windowed_frame, fft_size);
    const MelBank& bank = cached_bank(sample_rate, fft_size, cfg);
    std::vector<double> energies = bank.apply(power);
    std::vector<double> log_e(energies.size());
    for (std::size_t i = 0; i < energies.size(); ++i)
        log_e[i] = std::log(std::max(energies[i], cfg.log_floor));
    // DCT-II, orthonormal-ish scale; c0 is dropped
    std::vector<double> coeffs(static_cast<std::size_t>(cfg.n_coeffs));
    double n = static_cast<double>(cfg.n_filters);
    double scale = std::sqrt(2.0 / n);
    for (int c = 1; c <= cfg.n_coeffs; ++c) {
        double acc = 0.0;
        for (int k = 0; k < cfg.n_filters; ++k)
            acc += log_e[static_cast<std::size_t>(k)] *
                   std::cos(M_PI * c * (k + 0.5) / n);
        coeffs[static_cast<std::size_t>(c - 1)] = scale * acc;
    }
    return coeffs;
}

YinResult yin(const std::vector<double>& frame, int sample_rate, double f_min_hz,
              double f_max_hz, double threshold) {
    if (f_min_hz >= f_max_hz || f_max_hz >= sample_rate / 2.0)
        throw ValidationError("require f_min < f_max < sample_rate/2");
    std::size_t n = frame.size();
    std::size_t tau_max = static_cast<std::size_t>(std::floor(sample_rate / f_min_hz));
    std::size_t tau_min = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::floor(sample_rate / f_max_hz)));
    if (n < tau_max + 8 || tau_min >= tau_max) return {0.0, 0.0};

    // integration window; long frames use a centered slice to bound cost
    std::size_t w = std::min<std::size_t>(n - tau_max, 2048);
    std::size_t offset = (n - (w + tau_max)) / 2;
    const double* x = frame.data() + offset;

    std::vector<double> diff(tau_max + 1, 0.0);
    for (std::size_t tau = 1; tau <= tau_max; ++tau) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
            double d = x[j] - x[j + tau];
            acc += d * d;
        }
        diff[tau] = acc;
    }

    std::vector<double> cmnd(tau_max + 1, 1.0);
    double running = 0.0;
    for (std::size_t tau = 1; tau <= tau_max; ++tau) {
        running += diff[tau];
        cmnd[tau] = running > 0.0 ? diff[tau] * static_cast<double>(tau) / running : 1.0;
    }

    std::size_t tau_star = 0;
    for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
        if (cmnd[tau] < threshold) {
            while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
            tau_star = tau;
            break;
        }
    }
    if (tau_star == 0) return {0.0, 0.0};

    double refined = static_cast<double>(tau_star);
    if (tau_star > 0 && tau_star < tau_max) {
        double s0 = cmnd[tau_star - 1];
        double s1 = cmnd[tau_star];
        double s2 = cmnd[tau_star + 1];
        double denom = 2.0 * (2.0 * s1 - s2 - s0);
        if (std::abs(denom) > 1e-12) refined += (s2 - s0) / denom;
    }
    YinResult out;
    out.pitch_hz = sample_rate / refined;
    out.energy = std::clamp(1.0 - cmnd[tau_star], 0.0, 1.0);
    return out;
}

std::vector<FrameFeatures> frame_features(const AudioClip& clip, const DspConfig& cfg) {
    std::vector<Frame> frames = frame_signal(clip, cfg);
    std::vector<FrameFeatures> feats(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        FrameFeatures& f = feats[i];
        f.t = frames[i].t_center;
        std::vector<double> c = mfcc13(frames[i].samples, clip.sample_rate, cfg.mfcc);
        std::copy(c.begin(), c.end(), f.mfcc.begin());
        YinResult y = yin(frames[i].samples, clip.sample_rate, cfg.f_min_hz, cfg.f_max_hz,
                          cfg.yin_threshold);
        f.pitch_hz = y.pitch_hz;
        f.yin_energy = y.energy;
        if (i == 0) {
            f.d_pitch = 0.0;
            f.d_energy = 0.0;
        } else {
            f.d_pitch = f.pitch_hz - feats[i - 1].pitch_hz;
            f.d_energy = f.yin_energy - feats[i - 1].yin_energy;
        }
    }
    return feats;
}

std::vector<StateVector> aggregate(const std::vector<FrameFeatures>& frames, double duration_s,
                                   double window_s) {
    if (window_s <= 0.0) throw ValidationError("aggregation window must be positive");
    std::size_t n_windows = static_cast<std::size_t>(std::floor(duration_s / window_s + 1e-9));
    std::vector<StateVector> states;
    states.reserve(n_windows);
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < n_windows; ++k) {
        double lo = static_cast<double>(k) * window_s;
        double hi = lo + window_s;
        while (cursor < frames.size() && frames[cursor].t < lo) ++cursor;
        std::size_t first = cursor;
        std::size_t last = first;
        while (last < frames.size() && frames[last].t < hi) ++last;

        StateVector sv;
        sv.t = hi;
        std::size_t count = last - first;
        if (count == 0) {
            sv.gap = true;
        } else {
            for (int d = 0; d < FrameFeatures::kDims; ++d) {
                double sum = 0.0;
                for (std::size_t i = first; i < last; ++i) sum += frames[i].component(d);
                double mean = sum / static_cast<double>(count);
                double var = 0.0;
                for (std::size_t i = first; i < last; ++i) {
                    double diff = frames[i].component(d) - mean;
                    var += diff * diff;
                }
                var /= static_cast<double>(count); // population std
                sv.values[static_cast<std::size_t>(d)] = mean;
                sv.values[static_cast<std::size_t>(d) + FrameFeatures::kDims] = std::sqrt(var);
            }
        }
        cursor = last;
        states.push_back(sv);
    }
    return states;
}

NormStats fit_norm(const std::vector<StateVector>& states) {
    if (states.empty()) throw DataError("cannot fit normalization on empty data");
    NormStats stats;
    double n = static_cast<double>(states.size());
    for (int d = 0; d < StateVector::kDims; ++d) {
        double sum = 0.0;
        for (const auto& s : states) sum += s.values[static_cast<std::size_t>(d)];
        double mean = sum / n;
        double var = 0.0;
        for (const auto& s : states) {
            double diff = s.values[static_cast<std::size_t>(d)] - mean;
            var += diff * diff;
        }
        var /= n;
        stats.mean[static_cast<std::size_t>(d)] = mean;
        // floored so constant dimensions map to 0 instead of blowing up
        stats.std[static_cast<std::size_t>(d)] = std::max(std::sqrt(var), 1e-6);
    }
    return stats;
}

std::vector<StateVector> apply_norm(const std::vector<StateVector>& states,
                                    const NormStats& stats) {
    std::vector<StateVector> out = states;
    for (auto& s : out)
        for (int d = 0; d < StateVector::kDims; ++d) {
            std::size_t i = static_cast<std::size_t>(d);
            s.values[i] = (s.values[i] - stats.mean[i]) / stats.std[i];
        }
    return out;
}

std::vector<bool> vad_flags(const AudioClip& clip, const VadConfig& cfg) {
    std::size_t frame = static_cast<std::size_t>(
        std::lround(cfg.frame_ms * clip.sample_rate / 1000.0));
    if (frame == 0) throw ValidationError("vad frame too short");
    std::size_t n = clip.samples.size() / frame;
    std::vector<double> rms(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* x = clip.samples.data() + i * frame;
        for (std::size_t j = 0; j < frame; ++j) acc += x[j] * x[j];
        rms[i] = std::sqrt(acc / static_cast<double>(frame));
    }
    std::vector<bool> voiced(n, false);
    if (n == 0) return voiced;
    std::vector<double> sorted = rms;
    std::sort(sorted.begin(), sorted.end());
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(n)));
    double ref = sorted[rank > 0 ? rank - 1 : 0];
    if (ref <= 1e-12) return voiced; // effectively silent clip
    double threshold = ref * std::pow(10.0, cfg.threshold_db / 20.0);
    for (std::size_t i = 0; i < n; ++i) voiced[i] = rms[i] > threshold;

    // bridge sub-hangover gaps between voiced runs
    std::size_t hang = static_cast<std::size_t>(std::lround(cfg.hangover_ms / cfg.frame_ms));
    std::size_t i = 0;
    std::size_t last_voiced_end = 0;
    bool seen_voiced = false;
    while (i < n) {
        if (voiced[i]) {
            if (seen_voiced && i - last_voiced_end < hang)
                for (std::size_t j = last_voiced_end; j < i; ++j) voiced[j] = true;
            while (i < n && voiced[i]) ++i;
            last_voiced_end = i;
            seen_voiced = true;
        } else {
            ++i;
        }
    }
    return voiced;
}

std::vector<Interval> vad(const AudioClip& clip, const VadConfig& cfg) {
    std::vector<bool> flags = vad_flags(clip, cfg);
    std::vector<Interval> out;
    double dt = cfg.frame_ms / 1000.0;
    std::size_t i = 0;
    while (i < flags.size()) {
        if (!flags[i]) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < flags.size() && flags[i]) ++i;
        out.push_back({static_cast<double>(start) * dt, static_cast<double>(i) * dt});
    }
    return out;
}

std::vector<ProsodyTick> prosody_stream(const AudioClip& clip, const DspConfig& cfg) {
    std::size_t tick = static_cast<std::size_t>(
        std::lround(cfg.tick_ms * clip.sample_rate / 1000.0));
    std::size_t win = static_cast<std::size_t>(
        std::lround(cfg.tick_window_ms * clip.sample_rate / 1000.0));
    if (tick == 0 || win == 0) throw ValidationError("prosody tick parameters too small");
    std::size_t n = clip.samples.size() / tick;
    std::vector<bool> flags = vad_flags(clip, cfg.vad);
    std::vector<ProsodyTick> ticks(n);
    std::vector<double> buf(win);
    for (std::size_t i = 0; i < n; ++i) {
        ticks[i].t = static_cast<double>(i * tick) / clip.sample_rate;
        ticks[i].speech = i < flags.size() ? flags[i] : false;
        if (i * tick + win <= clip.samples.size()) {
            std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(i * tick), win,
                        buf.begin());
            YinResult y = yin(buf, clip.sample_rate, cfg.f_min_hz, cfg.f_max_hz,
                              cfg.yin_threshold);
            ticks[i].pitch_hz = y.pitch_hz;
        }
    }
    return ticks;
}

Features extract_features(const AudioClip& clip, const DspConfig& cfg) {
    Features out;
    std::vector<FrameFeatures> frames = frame_features(clip, cfg);
    out.states = aggregate(frames, clip.duration_s(), cfg.agg_window_s);
    out.ticks = prosody_stream(clip, cfg);
    return out;
}

void write_state_csv(const std::string& path, const std::vector<StateVector>& states) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t";
    for (int i = 1; i <= StateVector::kDims; ++i) out << ",f" << i;
    out << "\n";
    char buf[40];
    for (const auto& s : states) {
        std::snprintf(buf, sizeof(buf), "%.9g", s.t);
        out << buf;
        for (double v : s.values) {
            std::snprintf(buf, sizeof(buf), "%.9g", v);
            out << "," << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<StateVector> read_state_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty feature file: " + path);
    std::vector<StateVector> states;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        StateVector sv;
        if (!std::getline(ss, cell, ',')) continue;
        try {
            sv.t = std::stod(cell);
            for (int i = 0; i < StateVector::kDims; ++i) {
                if (!std::getline(ss, cell, ','))
                    throw ParseError("short row");
                sv.values[static_cast<std::size_t>(i)] = std::stod(cell);
            }
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad feature row");
        }
        states.push_back(sv);
    }
    return states;
}

void write_prosody_csv(const std::string& path, const std::vector<ProsodyTick>& ticks) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "t,pitch_hz,voiced\n";
    char buf[40];
    for (const auto& tk : ticks) {
        std::snprintf(buf, sizeof(buf), "%.9g", tk.t);
        out << buf << ",";
        std::snprintf(buf, sizeof(buf), "%.9g", tk.pitch_hz);
        out << buf << "," << (tk.speech ? 1 : 0) << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<ProsodyTick> read_prosody_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty prosody file: " + path);
    std::vector<ProsodyTick> ticks;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string t, pitch, voiced;
        if (!std::getline(ss, t, ',') || !std::getline(ss, pitch, ',') ||
            !std::getline(ss, voiced, ','))
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad prosody row");
        ProsodyTick tk;
        try {
            tk.t = std::stod(t);
            tk.pitch_hz = std::stod(pitch);
            tk.speech = std::stoi(voiced) != 0;
        } catch (const std::exception&) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad prosody row");
        }
        ticks.push_back(tk);
    }
    return ticks;
}

} // namespace bc
