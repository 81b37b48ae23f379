#include "bc/audio.hpp"

#include "bc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace bc {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u16(std::ofstream& out, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

} // namespace

AudioClip load_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open audio file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw ParseError("not a RIFF/WAVE file: " + path);

    // walk chunks for fmt and data
    std::size_t pos = 12;
    int channels = 0, bits = 0, rate = 0, format = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        std::uint32_t chunk_len = read_u32(hdr + 4);
        if (pos + 8 + chunk_len > bytes.size())
            throw ParseError("truncated WAV chunk in " + path);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw ParseError("short fmt chunk in " + path);
            format = read_u16(hdr + 8);
            channels = read_u16(hdr + 10);
            rate = static_cast<int>(read_u32(hdr + 12));
            bits = read_u16(hdr + 22);
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data = hdr + 8;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }
    if (channels == 0 || data == nullptr) throw ParseError("missing fmt or data chunk: " + path);
    if (channels != 1) throw ValidationError("expected mono audio: " + path);
    if (rate < 8000) throw ValidationError("sample rate below 8 kHz: " + path);

    AudioClip clip;
    clip.sample_rate = rate;
    if (format == 1 && bits == 16) {
        std::size_t n = data_len / 2;
        clip.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::int16_t s = static_cast<std::int16_t>(data[2 * i] | (data[2 * i + 1] << 8));
            clip.samples[i] = static_cast<double>(s) / 32768.0;
        }
    } else if (format == 3 && bits == 32) {
        std::size_t n = data_len / 4;
        clip.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, data + 4 * i, 4);
            clip.samples[i] = static_cast<double>(f);
        }
    } else {
        throw ParseError("unsupported WAV encoding (want 16-bit PCM or float32): " + path);
    }
    for (double s : clip.samples)
        if (!std::isfinite(s)) throw ValidationError("non-finite sample in " + path);

    if (clip.sample_rate != kSampleRate) clip = resample(clip, kSampleRate);
    return clip;
}

void save_wav(const std::string& path, const AudioClip& clip) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write audio file: " + path);
    std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
    out.write("RIFF", 4);
    write_u32(out, 36 + n * 2);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1); // PCM
    write_u16(out, 1); // mono
    write_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
    write_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
    write_u16(out, 2);
    write_u16(out, 16);
    out.write("data", 4);
    write_u32(out, n * 2);
    for (double s : clip.samples) {
        double c = std::clamp(s, -1.0, 1.0);
        std::int16_t v = static_cast<std::int16_t>(std::lround(c * 32767.0));
        unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 2);
    }
    if (!out) throw IoError("write failed: " + path);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
    if (clip.sample_rate == target_rate) return clip;
    AudioClip out;
    out.sample_rate = target_rate;
    if (clip.samples.empty()) return out;
    double ratio = static_cast<double>(clip.sample_rate) / target_rate;
    std::size_t n = static_cast<std::size_t>(
        std::floor(static_cast<double>(clip.samples.size() - 1) / ratio)) + 1;
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double src = i * ratio;
        std::size_t i0 = static_cast<std::size_t>(src);
        double frac = src - static_cast<double>(i0);
        std::size_t i1 = std::min(i0 + 1, clip.samples.size() - 1);
        out.samples[i] = clip.samples[i0] * (1.0 - frac) + clip.samples[i1] * frac;
    }
    return out;
}

} // namespace bc
