// Mono audio buffer and float32 WAV I/O.
#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "afwave/common.hpp"

namespace afwave {

struct AudioBuffer {
    std::vector<double> samples;
    double sample_rate = 48000.0;
    double start_time = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u16(std::string& s, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

} // namespace detail

// Serialize as WAV: mono, IEEE float32, little endian.
inline std::string wav_encode(const AudioBuffer& audio) {
    const std::uint32_t n = static_cast<std::uint32_t>(audio.samples.size());
    const std::uint32_t data_bytes = n * 4;
    const std::uint32_t rate = static_cast<std::uint32_t>(audio.sample_rate);
    std::string out;
    out.reserve(58 + data_bytes);
    out += "RIFF";
    detail::put_u32(out, 4 + 26 + 12 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    detail::put_u32(out, 18);
    detail::put_u16(out, 3); // IEEE float
    detail::put_u16(out, 1); // mono
    detail::put_u32(out, rate);
    detail::put_u32(out, rate * 4);
    detail::put_u16(out, 4);
    detail::put_u16(out, 32);
    detail::put_u16(out, 0); // cbSize
    out += "fact";
    detail::put_u32(out, 4);
    detail::put_u32(out, n);
    out += "data";
    detail::put_u32(out, data_bytes);
    for (double v : audio.samples) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32(out, bits);
    }
    return out;
}

inline void wav_write(const std::string& path, const AudioBuffer& audio) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open for writing: " + path);
    const std::string bytes = wav_encode(audio);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError("short write: " + path);
}

inline AudioBuffer wav_decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError("not a RIFF/WAVE file");
    AudioBuffer out;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::size_t pos = 12;
    bool have_fmt = false, have_data = false;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t len = detail::get_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + len > bytes.size()) throw FormatError("truncated WAV chunk");
        if (std::memcmp(id, "fmt ", 4) == 0 && len >= 16) {
            format = detail::get_u16(bytes.data() + body);
            channels = detail::get_u16(bytes.data() + body + 2);
            out.sample_rate = detail::get_u32(bytes.data() + body + 4);
            bits = detail::get_u16(bytes.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            if (!have_fmt) throw FormatError("WAV data chunk before fmt");
            if (format != 3 || channels != 1 || bits != 32)
                throw FormatError("unsupported WAV encoding (need mono float32)");
            const std::size_t n = len / 4;
            out.samples.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::uint32_t u = detail::get_u32(bytes.data() + body + 4 * i);
                float f;
                std::memcpy(&f, &u, 4);
                out.samples[i] = static_cast<double>(f);
            }
            have_data = true;
        }
        pos = body + len + (len & 1);
    }
    if (!have_data) throw FormatError("WAV file has no data chunk");
    return out;
}

inline AudioBuffer wav_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return wav_decode(bytes);
}

} // namespace afwave
