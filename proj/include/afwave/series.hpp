// Per-carrier I/Q and phase sequences plus the aligned multi-channel record
// that flows between pipeline stages, with JSON persistence.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "afwave/common.hpp"

namespace afwave {

// 128 Hz working rate and 30 s segments everywhere downstream of extraction.
inline constexpr double kWorkingRate = 128.0;
inline constexpr std::size_t kSegmentSamples = 3840;

struct IQSeries {
    std::vector<double> i;
    std::vector<double> q;
    double rate = kWorkingRate;
    double carrier = 0.0;

    std::size_t size() const { return i.size(); }
};

struct PhaseSeries {
    std::vector<double> phase;
    double rate = kWorkingRate;
    double carrier = 0.0;

    std::size_t size() const { return phase.size(); }
};

struct ChannelData {
    IQSeries iq;
    PhaseSeries phase;
    bool valid = true;
    std::string invalid_reason;
};

struct MultiChannelRecord {
    std::vector<ChannelData> channels;
    double rate = kWorkingRate;
    std::size_t segment_length = kSegmentSamples;
    nlohmann::json provenance = nlohmann::json::object();

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (const auto& c : channels) n += c.valid ? 1 : 0;
        return n;
    }
};

enum class Rhythm { NSR, AF };

inline std::string to_string(Rhythm r) { return r == Rhythm::AF ? "AF" : "NSR"; }

inline Rhythm rhythm_from_string(const std::string& s) {
    if (s == "AF") return Rhythm::AF;
    if (s == "NSR" || s == "non-AF") return Rhythm::NSR;
    throw FormatError("unknown rhythm label: " + s);
}

// Final purified 30 s pulse wave handed to the detector.
struct PulseSegment {
    std::vector<double> samples;
    double source_carrier = 0.0;
    std::optional<Rhythm> label;
    nlohmann::json provenance = nlohmann::json::object();
};

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json to_json(const IQSeries& s) {
    return nlohmann::json{{"i", s.i}, {"q", s.q}, {"rate", s.rate}, {"carrier", s.carrier}};
}

inline IQSeries iq_from_json(const nlohmann::json& j) {
    IQSeries s;
    s.i = j.at("i").get<std::vector<double>>();
    s.q = j.at("q").get<std::vector<double>>();
    s.rate = j.at("rate").get<double>();
    s.carrier = j.at("carrier").get<double>();
    if (s.i.size() != s.q.size()) throw FormatError("IQ series: i/q length mismatch");
    return s;
}

inline nlohmann::json to_json(const PhaseSeries& s) {
    return nlohmann::json{{"phase", s.phase}, {"rate", s.rate}, {"carrier", s.carrier}};
}

inline PhaseSeries phase_from_json(const nlohmann::json& j) {
    PhaseSeries s;
    s.phase = j.at("phase").get<std::vector<double>>();
    s.rate = j.at("rate").get<double>();
    s.carrier = j.at("carrier").get<double>();
    return s;
}

inline nlohmann::json to_json(const MultiChannelRecord& r) {
    nlohmann::json channels = nlohmann::json::array();
    for (const auto& c : r.channels) {
        channels.push_back({{"iq", to_json(c.iq)},
                            {"phase", to_json(c.phase)},
                            {"valid", c.valid},
                            {"invalid_reason", c.invalid_reason}});
    }
    return nlohmann::json{{"format", "afwave-record"},
                          {"version", 1},
                          {"rate", r.rate},
                          {"segment_length", r.segment_length},
                          {"carriers", [&] {
                               std::vector<double> cs;
                               for (const auto& c : r.channels) cs.push_back(c.iq.carrier);
                               return cs;
                           }()},
                          {"channels", channels},
                          {"provenance", r.provenance}};
}

inline MultiChannelRecord record_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "afwave-record")
        throw FormatError("not a record file");
    MultiChannelRecord r;
    r.rate = j.at("rate").get<double>();
    r.segment_length = j.at("segment_length").get<std::size_t>();
    r.provenance = j.value("provenance", nlohmann::json::object());
    for (const auto& cj : j.at("channels")) {
        ChannelData c;
        c.iq = iq_from_json(cj.at("iq"));
        c.phase = phase_from_json(cj.at("phase"));
        c.valid = cj.at("valid").get<bool>();
        c.invalid_reason = cj.value("invalid_reason", "");
        r.channels.push_back(std::move(c));
    }
    return r;
}

inline nlohmann::json to_json(const PulseSegment& s) {
    nlohmann::json j{{"format", "afwave-segment"},
                     {"version", 1},
                     {"samples", s.samples},
                     {"rate", kWorkingRate},
                     {"source_carrier", s.source_carrier},
                     {"provenance", s.provenance}};
    if (s.label) j["label"] = to_string(*s.label);
    return j;
}

inline PulseSegment segment_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "afwave-segment")
        throw FormatError("not a segment file");
    PulseSegment s;
    s.samples = j.at("samples").get<std::vector<double>>();
    s.source_carrier = j.value("source_carrier", 0.0);
    s.provenance = j.value("provenance", nlohmann::json::object());
    if (j.contains("label")) s.label = rhythm_from_string(j.at("label").get<std::string>());
    return s;
}

inline void json_write(const std::string& path, const nlohmann::json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open for writing: " + path);
    f << j.dump();
    f << '\n';
    if (!f) throw FormatError("short write: " + path);
}

inline nlohmann::json json_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("parse error in ") + path + ": " + e.what());
    }
    return j;
}

} // namespace afwave
