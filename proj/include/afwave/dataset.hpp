// Dataset manifest: one record per line (segment path, label, subject id,
// scenario id), tab separated. Enables subject-disjoint splits.
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "afwave/common.hpp"
#include "afwave/series.hpp"

namespace afwave {

struct ManifestEntry {
    std::string path;
    Rhythm label = Rhythm::NSR;
    std::string subject;
    std::string scenario_id;
};

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open manifest: " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        ManifestEntry e;
        std::string label;
        if (!std::getline(ss, e.path, '\t') || !std::getline(ss, label, '\t') ||
            !std::getline(ss, e.subject, '\t'))
            throw FormatError("manifest line " + std::to_string(lineno) +
                              ": expected path<TAB>label<TAB>subject[<TAB>scenario]");
        std::getline(ss, e.scenario_id, '\t');
        e.label = rhythm_from_string(label);
        if (!e.path.empty() && e.path[0] != '/')
            e.path = (base / e.path).string();
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open manifest for writing: " + path);
    for (const auto& e : entries)
        f << e.path << '\t' << to_string(e.label) << '\t' << e.subject << '\t' << e.scenario_id
          << '\n';
    if (!f) throw FormatError("short write: " + path);
}

inline PulseSegment load_segment(const std::string& path) {
    return segment_from_json(json_read(path));
}

} // namespace afwave
