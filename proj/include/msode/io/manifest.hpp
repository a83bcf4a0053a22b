#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "msode/common.hpp"

namespace msode {

inline constexpr const char* tool_version = "msode 0.1.0";

// Everything needed to rerun a command: the invocation, its inputs, the seed
// and engine actually used, and where the outputs went.
struct RunManifest {
    std::string command;
    std::string config_path;
    std::vector<std::string> data_paths;
    std::uint64_t seed = 0;
    std::string engine;
    std::string out_dir;
    std::vector<std::string> outputs;
    std::map<std::string, double> timings_seconds;
    std::map<std::string, std::string> extra;
};

// Written to <out_dir>/manifest.json via a temp file + rename so a crashed
// run never leaves a half-written manifest behind.
inline std::string write_manifest(const RunManifest& m) {
    nlohmann::json j;
    j["tool"] = tool_version;
    j["command"] = m.command;
    j["config"] = m.config_path;
    j["data"] = m.data_paths;
    j["seed"] = m.seed;
    j["engine"] = m.engine;
    j["out_dir"] = m.out_dir;
    j["outputs"] = m.outputs;
    j["timings_seconds"] = m.timings_seconds;
    for (const auto& [k, v] : m.extra) j[k] = v;

    namespace fs = std::filesystem;
    fs::create_directories(m.out_dir);
    const fs::path final_path = fs::path(m.out_dir) / "manifest.json";
    const fs::path tmp_path = final_path.string() + ".tmp";
    {
        std::ofstream out(tmp_path);
        if (!out) throw ConfigError("cannot write " + tmp_path.string());
        out << j.dump(2) << "\n";
        if (!out) throw ConfigError("write failed for " + tmp_path.string());
    }
    fs::rename(tmp_path, final_path);
    return final_path.string();
}

inline nlohmann::json read_manifest(const std::string& out_dir) {
    const std::string path = (std::filesystem::path(out_dir) / "manifest.json").string();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

}  // namespace msode
