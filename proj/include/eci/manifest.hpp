#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "eci/binary_io.hpp"
#include "eci/constraint_spec.hpp"

#ifndef ECI_VERSION
#define ECI_VERSION "0.0.0"
#endif

namespace eci {

// One per command run. Output paths are stored relative to the manifest's
// directory, inputs as absolute paths; every entry carries an FNV-1a hash.
class RunManifest {
public:
    explicit RunManifest(std::string command) : start_(std::chrono::steady_clock::now()) {
        doc_["command"] = std::move(command);
        doc_["tool_version"] = ECI_VERSION;
        doc_["config"] = json::object();
        doc_["seeds"] = json::object();
        doc_["inputs"] = json::object();
        doc_["outputs"] = json::object();
    }

    json& config() { return doc_["config"]; }
    json& seeds() { return doc_["seeds"]; }
    json& doc() { return doc_; }

    void input(const std::string& path) {
        namespace fs = std::filesystem;
        if (fs::is_directory(path)) {
            for (const auto& e : fs::directory_iterator(path))
                if (e.is_regular_file()) input(e.path().string());
            return;
        }
        doc_["inputs"][fs::absolute(path).lexically_normal().string()] = io::hash_file(path);
    }

    void output(const std::string& path) { outputs_.push_back(path); }

    void write(const std::string& manifest_path) {
        namespace fs = std::filesystem;
        const fs::path base = fs::absolute(manifest_path).parent_path();
        for (const auto& p : outputs_)
            doc_["outputs"][fs::absolute(p).lexically_normal().lexically_relative(base).string()] = io::hash_file(p);
        doc_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_json_file(doc_, manifest_path);
    }

private:
    json doc_;
    std::vector<std::string> outputs_;
    std::chrono::steady_clock::time_point start_;
};

// Re-hashes every recorded output; returns the paths that no longer match.
inline std::vector<std::string> verify_manifest(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const json doc = read_json_file(manifest_path);
    const fs::path base = fs::absolute(manifest_path).parent_path();
    std::vector<std::string> bad;
    for (const auto& [rel, hash] : doc.at("outputs").items()) {
        const fs::path p = base / rel;
        if (!fs::exists(p) || io::hash_file(p.string()) != hash.get<std::string>()) bad.push_back(rel);
    }
    return bad;
}

} // namespace eci
