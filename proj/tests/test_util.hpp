#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#include "json.hpp"
#include "repro/embed.hpp"
#include "repro/gateway.hpp"

#ifndef FIXTURE_DIR
#define FIXTURE_DIR "tests/fixtures"
#endif

namespace testutil {

inline std::string fixture(const std::string& name) {
    return std::string(FIXTURE_DIR) + "/" + name;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json load_json(const std::string& path) {
    return nlohmann::json::parse(slurp(path));
}

// Fresh unique directory under the system temp root.
inline std::string temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    std::string path;
    do {
        path = (std::filesystem::temp_directory_path() /
                ("repro_" + tag + "_" + std::to_string(rng()))).string();
    } while (std::filesystem::exists(path));
    std::filesystem::create_directories(path);
    return path;
}

// Gateway wired to a scripted backend and the deterministic embedder.
struct ScriptedGateway {
    std::shared_ptr<repro::ScriptedBackend> backend;
    std::shared_ptr<repro::HashedEmbedder> embedder;
    std::unique_ptr<repro::Gateway> gateway;
    repro::Gateway& operator*() { return *gateway; }
    repro::Gateway* operator->() { return gateway.get(); }
};

inline ScriptedGateway make_scripted(const nlohmann::json& script,
                                     repro::GatewayMode mode = repro::GatewayMode::live) {
    ScriptedGateway g;
    g.backend = std::make_shared<repro::ScriptedBackend>(script);
    g.embedder = std::make_shared<repro::HashedEmbedder>(64);
    repro::GatewayConfig cfg;
    cfg.mode = mode;
    cfg.backoff_ms = 0;
    g.gateway = std::make_unique<repro::Gateway>(cfg, g.backend, g.embedder);
    return g;
}

}  // namespace testutil
