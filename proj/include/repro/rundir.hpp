#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "repro/gateway.hpp"

namespace repro {

struct RunConfig {
    std::string paper_path;
    std::string run_dir = "run";
    GatewayMode mode = GatewayMode::live;

    std::string analysis_model = "analysis";
    std::string coding_model = "coding";
    std::string embed_model = "hashed-64";
    int embed_dim = 64;

    int max_iterations = 4;
    int verify_parallelism = 1;
    int feedback_batch_size = 40;

    int top_k_paragraphs = 3;
    double dedup_threshold = 0.92;
    int context_window = 2;
    int filter_cap = 5;

    int retry_limit = 3;
    int backoff_ms = 250;
    int parallel_cap = 8;
    int max_reprompts = 2;
    int paper_context_budget = 20000;

    std::map<std::string, PriceEntry> price_table;
    std::string script_path;  // scripted backend for offline record runs
    bool resume = false;
    bool from_scratch = false;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Stage completion flags with artifact hashes.
class RunManifest {
public:
    static RunManifest load(const std::string& run_dir);
    void save() const;

    bool stage_complete(const std::string& stage) const;
    // True when the stage is flagged complete and every artifact still hashes
    // to its recorded value.
    bool stage_valid(const std::string& stage) const;
    void mark_complete(const std::string& stage, const std::vector<std::string>& artifacts,
                       const nlohmann::json& config_snapshot);

private:
    std::string run_dir_;
    nlohmann::json data_ = nlohmann::json::object();
};

// Exclusive run-directory lock; concurrent commands on the same run_dir fail.
class RunLock {
public:
    explicit RunLock(const std::string& run_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::string path_;
    bool held_ = false;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
std::string hash_file(const std::string& path);
bool file_exists(const std::string& path);
void write_json_artifact(const std::string& path, const nlohmann::json& j);
std::optional<nlohmann::json> read_json_artifact(const std::string& path);
void append_warnings(const std::string& run_dir, const std::vector<std::string>& warnings);

}  // namespace repro
