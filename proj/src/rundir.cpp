#include "repro/rundir.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "repro/error.hpp"
#include "repro/hash.hpp"

namespace fs = std::filesystem;

namespace repro {

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    c.paper_path = j.value("paper_path", "");
    c.run_dir = j.value("run_dir", c.run_dir);
    if (j.contains("mode")) c.mode = gateway_mode_from_string(j["mode"].get<std::string>());
    c.analysis_model = j.value("analysis_model", c.analysis_model);
    c.coding_model = j.value("coding_model", c.coding_model);
    c.embed_model = j.value("embed_model", c.embed_model);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.verify_parallelism = j.value("verify_parallelism", c.verify_parallelism);
    c.feedback_batch_size = j.value("feedback_batch_size", c.feedback_batch_size);
    c.top_k_paragraphs = j.value("top_k_paragraphs", c.top_k_paragraphs);
    c.dedup_threshold = j.value("dedup_threshold", c.dedup_threshold);
    c.context_window = j.value("context_window", c.context_window);
    c.filter_cap = j.value("filter_cap", c.filter_cap);
    c.retry_limit = j.value("retry_limit", c.retry_limit);
    c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
    c.parallel_cap = j.value("parallel_cap", c.parallel_cap);
    c.max_reprompts = j.value("max_reprompts", c.max_reprompts);
    c.paper_context_budget = j.value("paper_context_budget", c.paper_context_budget);
    c.script_path = j.value("script_path", "");
    if (c.max_iterations < 1) throw Error("max_iterations must be >= 1");
    if (j.contains("price_table")) {
        for (auto it = j["price_table"].begin(); it != j["price_table"].end(); ++it) {
            PriceEntry p;
            p.input_per_1k = it.value().value("input_per_1k", 0.0);
            p.output_per_1k = it.value().value("output_per_1k", 0.0);
            c.price_table[it.key()] = p;
        }
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return run_config_from_json(j);
}

// ---------------------------------------------------------------- manifest

RunManifest RunManifest::load(const std::string& run_dir) {
    RunManifest m;
    m.run_dir_ = run_dir;
    std::ifstream in(run_dir + "/run_manifest.json");
    if (in) in >> m.data_;
    if (!m.data_.is_object()) m.data_ = nlohmann::json::object();
    if (!m.data_.contains("stages")) m.data_["stages"] = nlohmann::json::object();
    return m;
}

void RunManifest::save() const {
    write_json_artifact(run_dir_ + "/run_manifest.json", data_);
}

bool RunManifest::stage_complete(const std::string& stage) const {
    return data_["stages"].contains(stage) && data_["stages"][stage].value("complete", false);
}

bool RunManifest::stage_valid(const std::string& stage) const {
    if (!stage_complete(stage)) return false;
    const auto& artifacts = data_["stages"][stage]["artifacts"];
    for (auto it = artifacts.begin(); it != artifacts.end(); ++it) {
        std::string path = run_dir_ + "/" + it.key();
        if (!file_exists(path)) return false;
        if (hash_file(path) != it.value().get<std::string>()) return false;
    }
    return true;
}

void RunManifest::mark_complete(const std::string& stage,
                                const std::vector<std::string>& artifacts,
                                const nlohmann::json& config_snapshot) {
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& rel : artifacts) {
        std::string path = run_dir_ + "/" + rel;
        if (file_exists(path)) hashes[rel] = hash_file(path);
    }
    data_["stages"][stage] = {{"complete", true},
                              {"artifacts", hashes},
                              {"timestamp", static_cast<long long>(::time(nullptr))}};
    data_["config_snapshot"] = config_snapshot;
    save();
}

// -------------------------------------------------------------------- lock

RunLock::RunLock(const std::string& run_dir) : path_(run_dir + "/.lock") {
    fs::create_directories(run_dir);
    std::error_code ec;
    if (fs::exists(path_))
        throw Error("run directory is locked by another command: " + path_);
    std::ofstream out(path_);
    out << "locked\n";
    held_ = true;
}

RunLock::~RunLock() {
    if (held_) {
        std::error_code ec;
        fs::remove(path_, ec);
    }
}

// -------------------------------------------------------------------- io

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

std::string hash_file(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

bool file_exists(const std::string& path) { return fs::exists(path); }

void write_json_artifact(const std::string& path, const nlohmann::json& j) {
    write_file(path, j.dump(2) + "\n");
}

std::optional<nlohmann::json> read_json_artifact(const std::string& path) {
    if (!file_exists(path)) return std::nullopt;
    auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) return std::nullopt;
    return j;
}

void append_warnings(const std::string& run_dir, const std::vector<std::string>& warnings) {
    if (warnings.empty()) return;
    auto existing = read_json_artifact(run_dir + "/warnings.json");
    nlohmann::json arr = existing ? *existing : nlohmann::json::array();
    for (const auto& w : warnings) arr.push_back(w);
    write_json_artifact(run_dir + "/warnings.json", arr);
}

}  // namespace repro
