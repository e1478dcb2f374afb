#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "repro/embed.hpp"
#include "repro/error.hpp"

namespace repro {

enum class Purpose {
    guide_extract,
    ground,
    standardize,
    filter,
    skeleton,
    fill,
    verify,
    plan,
    refine,
    match
};

std::string to_string(Purpose p);

struct ChatMessage {
    std::string role;
    std::string text;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 4096;
    Purpose purpose = Purpose::guide_extract;
};

struct ChatResponse {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    int latency_ms = 0;
};

// Transient transport failure; the gateway retries these.
struct TransportError : GatewayError {
    using GatewayError::GatewayError;
};

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Deterministic backend driven by a JSON script: per-purpose response lists
// consumed in order, optional per-purpose defaults once a list is exhausted.
// Entries may be plain strings or {"text": ..., "transient_failures": n}.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(const nlohmann::json& script);
    static ScriptedBackend from_file(const std::string& path);
    ChatResponse complete(const ChatRequest& request) override;

private:
    struct Entry {
        std::string text;
        int transient_failures = 0;
    };
    std::map<std::string, std::vector<Entry>> responses_;
    std::map<std::string, std::string> defaults_;
    std::map<std::string, std::size_t> cursor_;
    std::mutex mu_;
};

// OpenAI-compatible chat-completions endpoint.
class HttpChatBackend : public ChatBackend {
public:
    HttpChatBackend(std::string base_url, std::string api_key);
    ChatResponse complete(const ChatRequest& request) override;

private:
    std::string base_url_;
    std::string api_key_;
};

// OpenAI-compatible embeddings endpoint.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(std::string base_url, std::string api_key, std::string model);
    std::vector<double> embed(const std::string& text) override;
    int dim() const override { return dim_; }
    std::string model_id() const override { return model_; }

private:
    std::string base_url_;
    std::string api_key_;
    std::string model_;
    int dim_ = 0;
};

// Append-only JSON-lines store of recorded responses keyed by request hash.
class TranscriptStore {
public:
    TranscriptStore() = default;
    void load(const std::string& path);         // ignores a missing file
    void open_for_append(const std::string& path);
    bool has(const std::string& key) const;
    std::optional<nlohmann::json> lookup(const std::string& key) const;
    void append(const std::string& key, const nlohmann::json& record);
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, nlohmann::json> entries_;
    std::string append_path_;
    mutable std::mutex mu_;
};

struct PriceEntry {
    double input_per_1k = 0.0;
    double output_per_1k = 0.0;
};

class CostLedger {
public:
    struct Entry {
        std::string purpose;
        std::string model;
        int prompt_tokens = 0;
        int completion_tokens = 0;
        double cost = 0.0;
    };

    void add(const std::string& purpose, const std::string& model, int prompt_tokens,
             int completion_tokens, const std::map<std::string, PriceEntry>& prices);
    double total_cost() const;
    // Independent recomputation from per-entry token counts.
    double recompute_total(const std::map<std::string, PriceEntry>& prices) const;
    const std::vector<Entry>& entries() const { return entries_; }
    nlohmann::json to_json() const;
    void load_json(const nlohmann::json& j);

private:
    std::vector<Entry> entries_;
    mutable std::mutex mu_;
};

enum class GatewayMode { live, record, replay };

GatewayMode gateway_mode_from_string(const std::string& s);
std::string to_string(GatewayMode m);

struct GatewayConfig {
    GatewayMode mode = GatewayMode::live;
    int retry_limit = 3;
    int backoff_ms = 250;
    int parallel_cap = 8;
    std::map<std::string, PriceEntry> price_table;
};

// Single chokepoint for model interactions. All chat and embedding traffic
// flows through here so that record/replay makes downstream stages
// deterministic and offline.
class Gateway {
public:
    Gateway(GatewayConfig config, std::shared_ptr<ChatBackend> backend,
            std::shared_ptr<Embedder> embedder);

    ChatResponse complete(const ChatRequest& request);
    // Completion with a caller-reserved sequence number (deterministic keys
    // under parallel fan-out).
    ChatResponse complete_seq(const ChatRequest& request, int seq);
    std::vector<double> embed(const std::string& text);

    // Reserves n consecutive sequence numbers for a purpose; returns the first.
    int reserve_seq(Purpose purpose, int n);

    // Transcript I/O for record/replay.
    void load_transcripts(const std::string& path) { transcripts_.load(path); }
    void record_to(const std::string& path) { transcripts_.open_for_append(path); }
    std::size_t transcript_count() const { return transcripts_.size(); }

    CostLedger& ledger() { return ledger_; }
    const GatewayConfig& config() const { return config_; }
    int embed_dim() const { return embedder_ ? embedder_->dim() : 0; }

    static std::string request_key(const ChatRequest& request, int seq);
    static std::string embed_key(const std::string& model, const std::string& text);

private:
    ChatResponse call_with_retries(const ChatRequest& request);

    GatewayConfig config_;
    std::shared_ptr<ChatBackend> backend_;
    std::shared_ptr<Embedder> embedder_;
    TranscriptStore transcripts_;
    CostLedger ledger_;
    std::map<std::string, int> seq_;
    std::mutex mu_;
};

}  // namespace repro
