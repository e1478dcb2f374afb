#include "repro/gateway.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include "httplib.h"
#include "repro/hash.hpp"

namespace repro {

std::string to_string(Purpose p) {
    switch (p) {
        case Purpose::guide_extract: return "guide_extract";
        case Purpose::ground: return "ground";
        case Purpose::standardize: return "standardize";
        case Purpose::filter: return "filter";
        case Purpose::skeleton: return "skeleton";
        case Purpose::fill: return "fill";
        case Purpose::verify: return "verify";
        case Purpose::plan: return "plan";
        case Purpose::refine: return "refine";
        case Purpose::match: return "match";
    }
    return "unknown";
}

GatewayMode gateway_mode_from_string(const std::string& s) {
    if (s == "live") return GatewayMode::live;
    if (s == "record") return GatewayMode::record;
    if (s == "replay") return GatewayMode::replay;
    throw Error("unknown gateway mode: " + s);
}

std::string to_string(GatewayMode m) {
    switch (m) {
        case GatewayMode::live: return "live";
        case GatewayMode::record: return "record";
        case GatewayMode::replay: return "replay";
    }
    return "live";
}

// ---------------------------------------------------------------- scripted

ScriptedBackend::ScriptedBackend(const nlohmann::json& script) {
    if (script.contains("responses")) {
        for (auto it = script["responses"].begin(); it != script["responses"].end(); ++it) {
            std::vector<Entry> list;
            for (const auto& e : it.value()) {
                Entry entry;
                if (e.is_string()) {
                    entry.text = e.get<std::string>();
                } else {
                    entry.text = e.value("text", "");
                    entry.transient_failures = e.value("transient_failures", 0);
                }
                list.push_back(std::move(entry));
            }
            responses_[it.key()] = std::move(list);
        }
    }
    if (script.contains("defaults")) {
        for (auto it = script["defaults"].begin(); it != script["defaults"].end(); ++it)
            defaults_[it.key()] = it.value().get<std::string>();
    }
}

ScriptedBackend ScriptedBackend::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open script file: " + path);
    nlohmann::json j;
    in >> j;
    return ScriptedBackend(j);
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mu_);
    std::string purpose = to_string(request.purpose);
    std::string text;
    auto it = responses_.find(purpose);
    if (it != responses_.end() && cursor_[purpose] < it->second.size()) {
        Entry& entry = it->second[cursor_[purpose]];
        if (entry.transient_failures > 0) {
            --entry.transient_failures;
            throw TransportError("scripted transient failure for " + purpose);
        }
        text = entry.text;
        ++cursor_[purpose];
    } else {
        auto d = defaults_.find(purpose);
        if (d == defaults_.end()) d = defaults_.find("*");
        if (d == defaults_.end())
            throw GatewayError("scripted backend has no response for purpose " + purpose);
        text = d->second;
    }
    ChatResponse resp;
    resp.text = text;
    std::size_t prompt_chars = 0;
    for (const auto& m : request.messages) prompt_chars += m.text.size();
    resp.prompt_tokens = static_cast<int>(prompt_chars / 4) + 1;
    resp.completion_tokens = static_cast<int>(text.size() / 4) + 1;
    resp.latency_ms = 0;
    return resp;
}

// -------------------------------------------------------------------- http

HttpChatBackend::HttpChatBackend(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

ChatResponse HttpChatBackend::complete(const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : request.messages)
        messages.push_back({{"role", m.role}, {"content", m.text}});
    nlohmann::json body = {{"model", request.model_id},
                           {"messages", messages},
                           {"temperature", request.temperature},
                           {"max_tokens", request.max_output_tokens}};

    httplib::Client client(base_url_);
    client.set_read_timeout(300, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto start = std::chrono::steady_clock::now();
    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    if (!res) throw TransportError("chat endpoint unreachable: " + base_url_);
    if (res->status >= 500 || res->status == 429)
        throw TransportError("chat endpoint status " + std::to_string(res->status));
    if (res->status != 200)
        throw GatewayError("chat endpoint status " + std::to_string(res->status) + ": " + res->body);
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw GatewayError("chat endpoint returned non-JSON body");
    ChatResponse out;
    out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
        out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        out.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    out.latency_ms = static_cast<int>(elapsed);
    return out;
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::string api_key, std::string model)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)) {}

std::vector<double> HttpEmbedder::embed(const std::string& text) {
    nlohmann::json body = {{"model", model_}, {"input", text}};
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
    if (!res) throw GatewayError("embeddings endpoint unreachable: " + base_url_);
    if (res->status != 200)
        throw GatewayError("embeddings endpoint status " + std::to_string(res->status));
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw GatewayError("embeddings endpoint returned non-JSON body");
    std::vector<double> v = j.at("data").at(0).at("embedding").get<std::vector<double>>();
    dim_ = static_cast<int>(v.size());
    return v;
}

// ------------------------------------------------------------- transcripts

void TranscriptStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) return;
    std::lock_guard<std::mutex> lock(mu_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("key")) continue;
        entries_[j["key"].get<std::string>()] = j;
    }
}

void TranscriptStore::open_for_append(const std::string& path) {
    std::lock_guard<std::mutex> lock(mu_);
    append_path_ = path;
}

bool TranscriptStore::has(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.count(key) > 0;
}

std::optional<nlohmann::json> TranscriptStore::lookup(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void TranscriptStore::append(const std::string& key, const nlohmann::json& record) {
    std::lock_guard<std::mutex> lock(mu_);
    if (entries_.count(key)) return;
    entries_[key] = record;
    if (!append_path_.empty()) {
        std::ofstream out(append_path_, std::ios::app);
        out << record.dump() << '\n';
    }
}

// ------------------------------------------------------------------ ledger

void CostLedger::add(const std::string& purpose, const std::string& model, int prompt_tokens,
                     int completion_tokens, const std::map<std::string, PriceEntry>& prices) {
    Entry e;
    e.purpose = purpose;
    e.model = model;
    e.prompt_tokens = prompt_tokens;
    e.completion_tokens = completion_tokens;
    auto it = prices.find(model);
    if (it != prices.end())
        e.cost = prompt_tokens / 1000.0 * it->second.input_per_1k +
                 completion_tokens / 1000.0 * it->second.output_per_1k;
    std::lock_guard<std::mutex> lock(mu_);
    entries_.push_back(std::move(e));
}

double CostLedger::total_cost() const {
    std::lock_guard<std::mutex> lock(mu_);
    double t = 0.0;
    for (const auto& e : entries_) t += e.cost;
    return t;
}

double CostLedger::recompute_total(const std::map<std::string, PriceEntry>& prices) const {
    std::lock_guard<std::mutex> lock(mu_);
    double t = 0.0;
    for (const auto& e : entries_) {
        auto it = prices.find(e.model);
        if (it == prices.end()) continue;
        t += e.prompt_tokens / 1000.0 * it->second.input_per_1k +
             e.completion_tokens / 1000.0 * it->second.output_per_1k;
    }
    return t;
}

nlohmann::json CostLedger::to_json() const {
    std::lock_guard<std::mutex> lock(mu_);
    nlohmann::json calls = nlohmann::json::array();
    std::map<std::string, nlohmann::json> per_purpose;
    double total = 0.0;
    for (const auto& e : entries_) {
        calls.push_back({{"purpose", e.purpose},
                         {"model", e.model},
                         {"prompt_tokens", e.prompt_tokens},
                         {"completion_tokens", e.completion_tokens},
                         {"cost", e.cost}});
        auto& p = per_purpose[e.purpose];
        if (p.is_null()) p = nlohmann::json::object();
        p["prompt_tokens"] = p.value("prompt_tokens", 0) + e.prompt_tokens;
        p["completion_tokens"] = p.value("completion_tokens", 0) + e.completion_tokens;
        p["cost"] = p.value("cost", 0.0) + e.cost;
        total += e.cost;
    }
    return {{"calls", calls}, {"per_purpose", per_purpose}, {"total_cost", total}};
}

void CostLedger::load_json(const nlohmann::json& j) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_.clear();
    for (const auto& c : j.value("calls", nlohmann::json::array())) {
        Entry e;
        e.purpose = c.value("purpose", "");
        e.model = c.value("model", "");
        e.prompt_tokens = c.value("prompt_tokens", 0);
        e.completion_tokens = c.value("completion_tokens", 0);
        e.cost = c.value("cost", 0.0);
        entries_.push_back(std::move(e));
    }
}

// ----------------------------------------------------------------- gateway

Gateway::Gateway(GatewayConfig config, std::shared_ptr<ChatBackend> backend,
                 std::shared_ptr<Embedder> embedder)
    : config_(std::move(config)), backend_(std::move(backend)), embedder_(std::move(embedder)) {}

std::string Gateway::request_key(const ChatRequest& request, int seq) {
    std::uint64_t h = fnv1a64(request.model_id);
    h = fnv1a64(to_string(request.purpose), h);
    h = fnv1a64(std::to_string(seq), h);
    for (const auto& m : request.messages) {
        h = fnv1a64(m.role, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(m.text, h);
        h = fnv1a64("\x1e", h);
    }
    return hex64(h);
}

std::string Gateway::embed_key(const std::string& model, const std::string& text) {
    std::uint64_t h = fnv1a64("embed");
    h = fnv1a64(model, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(text, h);
    return hex64(h);
}

int Gateway::reserve_seq(Purpose purpose, int n) {
    std::lock_guard<std::mutex> lock(mu_);
    int& counter = seq_[to_string(purpose)];
    int start = counter;
    counter += n;
    return start;
}

ChatResponse Gateway::complete(const ChatRequest& request) {
    return complete_seq(request, reserve_seq(request.purpose, 1));
}

ChatResponse Gateway::call_with_retries(const ChatRequest& request) {
    int attempts = std::max(1, config_.retry_limit);
    for (int attempt = 1;; ++attempt) {
        try {
            return backend_->complete(request);
        } catch (const TransportError& e) {
            if (attempt >= attempts)
                throw GatewayError(std::string("retries exhausted: ") + e.what());
            if (config_.backoff_ms > 0)
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(config_.backoff_ms * (1 << (attempt - 1))));
        }
    }
}

ChatResponse Gateway::complete_seq(const ChatRequest& request, int seq) {
    std::string key = request_key(request, seq);
    if (config_.mode == GatewayMode::replay) {
        auto rec = transcripts_.lookup(key);
        if (!rec) throw ReplayMiss(key);
        ChatResponse resp;
        const auto& r = (*rec)["response"];
        resp.text = r.value("text", "");
        resp.prompt_tokens = r.value("prompt_tokens", 0);
        resp.completion_tokens = r.value("completion_tokens", 0);
        resp.latency_ms = r.value("latency_ms", 0);
        ledger_.add(to_string(request.purpose), request.model_id, resp.prompt_tokens,
                    resp.completion_tokens, config_.price_table);
        return resp;
    }
    if (!backend_) throw GatewayError("no chat backend configured");
    ChatResponse resp = call_with_retries(request);
    ledger_.add(to_string(request.purpose), request.model_id, resp.prompt_tokens,
                resp.completion_tokens, config_.price_table);
    if (config_.mode == GatewayMode::record) {
        nlohmann::json record = {{"key", key},
                                 {"purpose", to_string(request.purpose)},
                                 {"seq", seq},
                                 {"model", request.model_id},
                                 {"response",
                                  {{"text", resp.text},
                                   {"prompt_tokens", resp.prompt_tokens},
                                   {"completion_tokens", resp.completion_tokens},
                                   {"latency_ms", 0}}}};
        transcripts_.append(key, record);
    }
    return resp;
}

std::vector<double> Gateway::embed(const std::string& text) {
    if (text.empty()) throw GatewayError("embed called with empty text");
    std::string model = embedder_ ? embedder_->model_id() : "unknown";
    std::string key = embed_key(model, text);
    if (config_.mode == GatewayMode::replay) {
        auto rec = transcripts_.lookup(key);
        if (!rec) throw ReplayMiss(key);
        return (*rec)["response"]["embedding"].get<std::vector<double>>();
    }
    if (!embedder_) throw GatewayError("no embedder configured");
    std::vector<double> v = embedder_->embed(text);
    if (config_.mode == GatewayMode::record) {
        nlohmann::json record = {
            {"key", key}, {"purpose", "embed"}, {"model", model}, {"response", {{"embedding", v}}}};
        transcripts_.append(key, record);
    }
    return v;
}

}  // namespace repro
