#include "repro/fingerprint.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

#include "repro/embed.hpp"
#include "repro/error.hpp"

namespace repro {

std::string to_string(GuideLevel l) {
    switch (l) {
        case GuideLevel::framework: return "framework";
        case GuideLevel::configuration: return "configuration";
        case GuideLevel::exhaustive: return "exhaustive";
    }
    return "framework";
}

std::string to_string(Aspect a) {
    switch (a) {
        case Aspect::data: return "data";
        case Aspect::model: return "model";
        case Aspect::training: return "training";
        case Aspect::evaluation: return "evaluation";
    }
    return "data";
}

std::pair<std::string, std::optional<std::string>> parse_fact_scope(const std::string& rendered) {
    auto count = [&](const std::string& tag) {
        std::size_t n = 0, pos = 0;
        while ((pos = rendered.find(tag, pos)) != std::string::npos) {
            ++n;
            pos += tag.size();
        }
        return n;
    };
    if (count("<fact>") != 1 || count("</fact>") != 1)
        throw SpanError("expected exactly one fact span: " + rendered);
    std::size_t fb = rendered.find("<fact>") + 6;
    std::size_t fe = rendered.find("</fact>");
    if (fe < fb) throw SpanError("malformed fact span: " + rendered);
    std::string fact = rendered.substr(fb, fe - fb);
    if (fact.find("<fact>") != std::string::npos)
        throw SpanError("nested fact span: " + rendered);

    std::size_t nscope = count("<scope>");
    if (nscope != count("</scope>") || nscope > 1)
        throw SpanError("expected at most one scope span: " + rendered);
    std::optional<std::string> scope;
    if (nscope == 1) {
        std::size_t sb = rendered.find("<scope>") + 7;
        std::size_t se = rendered.find("</scope>");
        if (se < sb) throw SpanError("malformed scope span: " + rendered);
        scope = rendered.substr(sb, se - sb);
    }
    return {fact, scope};
}

std::string normalize_for_dedup(const std::string& text) {
    std::string out;
    bool in_space = true;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
            in_space = false;
        } else if (!in_space) {
            out.push_back(' ');
            in_space = true;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

DedupResult dedup(const std::vector<Criterion>& criteria,
                  const std::vector<std::vector<double>>& fact_embeddings, double threshold) {
    const int n = static_cast<int>(criteria.size());
    UnionFind uf(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (cosine(fact_embeddings[i], fact_embeddings[j]) >= threshold) uf.unite(i, j);

    // Components keyed by their smallest member, in first-occurrence order.
    std::vector<int> roots;
    std::map<int, std::vector<int>> members;
    for (int i = 0; i < n; ++i) {
        int r = uf.find(i);
        if (!members.count(r)) roots.push_back(r);
        members[r].push_back(i);
    }

    DedupResult result;
    std::vector<bool> survives(n, false);
    for (int r : roots) {
        Cluster c;
        c.threshold = threshold;
        std::vector<std::string> seen;
        for (int i : members[r]) {
            c.member_ids.push_back(criteria[i].id);
            std::string key = normalize_for_dedup(criteria[i].fact) + "\x1f" +
                              normalize_for_dedup(criteria[i].scope.value_or(""));
            if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
                seen.push_back(key);
                survives[i] = true;
            }
        }
        result.clusters.push_back(std::move(c));
    }
    for (int i = 0; i < n; ++i)
        if (survives[i]) result.survivors.push_back(criteria[i]);
    return result;
}

// ------------------------------------------------------------------ prompts

namespace {

const char* kGuideScanSystem =
    "You are reviewing a research paper to build a checklist of verifiable, "
    "code-level facts. From the numbered sentences of the paragraph below, select "
    "every sentence that states a substantive implementation detail: datasets and "
    "tasks, data processing, hyperparameters, model architecture, algorithmic "
    "steps or formulas, loss functions, or evaluation metrics. Ignore background, "
    "qualitative claims, citations, and future work. Respond with ONLY a single "
    "valid JSON array of the selected sentence index numbers, e.g. [1,3,4]. If no "
    "sentence qualifies, return [].";

const char* kFrameworkSystem =
    "You are analyzing a research paper to list the key reproduction components "
    "for one machine-learning aspect. Quote the key sentences or short passages "
    "from the paper that define this aspect. Respond with ONLY a valid JSON array "
    "of strings, one string per component unit. Return [] if the paper says "
    "nothing about this aspect.";

const char* kConfigurationSystem =
    "You are collecting the concrete configuration details of a research paper: "
    "named settings with their values or defining phrases (for example "
    "\"learning rate — 1e-4\"). Respond with ONLY a valid JSON array of strings, "
    "one string per configuration detail. Return [] if there are none.";

const char* kGroundSystem =
    "You are locating the source sentences for an extracted statement. Below are "
    "numbered sentences from the most relevant paragraphs of the paper. Select "
    "the indices of the sentences that best support the statement. Respond with "
    "ONLY a valid JSON array of the selected index numbers, or [] if none match.";

const char* kStandardizeSystem =
    "You are turning a statement from a research paper into atomic, verifiable "
    "implementation criteria. Decompose the statement into the smallest "
    "independently checkable claims, but keep any self-contained equation or "
    "algorithm as one single indivisible criterion. Render each criterion as one "
    "fluent sentence that wraps the verifiable claim in <fact>...</fact> tags and "
    "the context where it applies, if any, in <scope>...</scope> tags. Respond "
    "with ONLY a valid JSON list of objects, each with a single \"criterion\" "
    "string key.";

const char* kFilterSystem =
    "You are pruning a group of checklist criteria that share the same core "
    "fact. Keep the minimum set of criteria that covers every distinct, directly "
    "verifiable implementation detail; prefer precise, concrete phrasings and "
    "drop abstract or duplicate ones. You must select fewer than six. Respond "
    "with ONLY a valid JSON object with keys \"selected_indices\" (1-based "
    "integers) and \"reason\".";

std::string doc_body(const PaperDoc& doc) {
    std::string body;
    for (const auto& p : doc.paragraphs) {
        if (!body.empty()) body += "\n\n";
        body += p.raw;
    }
    return body;
}

}  // namespace

// ------------------------------------------------------------------ builder

FingerprintBuilder::FingerprintBuilder(Gateway& gateway, FingerprintConfig config)
    : gateway_(gateway), config_(std::move(config)) {}

void FingerprintBuilder::warn(const std::string& message) { warnings_.push_back(message); }

nlohmann::json FingerprintBuilder::complete_parsed(ChatRequest request, StructKind kind,
                                                   const std::string& stage) {
    for (int attempt = 0;; ++attempt) {
        ChatResponse resp = gateway_.complete(request);
        try {
            return extract_structured(resp.text, kind);
        } catch (const ParseFailure& e) {
            if (attempt >= config_.max_reprompts)
                throw StageFailure(stage, std::string("unparseable model output: ") + e.what());
            ++reprompts_;
            warn("re-prompt in stage " + stage + ": " + e.what());
            request.messages.push_back(
                {"user", "Your previous reply could not be parsed. Respond with only the "
                         "required output format and nothing else."});
        }
    }
}

std::vector<GuideUnit> FingerprintBuilder::extract_framework_guides(const PaperDoc& doc) {
    std::vector<GuideUnit> units;
    const Aspect aspects[] = {Aspect::data, Aspect::model, Aspect::training, Aspect::evaluation};
    for (Aspect aspect : aspects) {
        ChatRequest req;
        req.purpose = Purpose::guide_extract;
        req.model_id = config_.analysis_model;
        req.messages = {{"system", kFrameworkSystem},
                        {"user", "Aspect: " + to_string(aspect) + "\n\nPaper:\n" + doc_body(doc)}};
        nlohmann::json list = complete_parsed(req, StructKind::json_list, "framework");
        for (const auto& e : list) {
            if (!e.is_string()) continue;
            std::string text = e.get<std::string>();
            if (text.empty()) continue;
            GuideUnit u;
            u.id = "g" + std::to_string(next_guide_id_++);
            u.level = GuideLevel::framework;
            u.aspect = aspect;
            u.text = text;
            units.push_back(std::move(u));
        }
    }
    return units;
}

std::vector<GuideUnit> FingerprintBuilder::extract_configuration_guides(const PaperDoc& doc) {
    ChatRequest req;
    req.purpose = Purpose::guide_extract;
    req.model_id = config_.analysis_model;
    req.messages = {{"system", kConfigurationSystem}, {"user", "Paper:\n" + doc_body(doc)}};
    nlohmann::json list = complete_parsed(req, StructKind::json_list, "configuration");
    std::vector<GuideUnit> units;
    for (const auto& e : list) {
        if (!e.is_string()) continue;
        std::string text = e.get<std::string>();
        if (text.empty()) continue;
        GuideUnit u;
        u.id = "g" + std::to_string(next_guide_id_++);
        u.level = GuideLevel::configuration;
        u.text = text;
        units.push_back(std::move(u));
    }
    return units;
}

std::vector<GuideUnit> FingerprintBuilder::exhaustive_scan(const PaperDoc& doc, int window) {
    std::vector<GuideUnit> units;
    for (const auto& p : doc.paragraphs) {
        if (p.kind != ParagraphKind::prose || p.sentences.empty()) continue;
        std::string context;
        for (int back = window; back >= 1; --back) {
            int cid = p.id - back;
            if (cid >= 0) {
                context += doc.paragraphs[static_cast<std::size_t>(cid)].raw;
                context += "\n\n";
            }
        }
        std::string numbered;
        for (const auto& s : p.sentences)
            numbered += "[" + std::to_string(s.index) + "]: " + s.text + "\n";
        ChatRequest req;
        req.purpose = Purpose::guide_extract;
        req.model_id = config_.analysis_model;
        std::string user = context.empty() ? "" : "Context:\n" + context;
        user += "Paragraph sentences:\n" + numbered;
        req.messages = {{"system", kGuideScanSystem}, {"user", user}};
        nlohmann::json indices;
        try {
            indices = complete_parsed(req, StructKind::int_array, "exhaustive");
        } catch (const StageFailure&) {
            warn("exhaustive scan: paragraph " + std::to_string(p.id) + " skipped (unparseable)");
            continue;
        }
        int valid = 0;
        for (const auto& e : indices) {
            int idx = e.get<int>();
            if (idx < 1 || idx > static_cast<int>(p.sentences.size())) {
                warn("exhaustive scan: paragraph " + std::to_string(p.id) +
                     " returned out-of-range sentence index " + std::to_string(idx));
                continue;
            }
            GuideUnit u;
            u.id = "g" + std::to_string(next_guide_id_++);
            u.level = GuideLevel::exhaustive;
            u.text = p.sentences[static_cast<std::size_t>(idx - 1)].text;
            u.source = SourceRef{p.id, {idx}};
            units.push_back(std::move(u));
            ++valid;
        }
        if (!indices.empty() && valid == 0)
            warn("exhaustive scan: paragraph " + std::to_string(p.id) +
                 " skipped (all indices invalid)");
    }
    return units;
}

void FingerprintBuilder::build_paragraph_index(const PaperDoc& doc) {
    index_paragraph_ids_.clear();
    index_embeddings_.clear();
    for (const auto& p : doc.paragraphs) {
        if (p.kind == ParagraphKind::heading) continue;
        std::string text = normalize_whitespace(p.raw);
        if (text.empty()) continue;
        index_paragraph_ids_.push_back(p.id);
        index_embeddings_.push_back(gateway_.embed(text));
    }
}

std::vector<int> FingerprintBuilder::top_paragraphs(const std::string& text, int k) {
    std::vector<double> query = gateway_.embed(text);
    std::vector<std::pair<double, int>> scored;
    for (std::size_t i = 0; i < index_paragraph_ids_.size(); ++i)
        scored.push_back({cosine(query, index_embeddings_[i]), index_paragraph_ids_[i]});
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> out;
    for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i)
        out.push_back(scored[static_cast<std::size_t>(i)].second);
    return out;
}

bool FingerprintBuilder::ground(GuideUnit& unit, const PaperDoc& doc) {
    if (index_embeddings_.empty()) build_paragraph_index(doc);
    std::vector<int> ranked = top_paragraphs(unit.text, config_.top_k_paragraphs);

    // Flat global numbering across the retrieved paragraphs, rank order.
    struct Slot { int paragraph_id; int sentence_index; };
    std::vector<Slot> slots;
    std::string numbered;
    int counter = 0;
    for (int pid : ranked) {
        const Paragraph* p = doc.find(pid);
        if (!p) continue;
        numbered += "(paragraph " + std::to_string(pid) + ")\n";
        for (const auto& s : p->sentences) {
            ++counter;
            slots.push_back({pid, s.index});
            numbered += "[" + std::to_string(counter) + "]: " + s.text + "\n";
        }
    }

    ChatRequest req;
    req.purpose = Purpose::ground;
    req.model_id = config_.analysis_model;
    req.messages = {{"system", kGroundSystem},
                    {"user", "Statement:\n" + unit.text + "\n\nSentences:\n" + numbered}};
    nlohmann::json indices;
    try {
        indices = complete_parsed(req, StructKind::int_array, "ground");
    } catch (const StageFailure&) {
        unit.grounding_miss = true;
        warn("grounding miss (unparseable selection) for unit " + unit.id);
        return false;
    }

    std::vector<int> selected;
    for (const auto& e : indices) {
        int idx = e.get<int>();
        if (idx >= 1 && idx <= static_cast<int>(slots.size())) selected.push_back(idx);
    }
    if (selected.empty()) {
        unit.grounding_miss = true;
        warn("grounding miss for unit " + unit.id);
        return false;
    }
    // Keep only the highest-ranked paragraph containing any selected sentence.
    int chosen = -1;
    for (int pid : ranked) {
        for (int idx : selected)
            if (slots[static_cast<std::size_t>(idx - 1)].paragraph_id == pid) { chosen = pid; break; }
        if (chosen >= 0) break;
    }
    SourceRef ref;
    ref.paragraph_id = chosen;
    for (int idx : selected) {
        const Slot& slot = slots[static_cast<std::size_t>(idx - 1)];
        if (slot.paragraph_id == chosen) ref.sentence_indices.push_back(slot.sentence_index);
    }
    std::sort(ref.sentence_indices.begin(), ref.sentence_indices.end());
    ref.sentence_indices.erase(
        std::unique(ref.sentence_indices.begin(), ref.sentence_indices.end()),
        ref.sentence_indices.end());
    unit.source = std::move(ref);
    unit.grounding_miss = false;
    return true;
}

std::vector<Criterion> FingerprintBuilder::standardize(const GuideUnit& unit,
                                                       const PaperDoc& doc) {
    std::string reference;
    if (unit.source) {
        const Paragraph* p = doc.find(unit.source->paragraph_id);
        if (p) {
            for (int idx : unit.source->sentence_indices)
                if (idx >= 1 && idx <= static_cast<int>(p->sentences.size())) {
                    if (!reference.empty()) reference += " ";
                    reference += p->sentences[static_cast<std::size_t>(idx - 1)].text;
                }
        }
    }
    ChatRequest req;
    req.purpose = Purpose::standardize;
    req.model_id = config_.analysis_model;
    std::string user = "Summary Fact: " + unit.text;
    if (!reference.empty()) user += "\nReference Sentence: " + reference;
    req.messages = {{"system", kStandardizeSystem}, {"user", user}};

    nlohmann::json list;
    try {
        list = complete_parsed(req, StructKind::json_list, "standardize");
    } catch (const StageFailure&) {
        warn("standardization skipped for unit " + unit.id + " (unparseable)");
        return {};
    }
    std::vector<Criterion> out;
    for (const auto& e : list) {
        if (!e.is_object() || !e.contains("criterion") || !e["criterion"].is_string()) {
            warn("standardization entry without criterion string for unit " + unit.id);
            continue;
        }
        std::string rendered = e["criterion"].get<std::string>();
        try {
            auto [fact, scope] = parse_fact_scope(rendered);
            Criterion c;
            c.id = "c" + std::to_string(next_criterion_id_++);
            c.fact = fact;
            c.scope = scope;
            c.rendered = rendered;
            c.origin_guide_id = unit.id;
            c.source = unit.source;
            out.push_back(std::move(c));
        } catch (const SpanError& err) {
            warn("rejected criterion for unit " + unit.id + ": " + err.what());
        }
    }
    return out;
}

std::vector<std::string> FingerprintBuilder::semantic_filter(
    const std::vector<Criterion>& cluster_members) {
    std::string numbered;
    for (std::size_t i = 0; i < cluster_members.size(); ++i)
        numbered += std::to_string(i + 1) + ". " + cluster_members[i].rendered + "\n";
    ChatRequest req;
    req.purpose = Purpose::filter;
    req.model_id = config_.analysis_model;
    req.messages = {{"system", kFilterSystem}, {"user", "Criteria:\n" + numbered}};

    nlohmann::json obj;
    try {
        obj = complete_parsed(req, StructKind::json_object, "filter");
    } catch (const StageFailure&) {
        warn("filter selection unparseable; keeping first member of cluster");
        return {cluster_members.front().id};
    }
    std::vector<int> indices;
    for (const auto& e : obj.value("selected_indices", nlohmann::json::array())) {
        if (!e.is_number_integer()) continue;
        int idx = e.get<int>();
        if (idx >= 1 && idx <= static_cast<int>(cluster_members.size()) &&
            std::find(indices.begin(), indices.end(), idx) == indices.end())
            indices.push_back(idx);
    }
    if (indices.empty()) {
        warn("filter returned no valid selection; keeping first member of cluster");
        return {cluster_members.front().id};
    }
    if (static_cast<int>(indices.size()) > config_.filter_cap) {
        warn("filter selected more than " + std::to_string(config_.filter_cap) +
             " members; clamping");
        indices.resize(static_cast<std::size_t>(config_.filter_cap));
    }
    std::vector<std::string> ids;
    for (int idx : indices) ids.push_back(cluster_members[static_cast<std::size_t>(idx - 1)].id);
    return ids;
}

Fingerprint FingerprintBuilder::build(const PaperDoc& doc) {
    if (doc.paragraphs.empty()) throw EmptyDocument();

    guides_.clear();
    raw_criteria_.clear();
    clusters_.clear();

    auto fw = extract_framework_guides(doc);
    auto cfg = extract_configuration_guides(doc);
    auto ex = exhaustive_scan(doc, config_.context_window);
    guides_.insert(guides_.end(), fw.begin(), fw.end());
    guides_.insert(guides_.end(), cfg.begin(), cfg.end());
    guides_.insert(guides_.end(), ex.begin(), ex.end());

    Fingerprint fp;
    fp.stage_counts.guides = static_cast<int>(guides_.size());

    // Only framework/configuration units go through retrieval grounding;
    // exhaustive units already carry their own sentence coordinates.
    for (auto& unit : guides_)
        if (unit.level != GuideLevel::exhaustive) ground(unit, doc);

    for (const auto& unit : guides_) {
        auto criteria = standardize(unit, doc);
        raw_criteria_.insert(raw_criteria_.end(), criteria.begin(), criteria.end());
    }
    fp.stage_counts.standardized = static_cast<int>(raw_criteria_.size());

    std::vector<std::vector<double>> fact_embeddings;
    fact_embeddings.reserve(raw_criteria_.size());
    for (const auto& c : raw_criteria_) fact_embeddings.push_back(gateway_.embed(c.fact));
    DedupResult deduped = dedup(raw_criteria_, fact_embeddings, config_.dedup_threshold);
    clusters_ = deduped.clusters;
    fp.stage_counts.after_dedup = static_cast<int>(deduped.survivors.size());

    // Semantic filtering per multi-survivor cluster; singletons pass through.
    std::map<std::string, const Criterion*> by_id;
    for (const auto& c : deduped.survivors) by_id[c.id] = &c;
    std::vector<std::string> kept_ids;
    for (const auto& cluster : clusters_) {
        std::vector<Criterion> members;
        for (const auto& id : cluster.member_ids) {
            auto it = by_id.find(id);
            if (it != by_id.end()) members.push_back(*it->second);
        }
        if (members.empty()) continue;
        if (members.size() == 1) {
            kept_ids.push_back(members.front().id);
        } else {
            auto selected = semantic_filter(members);
            kept_ids.insert(kept_ids.end(), selected.begin(), selected.end());
        }
    }
    for (const auto& c : deduped.survivors)
        if (std::find(kept_ids.begin(), kept_ids.end(), c.id) != kept_ids.end())
            fp.criteria.push_back(c);
    fp.stage_counts.final_count = static_cast<int>(fp.criteria.size());
    return fp;
}

// -------------------------------------------------------------------- json

nlohmann::json to_json(const SourceRef& ref) {
    return {{"paragraph_id", ref.paragraph_id}, {"sentence_indices", ref.sentence_indices}};
}

SourceRef source_ref_from_json(const nlohmann::json& j) {
    SourceRef r;
    r.paragraph_id = j.value("paragraph_id", -1);
    r.sentence_indices = j.value("sentence_indices", std::vector<int>{});
    return r;
}

nlohmann::json to_json(const GuideUnit& unit) {
    nlohmann::json j = {{"id", unit.id},
                        {"level", to_string(unit.level)},
                        {"text", unit.text},
                        {"grounding_miss", unit.grounding_miss}};
    if (unit.aspect) j["aspect"] = to_string(*unit.aspect);
    if (unit.source) j["source"] = to_json(*unit.source);
    return j;
}

GuideUnit guide_unit_from_json(const nlohmann::json& j) {
    GuideUnit u;
    u.id = j.value("id", "");
    const std::string level = j.value("level", "framework");
    if (level == "configuration")
        u.level = GuideLevel::configuration;
    else if (level == "exhaustive")
        u.level = GuideLevel::exhaustive;
    else
        u.level = GuideLevel::framework;
    u.text = j.value("text", "");
    u.grounding_miss = j.value("grounding_miss", false);
    if (j.contains("aspect")) {
        const std::string a = j["aspect"].get<std::string>();
        if (a == "model")
            u.aspect = Aspect::model;
        else if (a == "training")
            u.aspect = Aspect::training;
        else if (a == "evaluation")
            u.aspect = Aspect::evaluation;
        else
            u.aspect = Aspect::data;
    }
    if (j.contains("source")) u.source = source_ref_from_json(j["source"]);
    return u;
}

nlohmann::json to_json(const Criterion& criterion) {
    nlohmann::json j = {{"id", criterion.id},
                        {"fact", criterion.fact},
                        {"rendered", criterion.rendered},
                        {"origin_guide_id", criterion.origin_guide_id}};
    if (criterion.scope) j["scope"] = *criterion.scope;
    if (criterion.source) j["source"] = to_json(*criterion.source);
    return j;
}

Criterion criterion_from_json(const nlohmann::json& j) {
    Criterion c;
    c.id = j.value("id", "");
    c.fact = j.value("fact", "");
    if (j.contains("scope")) c.scope = j["scope"].get<std::string>();
    c.rendered = j.value("rendered", "");
    c.origin_guide_id = j.value("origin_guide_id", "");
    if (j.contains("source")) c.source = source_ref_from_json(j["source"]);
    return c;
}

nlohmann::json to_json(const Fingerprint& fp) {
    nlohmann::json criteria = nlohmann::json::array();
    for (const auto& c : fp.criteria) criteria.push_back(to_json(c));
    return {{"criteria", criteria},
            {"stage_counts",
             {{"guides", fp.stage_counts.guides},
              {"standardized", fp.stage_counts.standardized},
              {"after_dedup", fp.stage_counts.after_dedup},
              {"final", fp.stage_counts.final_count}}}};
}

Fingerprint fingerprint_from_json(const nlohmann::json& j) {
    Fingerprint fp;
    for (const auto& c : j.value("criteria", nlohmann::json::array()))
        fp.criteria.push_back(criterion_from_json(c));
    if (j.contains("stage_counts")) {
        const auto& sc = j["stage_counts"];
        fp.stage_counts.guides = sc.value("guides", 0);
        fp.stage_counts.standardized = sc.value("standardized", 0);
        fp.stage_counts.after_dedup = sc.value("after_dedup", 0);
        fp.stage_counts.final_count = sc.value("final", 0);
    }
    return fp;
}

nlohmann::json to_json(const std::vector<Cluster>& clusters) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : clusters)
        arr.push_back({{"member_ids", c.member_ids}, {"threshold", c.threshold}});
    return arr;
}

}  // namespace repro
