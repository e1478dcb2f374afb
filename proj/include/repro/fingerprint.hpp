#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "repro/gateway.hpp"
#include "repro/paper.hpp"
#include "repro/structured.hpp"

namespace repro {

enum class GuideLevel { framework, configuration, exhaustive };
enum class Aspect { data, model, training, evaluation };

std::string to_string(GuideLevel l);
std::string to_string(Aspect a);

struct SourceRef {
    int paragraph_id = -1;
    std::vector<int> sentence_indices;  // 1-based, strictly increasing
};

struct GuideUnit {
    std::string id;
    GuideLevel level = GuideLevel::framework;
    std::string text;
    std::optional<Aspect> aspect;  // framework level only
    std::optional<SourceRef> source;
    bool grounding_miss = false;
};

struct Criterion {
    std::string id;
    std::string fact;
    std::optional<std::string> scope;
    std::string rendered;
    std::string origin_guide_id;
    std::optional<SourceRef> source;
};

struct StageCounts {
    int guides = 0;
    int standardized = 0;
    int after_dedup = 0;
    int final_count = 0;
};

struct Fingerprint {
    std::vector<Criterion> criteria;
    StageCounts stage_counts;
};

struct Cluster {
    std::vector<std::string> member_ids;
    double threshold = 0.0;
};

// Extracts the unique <fact> span and at most one <scope> span, preserving
// the inner text verbatim. Zero, nested, or multiple fact spans -> SpanError.
std::pair<std::string, std::optional<std::string>> parse_fact_scope(const std::string& rendered);

// Equality key for duplicate detection: lowercase, punctuation stripped,
// whitespace collapsed.
std::string normalize_for_dedup(const std::string& text);

struct DedupResult {
    std::vector<Cluster> clusters;            // partition of the input
    std::vector<Criterion> survivors;         // input order preserved
};

// Single-linkage connected components over cosine(fact_i, fact_j) >= threshold;
// within a cluster, criteria identical in normalized (fact, scope) collapse to
// the earliest occurrence.
DedupResult dedup(const std::vector<Criterion>& criteria,
                  const std::vector<std::vector<double>>& fact_embeddings, double threshold);

struct FingerprintConfig {
    std::string analysis_model = "analysis";
    int top_k_paragraphs = 3;
    double dedup_threshold = 0.92;
    int context_window = 2;
    int filter_cap = 5;
    int max_reprompts = 2;
};

// Runs the supervisory-signal pipeline end to end: three-level guide
// extraction, retrieval grounding, standardization into fact-scope criteria,
// cluster dedup, and semantic filtering.
class FingerprintBuilder {
public:
    FingerprintBuilder(Gateway& gateway, FingerprintConfig config);

    std::vector<GuideUnit> extract_framework_guides(const PaperDoc& doc);
    std::vector<GuideUnit> extract_configuration_guides(const PaperDoc& doc);
    std::vector<GuideUnit> exhaustive_scan(const PaperDoc& doc, int window);
    // Attaches a SourceRef via top-k retrieval + model sentence selection.
    // Returns false (and flags the unit) on a grounding miss.
    bool ground(GuideUnit& unit, const PaperDoc& doc);
    std::vector<Criterion> standardize(const GuideUnit& unit, const PaperDoc& doc);
    // Returns ids of surviving members; members must be >= 2.
    std::vector<std::string> semantic_filter(const std::vector<Criterion>& cluster_members);

    Fingerprint build(const PaperDoc& doc);

    const std::vector<GuideUnit>& guides() const { return guides_; }
    const std::vector<Criterion>& raw_criteria() const { return raw_criteria_; }
    const std::vector<Cluster>& clusters() const { return clusters_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    int reprompt_count() const { return reprompts_; }

private:
    nlohmann::json complete_parsed(ChatRequest request, StructKind kind,
                                   const std::string& stage);
    void build_paragraph_index(const PaperDoc& doc);
    std::vector<int> top_paragraphs(const std::string& text, int k);
    void warn(const std::string& message);

    Gateway& gateway_;
    FingerprintConfig config_;
    std::vector<GuideUnit> guides_;
    std::vector<Criterion> raw_criteria_;
    std::vector<Cluster> clusters_;
    std::vector<std::string> warnings_;
    std::vector<int> index_paragraph_ids_;
    std::vector<std::vector<double>> index_embeddings_;
    int reprompts_ = 0;
    int next_guide_id_ = 0;
    int next_criterion_id_ = 0;
};

nlohmann::json to_json(const SourceRef& ref);
nlohmann::json to_json(const GuideUnit& unit);
nlohmann::json to_json(const Criterion& criterion);
nlohmann::json to_json(const Fingerprint& fp);
nlohmann::json to_json(const std::vector<Cluster>& clusters);
SourceRef source_ref_from_json(const nlohmann::json& j);
GuideUnit guide_unit_from_json(const nlohmann::json& j);
Criterion criterion_from_json(const nlohmann::json& j);
Fingerprint fingerprint_from_json(const nlohmann::json& j);

}  // namespace repro
