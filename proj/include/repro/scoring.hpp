#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "repro/fingerprint.hpp"
#include "repro/gateway.hpp"

namespace repro {

// Weighted evaluation-tree node: either an internal node with children or a
// leaf carrying a pass/fail requirement.
struct RubricNode {
    std::string id;
    double weight = 1.0;
    std::vector<RubricNode> children;
    std::optional<std::string> leaf_requirement;
    std::optional<int> leaf_score;  // 0 or 1 once graded

    bool is_leaf() const { return leaf_requirement.has_value(); }
};

struct MatchReport {
    int rubric_total = 0;
    int rubric_covered = 0;
    int fp_total = 0;
    int fp_matching = 0;
    double recall = 0.0;
    double precision = 0.0;
};

// Recursive weighted average from leaves to root; result in [0,1].
// Throws UngradedLeaf / DegenerateWeights.
double score_rubric(const RubricNode& root);

// Fraction of passing leaves. Throws EmptyRubric on an empty list.
double pr_leaf(const std::vector<int>& leaf_scores);

// Depth-first leaf collection, left to right.
std::vector<const RubricNode*> collect_leaves(const RubricNode& root);

RubricNode rubric_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RubricNode& node);

struct MatcherConfig {
    std::string analysis_model = "analysis";
    int batch_size = 20;
    int max_reprompts = 2;
};

// LLM-judged coverage of rubric requirements by fingerprint criteria.
// recall = covered rubric leaves / leaves; precision = matching criteria / criteria.
MatchReport match_fingerprint_to_rubric(Gateway& gateway, const Fingerprint& fingerprint,
                                        const std::vector<std::string>& rubric_leaves,
                                        const MatcherConfig& config,
                                        std::vector<std::string>* warnings = nullptr);

nlohmann::json to_json(const MatchReport& report);

}  // namespace repro
