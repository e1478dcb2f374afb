#include "repro/scoring.hpp"

#include <algorithm>

#include "repro/error.hpp"
#include "repro/structured.hpp"

namespace repro {

double score_rubric(const RubricNode& root) {
    if (root.is_leaf()) {
        if (!root.leaf_score) throw UngradedLeaf("ungraded leaf: " + root.id);
        return static_cast<double>(*root.leaf_score);
    }
    if (root.children.empty()) throw DegenerateWeights("internal node without children: " + root.id);
    double weight_sum = 0.0;
    double acc = 0.0;
    for (const auto& child : root.children) {
        if (child.weight < 0.0) throw DegenerateWeights("negative weight at " + child.id);
        acc += child.weight * score_rubric(child);
        weight_sum += child.weight;
    }
    if (weight_sum == 0.0) throw DegenerateWeights("all-zero weights under " + root.id);
    return acc / weight_sum;
}

double pr_leaf(const std::vector<int>& leaf_scores) {
    if (leaf_scores.empty()) throw EmptyRubric();
    int passed = 0;
    for (int s : leaf_scores) passed += (s != 0);
    return static_cast<double>(passed) / static_cast<double>(leaf_scores.size());
}

std::vector<const RubricNode*> collect_leaves(const RubricNode& root) {
    std::vector<const RubricNode*> out;
    if (root.is_leaf()) {
        out.push_back(&root);
        return out;
    }
    for (const auto& child : root.children) {
        auto sub = collect_leaves(child);
        out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
}

RubricNode rubric_from_json(const nlohmann::json& j) {
    RubricNode node;
    node.id = j.value("id", "");
    node.weight = j.value("weight", 1.0);
    if (j.contains("children") && j.contains("requirement"))
        throw Error("rubric node " + node.id + " has both children and a requirement");
    if (j.contains("children")) {
        for (const auto& c : j["children"]) node.children.push_back(rubric_from_json(c));
        if (node.children.empty()) throw Error("rubric node " + node.id + " has empty children");
    } else if (j.contains("requirement")) {
        node.leaf_requirement = j["requirement"].get<std::string>();
        if (j.contains("score")) {
            int s = j["score"].get<int>();
            if (s != 0 && s != 1) throw Error("leaf score must be 0 or 1 at " + node.id);
            node.leaf_score = s;
        }
    } else {
        throw Error("rubric node " + node.id + " has neither children nor a requirement");
    }
    return node;
}

nlohmann::json to_json(const RubricNode& node) {
    nlohmann::json j = {{"id", node.id}, {"weight", node.weight}};
    if (node.is_leaf()) {
        j["requirement"] = *node.leaf_requirement;
        if (node.leaf_score) j["score"] = *node.leaf_score;
    } else {
        nlohmann::json kids = nlohmann::json::array();
        for (const auto& c : node.children) kids.push_back(to_json(c));
        j["children"] = kids;
    }
    return j;
}

namespace {

const char* kMatchSystem =
    "You are comparing extracted reproduction criteria against an official "
    "rubric. For each numbered criterion below, decide which rubric requirements "
    "(if any) it matches in substance. Respond with ONLY a valid JSON array with "
    "one entry per criterion, in order: each entry is an array of the 1-based "
    "rubric requirement numbers it matches, or [] for no match.";

}  // namespace

MatchReport match_fingerprint_to_rubric(Gateway& gateway, const Fingerprint& fingerprint,
                                        const std::vector<std::string>& rubric_leaves,
                                        const MatcherConfig& config,
                                        std::vector<std::string>* warnings) {
    MatchReport report;
    report.fp_total = static_cast<int>(fingerprint.criteria.size());
    report.rubric_total = static_cast<int>(rubric_leaves.size());
    if (report.fp_total == 0 || report.rubric_total == 0)
        throw Error("matcher requires a non-empty fingerprint and rubric");

    std::string leaf_list;
    for (std::size_t i = 0; i < rubric_leaves.size(); ++i)
        leaf_list += std::to_string(i + 1) + ". " + rubric_leaves[i] + "\n";

    std::vector<bool> leaf_covered(rubric_leaves.size(), false);
    std::vector<bool> criterion_matched(fingerprint.criteria.size(), false);

    int batch = std::max(1, config.batch_size);
    for (std::size_t start = 0; start < fingerprint.criteria.size();
         start += static_cast<std::size_t>(batch)) {
        std::size_t end =
            std::min(fingerprint.criteria.size(), start + static_cast<std::size_t>(batch));
        std::string crit_list;
        for (std::size_t i = start; i < end; ++i)
            crit_list += std::to_string(i - start + 1) + ". " + fingerprint.criteria[i].rendered +
                         "\n";
        ChatRequest req;
        req.purpose = Purpose::match;
        req.model_id = config.analysis_model;
        req.messages = {{"system", kMatchSystem},
                        {"user", "Rubric requirements:\n" + leaf_list + "\nCriteria:\n" +
                                     crit_list}};
        nlohmann::json rows;
        bool ok = false;
        for (int attempt = 0; attempt <= config.max_reprompts; ++attempt) {
            ChatResponse resp = gateway.complete(req);
            try {
                rows = extract_structured(resp.text, StructKind::json_list);
                ok = true;
                break;
            } catch (const ParseFailure&) {
                req.messages.push_back(
                    {"user", "Your previous reply was not a valid JSON array. Respond with only "
                             "the JSON array."});
            }
        }
        if (!ok) {
            if (warnings)
                warnings->push_back("matcher batch unparseable; criteria counted unmatched");
            continue;
        }
        for (std::size_t i = start; i < end && i - start < rows.size(); ++i) {
            const auto& row = rows[i - start];
            if (!row.is_array()) continue;
            for (const auto& e : row) {
                if (!e.is_number_integer()) continue;
                int leaf = e.get<int>();
                if (leaf < 1 || leaf > report.rubric_total) continue;
                leaf_covered[static_cast<std::size_t>(leaf - 1)] = true;
                criterion_matched[i] = true;
            }
        }
    }
    for (bool b : leaf_covered) report.rubric_covered += b;
    for (bool b : criterion_matched) report.fp_matching += b;
    report.recall = static_cast<double>(report.rubric_covered) / report.rubric_total;
    report.precision = static_cast<double>(report.fp_matching) / report.fp_total;
    return report;
}

nlohmann::json to_json(const MatchReport& report) {
    return {{"rubric_total", report.rubric_total},
            {"rubric_covered", report.rubric_covered},
            {"fp_total", report.fp_total},
            {"fp_matching", report.fp_matching},
            {"recall", report.recall},
            {"precision", report.precision}};
}

}  // namespace repro
