#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "repro/fingerprint.hpp"
#include "repro/gateway.hpp"

namespace repro {

struct Workspace {
    std::map<std::string, std::string> files;  // relative path -> text
    std::string config_doc;                    // config.yaml content
};

struct FillTarget {
    std::string file;
    std::string symbol;
    std::string kind;        // "class" or "function"
    std::string body_state;  // "stub" or "filled"
};

struct FillOutcome {
    FillTarget target;
    bool filled = false;
    int reprompts = 0;
    std::string note;
};

struct CodegenConfig {
    std::string coding_model = "coding";
    int max_reprompts = 2;
    std::string main_file = "main.py";
};

class CodeGenerator {
public:
    CodeGenerator(Gateway& gateway, CodegenConfig config);

    // Skeleton with classes Data/Model/Trainer/Evaluator, main(), docstrings,
    // stub bodies only. Also synthesizes config.yaml from configuration guides.
    Workspace generate_skeleton(const std::vector<GuideUnit>& guides);

    // Stable fill order: Data, Model, Trainer, Evaluator, main, extras in
    // file order. Only stubbed symbols are returned.
    std::vector<FillTarget> list_fill_targets(const Workspace& workspace) const;

    // Replaces the target stub with model code; existing imports must survive.
    FillOutcome fill_target(Workspace& workspace, const FillTarget& target);

    // Full initial-implementation stage: skeleton, then sequential fills.
    Workspace initial_implementation(const std::vector<GuideUnit>& guides,
                                     std::vector<FillOutcome>* fill_log = nullptr);

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::string request_code(Purpose purpose, const std::string& user_prompt,
                             const std::string& stage);

    Gateway& gateway_;
    CodegenConfig config_;
    std::vector<std::string> warnings_;
};

// Extracts the first fenced code block (```python ... ```), or the whole
// text when no fence is present.
std::string extract_code_block(const std::string& text);

// Builds config.yaml content from configuration-level guide units.
std::string synthesize_config_doc(const std::vector<GuideUnit>& guides);

nlohmann::json to_json(const Workspace& ws);
Workspace workspace_from_json(const nlohmann::json& j);

}  // namespace repro
