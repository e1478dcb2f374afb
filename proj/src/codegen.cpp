#include "repro/codegen.hpp"

#include <algorithm>

#include "repro/error.hpp"
#include "repro/pysrc.hpp"

namespace repro {
namespace {

const char* kSkeletonSystem =
    "You are a machine-learning engineer producing the structural skeleton of a "
    "reproduction script. From the framework and configuration guides below, "
    "write one Python script that defines exactly four classes named Data, "
    "Model, Trainer and Evaluator plus a top-level main() function. Every class "
    "and function must carry a docstring describing its purpose, arguments and "
    "methods, and every body must contain only the docstring and `pass` — no "
    "executable statements. Put all imports at the top. Respond with only the "
    "Python code in a ```python fenced block.";

const char* kFillSystem =
    "You are a machine-learning engineer implementing one part of a code "
    "skeleton in a multi-turn dialogue. You will receive the current script, the "
    "experiment configuration, the list of already-imported modules, and the "
    "single target class or function to implement. Write the complete "
    "implementation of that target. Do not modify or remove any existing "
    "import; if you need new imports, put them at the very top of your code "
    "block. Do not leave placeholders, TODO comments, or dummy implementations. "
    "Respond with only the Python code in a ```python fenced block.";

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::string extract_code_block(const std::string& text) {
    std::size_t open = text.find("```");
    if (open == std::string::npos) return text;
    std::size_t body_start = text.find('\n', open);
    if (body_start == std::string::npos) return text;
    ++body_start;
    std::size_t close = text.find("```", body_start);
    if (close == std::string::npos) return text.substr(body_start);
    return text.substr(body_start, close - body_start);
}

std::string synthesize_config_doc(const std::vector<GuideUnit>& guides) {
    std::string out = "# experiment configuration assembled from extracted guides\n";
    for (const auto& g : guides) {
        if (g.level != GuideLevel::configuration) continue;
        std::string text = g.text;
        // "name — value" / "name: value" / "name - value" become YAML entries.
        std::size_t sep = text.find("—");  // em dash
        std::size_t sep_len = 3;
        if (sep == std::string::npos) { sep = text.find(" - "); sep_len = 3; }
        if (sep == std::string::npos) { sep = text.find(": "); sep_len = 2; }
        if (sep != std::string::npos) {
            std::string key = trim(text.substr(0, sep));
            std::string value = trim(text.substr(sep + sep_len));
            std::replace(key.begin(), key.end(), ' ', '_');
            if (!key.empty() && !value.empty()) {
                out += key + ": " + value + "\n";
                continue;
            }
        }
        out += "# " + text + "\n";
    }
    return out;
}

CodeGenerator::CodeGenerator(Gateway& gateway, CodegenConfig config)
    : gateway_(gateway), config_(std::move(config)) {}

std::string CodeGenerator::request_code(Purpose purpose, const std::string& user_prompt,
                                        const std::string& stage) {
    ChatRequest req;
    req.purpose = purpose;
    req.model_id = config_.coding_model;
    req.messages = {{"system", purpose == Purpose::skeleton ? kSkeletonSystem : kFillSystem},
                    {"user", user_prompt}};
    ChatResponse resp = gateway_.complete(req);
    return extract_code_block(resp.text);
}

Workspace CodeGenerator::generate_skeleton(const std::vector<GuideUnit>& guides) {
    if (guides.empty()) throw StageFailure("skeleton", "no guides supplied");
    std::string guide_text;
    for (const auto& g : guides) {
        if (g.level == GuideLevel::exhaustive) continue;
        guide_text += "- [" + to_string(g.level) + "] " + g.text + "\n";
    }
    std::string user = "Guides:\n" + guide_text;

    std::string code;
    std::string failure;
    for (int attempt = 0; attempt <= config_.max_reprompts; ++attempt) {
        if (attempt > 0) warnings_.push_back("skeleton re-prompt: " + failure);
        code = request_code(Purpose::skeleton, user, "skeleton");
        auto symbols = pysrc::top_level_symbols(code);
        auto has = [&](const std::string& name, const std::string& kind) {
            return std::any_of(symbols.begin(), symbols.end(), [&](const pysrc::Symbol& s) {
                return s.name == name && s.kind == kind;
            });
        };
        if (!has("Data", "class") || !has("Model", "class") || !has("Trainer", "class") ||
            !has("Evaluator", "class")) {
            failure = "skeleton missing one of the mandated classes Data/Model/Trainer/Evaluator";
            continue;
        }
        if (!has("main", "function")) {
            failure = "skeleton missing main()";
            continue;
        }
        if (!pysrc::all_bodies_stubbed(code)) {
            failure = "skeleton contains executable body statements";
            continue;
        }
        Workspace ws;
        ws.files[config_.main_file] = code;
        ws.config_doc = synthesize_config_doc(guides);
        return ws;
    }
    throw StageFailure("skeleton", failure);
}

std::vector<FillTarget> CodeGenerator::list_fill_targets(const Workspace& workspace) const {
    std::vector<FillTarget> targets;
    static const std::vector<std::string> mandated = {"Data", "Model", "Trainer", "Evaluator",
                                                      "main"};
    for (const auto& [path, text] : workspace.files) {
        auto symbols = pysrc::top_level_symbols(text);
        std::vector<FillTarget> ordered;
        std::vector<FillTarget> extras;
        for (const auto& name : mandated)
            for (const auto& sym : symbols)
                if (sym.name == name && sym.is_stub)
                    ordered.push_back({path, sym.name, sym.kind, "stub"});
        for (const auto& sym : symbols) {
            if (!sym.is_stub) continue;
            if (std::find(mandated.begin(), mandated.end(), sym.name) != mandated.end()) continue;
            extras.push_back({path, sym.name, sym.kind, "stub"});
        }
        targets.insert(targets.end(), ordered.begin(), ordered.end());
        targets.insert(targets.end(), extras.begin(), extras.end());
    }
    return targets;
}

FillOutcome CodeGenerator::fill_target(Workspace& workspace, const FillTarget& target) {
    FillOutcome outcome;
    outcome.target = target;

    auto file_it = workspace.files.find(target.file);
    if (file_it == workspace.files.end())
        throw StageFailure("fill", "fill target file not in workspace: " + target.file);

    std::string failure;
    for (int attempt = 0; attempt <= config_.max_reprompts; ++attempt) {
        if (attempt > 0) {
            warnings_.push_back("fill re-prompt for " + target.symbol + ": " + failure);
            ++outcome.reprompts;
        }
        const std::string& before = file_it->second;
        auto imports_before = pysrc::imports(before);
        std::string import_list;
        for (const auto& imp : imports_before) import_list += imp + "\n";

        std::string user = "Current script:\n```python\n" + before + "```\n\n" +
                           "Configuration (config.yaml):\n```yaml\n" + workspace.config_doc +
                           "```\n\nAlready imported modules:\n" + import_list +
                           "\nTarget to implement: " + target.kind + " " + target.symbol;
        std::string code = request_code(Purpose::fill, user, "fill");

        if (pysrc::has_placeholder(code)) {
            failure = "response contains placeholder markers";
            continue;
        }

        auto [new_imports, body] = pysrc::split_leading_imports(code);
        auto body_symbols = pysrc::top_level_symbols(body);

        std::string updated;
        // A response that redefines several of the file's symbols is treated
        // as a full-file rewrite; otherwise only the target block is spliced.
        auto file_symbols = pysrc::top_level_symbols(before);
        int overlap = 0;
        for (const auto& fs : file_symbols)
            for (const auto& bs : body_symbols)
                if (fs.name == bs.name) ++overlap;
        if (overlap >= 2) {
            updated = code;
        } else {
            const pysrc::Symbol* sym = nullptr;
            for (const auto& fs : file_symbols)
                if (fs.name == target.symbol) sym = &fs;
            if (!sym) {
                failure = "target symbol not found in file";
                continue;
            }
            bool defines_target = std::any_of(
                body_symbols.begin(), body_symbols.end(),
                [&](const pysrc::Symbol& s) { return s.name == target.symbol; });
            if (!defines_target) {
                failure = "response does not define the target symbol";
                continue;
            }
            updated = pysrc::replace_symbol_block(before, *sym, body);
            std::vector<std::string> imps(new_imports.begin(), new_imports.end());
            updated = pysrc::merge_imports(updated, imps);
        }

        auto imports_after = pysrc::imports(updated);
        bool preserved = std::all_of(imports_before.begin(), imports_before.end(),
                                     [&](const std::string& imp) { return imports_after.count(imp); });
        if (!preserved) {
            failure = "response removed an existing import";
            continue;
        }

        file_it->second = updated;
        outcome.filled = true;
        return outcome;
    }
    outcome.filled = false;
    outcome.note = failure;
    warnings_.push_back("fill failed for " + target.symbol + ": " + failure + " (stub retained)");
    return outcome;
}

Workspace CodeGenerator::initial_implementation(const std::vector<GuideUnit>& guides,
                                                std::vector<FillOutcome>* fill_log) {
    Workspace ws = generate_skeleton(guides);
    auto targets = list_fill_targets(ws);
    for (const auto& target : targets) {
        FillOutcome outcome = fill_target(ws, target);
        if (fill_log) fill_log->push_back(outcome);
    }
    return ws;
}

nlohmann::json to_json(const Workspace& ws) {
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [path, text] : ws.files) files[path] = text;
    return {{"files", files}, {"config_doc", ws.config_doc}};
}

Workspace workspace_from_json(const nlohmann::json& j) {
    Workspace ws;
    for (auto it = j.at("files").begin(); it != j.at("files").end(); ++it)
        ws.files[it.key()] = it.value().get<std::string>();
    ws.config_doc = j.value("config_doc", "");
    return ws;
}

}  // namespace repro
