#include "repro/reflect.hpp"

#include <algorithm>
#include <cctype>
#include <future>

#include "repro/error.hpp"
#include "repro/structured.hpp"

namespace repro {
namespace {

const char* kVerifySystem =
    "You are grading one criterion of a paper-reproduction attempt. You will see "
    "the paper context, the submitted files, and ONE criterion to check. Answer "
    "in exactly three parts. Under the heading 'Expected Implementation', state "
    "in 2-3 sentences what a correct implementation contains. Under 'Actual "
    "Findings', compare the submission against that expectation. Under "
    "'Verification Result', give a score of 0 or 1 (write it as 'score: 0' or "
    "'score: 1') with brief reasoning. Always provide a score; if something is "
    "missing from the submission, treat it as a failure. Be strict, but do not "
    "grade anything outside this one criterion.";

const char* kPlanSystem =
    "You are the revision planner for a multi-file Python project. From the "
    "evaluation feedback and the current code, produce a concise, actionable "
    "fix plan. Structure the output in two sections. First '### CONFIG_PLAN': a "
    "numbered list of changes to config.yaml, or the line 'No changes needed "
    "for config.yaml'. Then '### CODE_PLAN': changes grouped by file, each under "
    "its own '## Code: [filename]' sub-heading as a numbered list. Write the "
    "plan only, not the code.";

const char* kRefineSystem =
    "You are the code editor executing a revision plan on a multi-file Python "
    "project. Apply the minimum changes needed to carry out the plan, in the "
    "order it specifies, preserving unrelated code. Do not leave TODO comments "
    "or placeholders. Return the complete revised content of ALL project files, "
    "including unchanged ones and config.yaml if it changes: each file as a "
    "'## Code: [filename]' line followed by a fenced code block.";

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n*#:-");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct VerifySections {
    std::string expected;
    std::string findings;
    int score = -1;
};

bool parse_verify_response(const std::string& text, VerifySections* out) {
    std::string l = lower(text);
    std::size_t p1 = l.find("expected implementation");
    std::size_t p2 = l.find("actual findings");
    std::size_t p3 = l.find("verification result");
    if (p1 == std::string::npos || p2 == std::string::npos || p3 == std::string::npos) return false;
    if (!(p1 < p2 && p2 < p3)) return false;
    out->expected = trim(text.substr(p1 + 23, p2 - (p1 + 23)));
    out->findings = trim(text.substr(p2 + 15, p3 - (p2 + 15)));
    std::string result = l.substr(p3);
    std::size_t pos = 0;
    out->score = -1;
    while ((pos = result.find("score", pos)) != std::string::npos) {
        std::size_t i = pos + 5;
        while (i < result.size() && !std::isdigit(static_cast<unsigned char>(result[i]))) {
            // Stop scanning past the immediate neighborhood of the word.
            if (i - pos > 12) break;
            ++i;
        }
        if (i < result.size() && std::isdigit(static_cast<unsigned char>(result[i]))) {
            char d = result[i];
            bool lone = (i + 1 >= result.size()) ||
                        !std::isdigit(static_cast<unsigned char>(result[i + 1]));
            if (lone && (d == '0' || d == '1')) {
                out->score = d - '0';
                break;
            }
        }
        pos += 5;
    }
    if (out->score < 0) return false;
    if (out->expected.empty() || out->findings.empty()) return false;
    return true;
}

}  // namespace

Reflector::Reflector(Gateway& gateway, LoopConfig config, std::string paper_text)
    : gateway_(gateway), config_(std::move(config)), paper_text_(std::move(paper_text)) {}

std::string Reflector::render_workspace(const Workspace& workspace) const {
    std::string out;
    for (const auto& [path, text] : workspace.files)
        out += "## File: " + path + "\n```python\n" + text + "```\n\n";
    out += "## File: config.yaml\n```yaml\n" + workspace.config_doc + "```\n";
    return out;
}

std::string Reflector::paper_context() const {
    if (static_cast<int>(paper_text_.size()) <= config_.paper_context_budget) return paper_text_;
    // Methods-first truncation: spend most of the budget from the first
    // methods heading onward, the rest from the top of the paper.
    std::size_t methods = lower(paper_text_).find("method");
    std::size_t budget = static_cast<std::size_t>(config_.paper_context_budget);
    if (methods == std::string::npos || methods + budget > paper_text_.size() + budget / 4)
        return paper_text_.substr(0, budget);
    std::size_t methods_share = budget * 3 / 4;
    std::size_t intro_share = budget - methods_share;
    return paper_text_.substr(0, intro_share) + "\n...\n" +
           paper_text_.substr(methods, methods_share);
}

Verdict Reflector::verify_criterion(const Workspace& workspace, const Criterion& criterion,
                                    int iteration) {
    int seq = gateway_.reserve_seq(Purpose::verify, config_.max_reprompts + 1);
    return verify_criterion_seq(workspace, criterion, iteration, seq);
}

Verdict Reflector::verify_criterion_seq(const Workspace& workspace, const Criterion& criterion,
                                        int iteration, int seq) {
    ChatRequest req;
    req.purpose = Purpose::verify;
    req.model_id = config_.analysis_model;
    std::string user = "Paper context:\n" + paper_context() + "\n\nSubmission:\n" +
                       render_workspace(workspace) + "\nCriterion to check:\n" +
                       criterion.rendered;
    req.messages = {{"system", kVerifySystem}, {"user", user}};

    Verdict v;
    v.criterion_id = criterion.id;
    v.iteration = iteration;
    for (int attempt = 0; attempt <= config_.max_reprompts; ++attempt) {
        ChatResponse resp;
        try {
            resp = gateway_.complete_seq(req, seq + attempt);
        } catch (const ReplayMiss&) {
            throw;
        } catch (const GatewayError& e) {
            warnings_.push_back("verification gateway failure for " + criterion.id + ": " +
                                e.what());
            break;
        }
        VerifySections sections;
        if (parse_verify_response(resp.text, &sections)) {
            v.expected = sections.expected;
            v.findings = sections.findings;
            v.score = sections.score;
            return v;
        }
        req.messages.push_back(
            {"user", "Your previous reply was missing the three sections or the score. "
                     "Answer again with 'Expected Implementation', 'Actual Findings', and "
                     "'Verification Result' containing 'score: 0' or 'score: 1'."});
    }
    // Fail-closed: a missing score never counts as reproduction success.
    v.expected = criterion.rendered;
    v.findings = "verification unparseable";
    v.score = 0;
    return v;
}

std::vector<Verdict> Reflector::verify_all(const Workspace& workspace,
                                           const Fingerprint& fingerprint, int iteration) {
    const int n = static_cast<int>(fingerprint.criteria.size());
    std::vector<Verdict> verdicts(static_cast<std::size_t>(n));
    if (n == 0) return verdicts;
    // Sequence numbers are reserved up front in fingerprint order so transcript
    // keys are identical no matter how the fan-out is scheduled.
    int per = config_.max_reprompts + 1;
    int base = gateway_.reserve_seq(Purpose::verify, n * per);

    int parallelism = std::max(1, config_.verify_parallelism);
    std::size_t next = 0;
    while (next < static_cast<std::size_t>(n)) {
        std::vector<std::future<void>> tasks;
        std::size_t chunk_end = std::min(static_cast<std::size_t>(n), next + parallelism);
        for (std::size_t i = next; i < chunk_end; ++i) {
            tasks.push_back(std::async(std::launch::async, [&, i]() {
                verdicts[i] = verify_criterion_seq(workspace, fingerprint.criteria[i], iteration,
                                                   base + static_cast<int>(i) * per);
            }));
        }
        for (auto& t : tasks) t.get();
        next = chunk_end;
    }
    return verdicts;
}

RevisionPlan Reflector::plan_revision(const std::vector<Verdict>& verdicts,
                                      const Workspace& workspace) {
    std::vector<const Verdict*> failing;
    for (const auto& v : verdicts)
        if (v.score == 0) failing.push_back(&v);

    RevisionPlan merged;
    int batch_size = std::max(1, config_.feedback_batch_size);
    int batches = 0, failed_batches = 0;
    for (std::size_t start = 0; start < failing.size();
         start += static_cast<std::size_t>(batch_size)) {
        ++batches;
        std::size_t end = std::min(failing.size(), start + static_cast<std::size_t>(batch_size));
        std::string feedback;
        for (std::size_t i = start; i < end; ++i) {
            const Verdict& v = *failing[i];
            feedback += "Criterion " + v.criterion_id + " FAILED.\nExpected: " + v.expected +
                        "\nFindings: " + v.findings + "\n\n";
        }
        ChatRequest req;
        req.purpose = Purpose::plan;
        req.model_id = config_.coding_model;
        req.messages = {{"system", kPlanSystem},
                        {"user", "Evaluation feedback:\n" + feedback + "\nCurrent code:\n" +
                                     render_workspace(workspace)}};
        nlohmann::json plan_json;
        bool ok = false;
        for (int attempt = 0; attempt <= config_.max_reprompts; ++attempt) {
            ChatResponse resp = gateway_.complete(req);
            try {
                plan_json = extract_structured(resp.text, StructKind::plan_document);
                ok = true;
                break;
            } catch (const ParseFailure& e) {
                warnings_.push_back(std::string("plan re-prompt: ") + e.what());
                req.messages.push_back(
                    {"user", "Your previous reply was missing the required headings. Respond "
                             "again with '### CONFIG_PLAN' and '### CODE_PLAN' sections."});
            }
        }
        if (!ok) {
            ++failed_batches;
            warnings_.push_back("plan batch unparseable after re-prompts; batch dropped");
            continue;
        }
        RevisionPlan part = revision_plan_from_json(plan_json);
        merged.config_steps.insert(merged.config_steps.end(), part.config_steps.begin(),
                                   part.config_steps.end());
        for (const auto& fp : part.file_plans) {
            auto it = std::find_if(merged.file_plans.begin(), merged.file_plans.end(),
                                   [&](const FilePlan& p) { return p.file == fp.file; });
            if (it == merged.file_plans.end()) merged.file_plans.push_back(fp);
            else it->steps.insert(it->steps.end(), fp.steps.begin(), fp.steps.end());
        }
    }
    if (batches > 0 && failed_batches == batches)
        throw StageFailure("plan", "every planner batch was unparseable");
    return merged;
}

Workspace Reflector::apply_revision(const Workspace& workspace, const RevisionPlan& plan) {
    std::string plan_text = "### CONFIG_PLAN\n";
    if (plan.config_steps.empty()) plan_text += "No changes needed for config.yaml\n";
    for (std::size_t i = 0; i < plan.config_steps.size(); ++i)
        plan_text += std::to_string(i + 1) + ". " + plan.config_steps[i] + "\n";
    plan_text += "\n### CODE_PLAN\n";
    for (const auto& fp : plan.file_plans) {
        plan_text += "## Code: " + fp.file + "\n";
        for (std::size_t i = 0; i < fp.steps.size(); ++i)
            plan_text += std::to_string(i + 1) + ". " + fp.steps[i] + "\n";
    }

    ChatRequest req;
    req.purpose = Purpose::refine;
    req.model_id = config_.coding_model;
    req.messages = {{"system", kRefineSystem},
                    {"user", "Paper context:\n" + paper_context() + "\n\nRevision plan:\n" +
                                 plan_text + "\nCurrent project files:\n" +
                                 render_workspace(workspace)}};

    nlohmann::json files_json;
    bool have_all = false;
    for (int attempt = 0; attempt <= config_.max_reprompts; ++attempt) {
        ChatResponse resp = gateway_.complete(req);
        try {
            files_json = extract_structured(resp.text, StructKind::code_files);
        } catch (const ParseFailure& e) {
            warnings_.push_back(std::string("refine re-prompt: ") + e.what());
            req.messages.push_back(
                {"user", "Your previous reply had no '## Code: [filename]' blocks. Return every "
                         "file again in that format."});
            continue;
        }
        const auto& files = files_json["files"];
        bool missing = false;
        for (const auto& [path, text] : workspace.files)
            if (!files.contains(path)) { missing = true; break; }
        if (!missing) {
            have_all = true;
            break;
        }
        if (attempt < config_.max_reprompts)
            req.messages.push_back(
                {"user", "Your previous reply omitted at least one original file. Return the "
                         "complete revised content of ALL files."});
    }
    if (files_json.is_null() || !files_json.contains("files"))
        throw StageFailure("refine", "editor produced no parseable file blocks");

    const auto& files = files_json["files"];
    Workspace updated;
    updated.config_doc = workspace.config_doc;
    for (const auto& [path, text] : workspace.files) {
        if (files.contains(path)) {
            updated.files[path] = files[path].get<std::string>();
        } else {
            updated.files[path] = text;  // carry-forward rule
            warnings_.push_back("refine response omitted " + path + "; prior version kept");
        }
    }
    (void)have_all;
    for (auto it = files.begin(); it != files.end(); ++it) {
        std::string path = it.key();
        if (workspace.files.count(path)) continue;
        if (path == "config.yaml") {
            updated.config_doc = it.value().get<std::string>();
            continue;
        }
        bool planned = std::any_of(plan.file_plans.begin(), plan.file_plans.end(),
                                   [&](const FilePlan& p) { return p.file == path; });
        if (planned) {
            updated.files[path] = it.value().get<std::string>();
        } else {
            warnings_.push_back("refine response added unplanned file " + path + "; ignored");
        }
    }
    return updated;
}

std::pair<Workspace, LoopTrace> Reflector::reflect_loop(Workspace workspace,
                                                        const Fingerprint& fingerprint,
                                                        LoopSink* sink) {
    LoopTrace trace;
    const int total = static_cast<int>(fingerprint.criteria.size());
    for (int iter = 1; iter <= config_.max_iterations; ++iter) {
        IterationRecord record;
        record.iteration = iter;
        record.verdicts = verify_all(workspace, fingerprint, iter);
        for (const auto& v : record.verdicts) record.pass_count += v.score;

        if (record.pass_count == total) {
            trace.iterations.push_back(record);
            if (sink) sink->on_iteration(trace.iterations.back(), workspace);
            trace.terminal_reason = TerminalReason::all_pass;
            return {workspace, trace};
        }
        if (iter == config_.max_iterations) {
            trace.iterations.push_back(record);
            if (sink) sink->on_iteration(trace.iterations.back(), workspace);
            trace.terminal_reason = TerminalReason::max_iterations;
            return {workspace, trace};
        }
        try {
            record.plan = plan_revision(record.verdicts, workspace);
            Workspace revised = apply_revision(workspace, record.plan);
            for (const auto& [path, text] : revised.files) {
                auto it = workspace.files.find(path);
                if (it == workspace.files.end() || it->second != text)
                    record.changed_files.push_back(path);
            }
            if (revised.config_doc != workspace.config_doc)
                record.changed_files.push_back("config.yaml");
            workspace = std::move(revised);
            trace.iterations.push_back(record);
            if (sink) sink->on_iteration(trace.iterations.back(), workspace);
        } catch (const StageFailure& e) {
            trace.iterations.push_back(record);
            if (sink) sink->on_iteration(trace.iterations.back(), workspace);
            trace.terminal_reason = TerminalReason::max_iterations;
            trace.error_flag = true;
            trace.error_detail = e.what();
            return {workspace, trace};
        }
    }
    trace.terminal_reason = TerminalReason::max_iterations;
    return {workspace, trace};
}

// -------------------------------------------------------------------- json

RevisionPlan revision_plan_from_json(const nlohmann::json& j) {
    RevisionPlan plan;
    for (const auto& s : j.value("config_steps", nlohmann::json::array()))
        plan.config_steps.push_back(s.get<std::string>());
    for (const auto& fp : j.value("file_plans", nlohmann::json::array())) {
        FilePlan p;
        p.file = fp.value("file", "");
        for (const auto& s : fp.value("steps", nlohmann::json::array()))
            p.steps.push_back(s.get<std::string>());
        plan.file_plans.push_back(std::move(p));
    }
    return plan;
}

nlohmann::json to_json(const RevisionPlan& plan) {
    nlohmann::json fps = nlohmann::json::array();
    for (const auto& fp : plan.file_plans)
        fps.push_back({{"file", fp.file}, {"steps", fp.steps}});
    return {{"config_steps", plan.config_steps}, {"file_plans", fps}};
}

nlohmann::json to_json(const Verdict& v) {
    return {{"criterion_id", v.criterion_id},
            {"expected", v.expected},
            {"findings", v.findings},
            {"score", v.score},
            {"iteration", v.iteration}};
}

nlohmann::json to_json(const LoopTrace& trace) {
    nlohmann::json iters = nlohmann::json::array();
    for (const auto& r : trace.iterations) {
        nlohmann::json verdicts = nlohmann::json::array();
        for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
        iters.push_back({{"iteration", r.iteration},
                         {"verdicts", verdicts},
                         {"pass_count", r.pass_count},
                         {"plan", to_json(r.plan)},
                         {"changed_files", r.changed_files}});
    }
    nlohmann::json j = {{"iterations", iters},
                        {"terminal_reason", trace.terminal_reason == TerminalReason::all_pass
                                                ? "all_pass"
                                                : "max_iterations"},
                        {"error_flag", trace.error_flag}};
    if (trace.error_flag) j["error_detail"] = trace.error_detail;
    return j;
}

}  // namespace repro
