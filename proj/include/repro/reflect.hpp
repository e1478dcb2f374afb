#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "repro/codegen.hpp"
#include "repro/fingerprint.hpp"
#include "repro/gateway.hpp"

namespace repro {

struct Verdict {
    std::string criterion_id;
    std::string expected;
    std::string findings;
    int score = 0;  // 0 or 1
    int iteration = 0;
};

struct FilePlan {
    std::string file;
    std::vector<std::string> steps;
};

struct RevisionPlan {
    std::vector<std::string> config_steps;
    std::vector<FilePlan> file_plans;
    bool empty() const { return config_steps.empty() && file_plans.empty(); }
};

enum class TerminalReason { all_pass, max_iterations };

struct IterationRecord {
    int iteration = 0;
    std::vector<Verdict> verdicts;
    int pass_count = 0;
    RevisionPlan plan;
    std::vector<std::string> changed_files;
};

struct LoopTrace {
    std::vector<IterationRecord> iterations;
    TerminalReason terminal_reason = TerminalReason::max_iterations;
    bool error_flag = false;
    std::string error_detail;
};

struct LoopConfig {
    int max_iterations = 4;
    int verify_parallelism = 1;
    int feedback_batch_size = 40;
    std::string analysis_model = "analysis";
    std::string coding_model = "coding";
    int max_reprompts = 2;
    int paper_context_budget = 20000;  // characters of paper text in the editor prompt
};

// Per-iteration artifact sink; nulls are fine.
struct LoopSink {
    virtual ~LoopSink() = default;
    virtual void on_iteration(const IterationRecord& record, const Workspace& workspace) = 0;
};

class Reflector {
public:
    Reflector(Gateway& gateway, LoopConfig config, std::string paper_text = "");

    // Three-section verification with a strict 0/1 score; fail-closed when the
    // response stays unparseable after re-prompts.
    Verdict verify_criterion(const Workspace& workspace, const Criterion& criterion,
                             int iteration = 0);
    Verdict verify_criterion_seq(const Workspace& workspace, const Criterion& criterion,
                                 int iteration, int seq);

    // One verdict per criterion, output in fingerprint order regardless of
    // completion order.
    std::vector<Verdict> verify_all(const Workspace& workspace, const Fingerprint& fingerprint,
                                    int iteration = 0);

    // Failing verdicts batched into planner calls; plans merged in batch order.
    RevisionPlan plan_revision(const std::vector<Verdict>& verdicts, const Workspace& workspace);

    // Editor pass: full workspace + plan in, revised files out. Omitted
    // original files are carried forward with a warning.
    Workspace apply_revision(const Workspace& workspace, const RevisionPlan& plan);

    std::pair<Workspace, LoopTrace> reflect_loop(Workspace workspace,
                                                 const Fingerprint& fingerprint,
                                                 LoopSink* sink = nullptr);

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    std::string render_workspace(const Workspace& workspace) const;
    std::string paper_context() const;

    Gateway& gateway_;
    LoopConfig config_;
    std::string paper_text_;
    std::vector<std::string> warnings_;
};

RevisionPlan revision_plan_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RevisionPlan& plan);
nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const LoopTrace& trace);

}  // namespace repro
