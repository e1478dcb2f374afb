#include <filesystem>

#include "doctest.h"
#include "repro/error.hpp"
#include "repro/reflect.hpp"
#include "test_util.hpp"

using namespace repro;

namespace {

const char* kPassVerify =
    "Expected Implementation\nThe code applies the stated setting.\n\n"
    "Actual Findings\nThe submission applies it correctly.\n\n"
    "Verification Result\nscore: 1\n";

const char* kFailVerify =
    "Expected Implementation\nThe code applies the stated setting.\n\n"
    "Actual Findings\nThe submission hard-codes a different value.\n\n"
    "Verification Result\nscore: 0\n";

const char* kPlanText =
    "### CONFIG_PLAN\n1. Set learning_rate to 0.005 in config.yaml.\n\n"
    "### CODE_PLAN\n## Code: main.py\n1. Read the learning rate from config.\n";

Criterion make_criterion(const std::string& id, const std::string& text) {
    Criterion c;
    c.id = id;
    c.fact = text;
    c.rendered = "The <fact>" + text + "</fact> is required.";
    return c;
}

Fingerprint make_fingerprint(int n) {
    Fingerprint fp;
    for (int i = 0; i < n; ++i)
        fp.criteria.push_back(make_criterion("c" + std::to_string(i),
                                             "setting number " + std::to_string(i)));
    fp.stage_counts = {n, n, n, n};
    return fp;
}

Workspace make_workspace() {
    Workspace ws;
    ws.files["main.py"] = "def main():\n    run(0.01)\n";
    ws.files["util.py"] = "def run(lr):\n    return lr\n";
    ws.config_doc = "learning_rate: 0.01\n";
    return ws;
}

std::string refine_response(const std::string& main_body, bool include_util = true,
                            const std::string& extra_name = "",
                            const std::string& config_body = "") {
    std::string out = "## Code: main.py\n```python\n" + main_body + "```\n";
    if (include_util)
        out += "## Code: util.py\n```python\ndef run(lr):\n    return lr\n```\n";
    if (!extra_name.empty())
        out += "## Code: " + extra_name + "\n```python\nVALUE = 1\n```\n";
    if (!config_body.empty())
        out += "## Code: config.yaml\n```yaml\n" + config_body + "```\n";
    return out;
}

struct CountingSink : LoopSink {
    int calls = 0;
    void on_iteration(const IterationRecord&, const Workspace&) override { ++calls; }
};

// Captures the last request so prompt construction can be inspected.
struct CaptureBackend : ChatBackend {
    ChatRequest last;
    ChatResponse complete(const ChatRequest& request) override {
        last = request;
        return {kPassVerify, 10, 10, 0};
    }
};

}  // namespace

TEST_SUITE("reflect") {

TEST_CASE("verification parses the three-section response") {
    nlohmann::json script = {{"responses", {{"verify", {kPassVerify, kFailVerify}}}}};
    auto g = testutil::make_scripted(script);
    Reflector r(*g.gateway, LoopConfig{});
    Workspace ws = make_workspace();

    Verdict pass = r.verify_criterion(ws, make_criterion("c0", "x"), 3);
    CHECK(pass.score == 1);
    CHECK(pass.criterion_id == "c0");
    CHECK(pass.iteration == 3);
    CHECK(pass.findings.find("correctly") != std::string::npos);

    Verdict fail = r.verify_criterion(ws, make_criterion("c1", "y"));
    CHECK(fail.score == 0);
    CHECK(fail.findings.find("hard-codes") != std::string::npos);
}

TEST_CASE("unparseable verification fails closed") {
    nlohmann::json script = {{"defaults", {{"verify", "looks good to me, 10/10"}}}};
    auto g = testutil::make_scripted(script);
    LoopConfig cfg;
    cfg.max_reprompts = 1;
    Reflector r(*g.gateway, cfg);

    Verdict v = r.verify_criterion(make_workspace(), make_criterion("c0", "x"));
    CHECK(v.score == 0);
    CHECK(v.findings == "verification unparseable");
    // One original attempt plus one re-prompt.
    CHECK(g.gateway->ledger().entries().size() == 2);
}

TEST_CASE("gateway failure during verification fails closed with a warning") {
    nlohmann::json script = {
        {"responses",
         {{"verify", {nlohmann::json{{"text", kPassVerify}, {"transient_failures", 10}}}}}}};
    auto g = testutil::make_scripted(script);
    Reflector r(*g.gateway, LoopConfig{});

    Verdict v = r.verify_criterion(make_workspace(), make_criterion("c0", "x"));
    CHECK(v.score == 0);
    REQUIRE_FALSE(r.warnings().empty());
    CHECK(r.warnings().back().find("gateway failure") != std::string::npos);
}

TEST_CASE("parallel verification replays to the same ordered verdicts") {
    std::string dir = testutil::temp_dir("reflect_par");
    std::string transcripts = dir + "/transcripts.jsonl";
    Fingerprint fp = make_fingerprint(5);
    Workspace ws = make_workspace();

    nlohmann::json script = {
        {"responses", {{"verify", {kPassVerify, kFailVerify, kPassVerify, kFailVerify,
                                   kPassVerify}}}}};
    auto rec = testutil::make_scripted(script, GatewayMode::record);
    rec.gateway->record_to(transcripts);
    LoopConfig seq_cfg;
    seq_cfg.verify_parallelism = 1;
    Reflector recorder(*rec.gateway, seq_cfg);
    auto recorded = recorder.verify_all(ws, fp, 1);
    REQUIRE(recorded.size() == 5);
    CHECK(recorded[1].score == 0);
    CHECK(recorded[3].score == 0);

    GatewayConfig gc;
    gc.mode = GatewayMode::replay;
    Gateway replay_gw(gc, nullptr, std::make_shared<HashedEmbedder>(64));
    replay_gw.load_transcripts(transcripts);
    LoopConfig par_cfg;
    par_cfg.verify_parallelism = 4;
    Reflector replayer(replay_gw, par_cfg);
    auto replayed = replayer.verify_all(ws, fp, 1);
    REQUIRE(replayed.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(replayed[i].criterion_id == recorded[i].criterion_id);
        CHECK(replayed[i].score == recorded[i].score);
        CHECK(replayed[i].findings == recorded[i].findings);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("planner batches failing verdicts and merges per-file steps") {
    std::string second_plan =
        "### CONFIG_PLAN\nNo changes needed for config.yaml\n\n"
        "### CODE_PLAN\n## Code: main.py\n1. Validate the input shape.\n"
        "## Code: util.py\n1. Add the clip helper.\n";
    nlohmann::json script = {{"responses", {{"plan", {kPlanText, second_plan}}}}};
    auto g = testutil::make_scripted(script);
    LoopConfig cfg;
    cfg.feedback_batch_size = 40;
    Reflector r(*g.gateway, cfg);

    std::vector<Verdict> verdicts;
    for (int i = 0; i < 45; ++i) {
        Verdict v;
        v.criterion_id = "c" + std::to_string(i);
        v.expected = "e";
        v.findings = "f";
        v.score = 0;
        verdicts.push_back(v);
    }
    RevisionPlan merged = r.plan_revision(verdicts, make_workspace());
    // Two batches; the scripted list holds exactly two plans, so a third call
    // would have failed.
    REQUIRE(merged.config_steps.size() == 1);
    REQUIRE(merged.file_plans.size() == 2);
    CHECK(merged.file_plans[0].file == "main.py");
    CHECK(merged.file_plans[0].steps.size() == 2);  // steps merged across batches
    CHECK(merged.file_plans[1].file == "util.py");
}

TEST_CASE("an all-pass verdict set yields an empty plan without model calls") {
    auto g = testutil::make_scripted(nlohmann::json::object());
    Reflector r(*g.gateway, LoopConfig{});
    Verdict v;
    v.score = 1;
    RevisionPlan plan = r.plan_revision({v, v}, make_workspace());
    CHECK(plan.empty());
    CHECK(g.gateway->ledger().entries().empty());
}

TEST_CASE("a planner that never yields headings fails the stage") {
    nlohmann::json script = {{"defaults", {{"plan", "I would just rewrite everything."}}}};
    auto g = testutil::make_scripted(script);
    LoopConfig cfg;
    cfg.max_reprompts = 1;
    Reflector r(*g.gateway, cfg);
    Verdict v;
    v.score = 0;
    CHECK_THROWS_AS(r.plan_revision({v}, make_workspace()), StageFailure);
}

TEST_CASE("revision applies returned files and config updates") {
    nlohmann::json script = {
        {"defaults",
         {{"refine", refine_response("def main():\n    run(0.005)\n", true, "",
                                     "learning_rate: 0.005\n")}}}};
    auto g = testutil::make_scripted(script);
    Reflector r(*g.gateway, LoopConfig{});
    RevisionPlan plan;
    plan.config_steps = {"Set learning_rate to 0.005."};
    plan.file_plans = {{"main.py", {"Use config value."}}};

    Workspace before = make_workspace();
    Workspace after = r.apply_revision(before, plan);
    CHECK(after.files["main.py"].find("0.005") != std::string::npos);
    CHECK(after.files["util.py"] == before.files["util.py"]);
    CHECK(after.config_doc == "learning_rate: 0.005\n");
    CHECK(r.warnings().empty());
}

TEST_CASE("omitted files are carried forward with a warning") {
    nlohmann::json script = {
        {"defaults", {{"refine", refine_response("def main():\n    run(0.005)\n", false)}}}};
    auto g = testutil::make_scripted(script);
    Reflector r(*g.gateway, LoopConfig{});
    RevisionPlan plan;
    plan.file_plans = {{"main.py", {"Change rate."}}};

    Workspace before = make_workspace();
    Workspace after = r.apply_revision(before, plan);
    CHECK(after.files["main.py"].find("0.005") != std::string::npos);
    CHECK(after.files["util.py"] == before.files["util.py"]);
    bool warned = false;
    for (const auto& w : r.warnings())
        if (w.find("omitted util.py") != std::string::npos) warned = true;
    CHECK(warned);
}

TEST_CASE("planned new files are accepted and unplanned ones are ignored") {
    nlohmann::json script = {
        {"defaults", {{"refine", refine_response("def main():\n    run(0.01)\n", true,
                                                 "constants.py")}}}};
    // The editor also sneaks in an unplanned file.
    std::string resp = script["defaults"]["refine"];
    resp += "## Code: rogue.py\n```python\nx = 1\n```\n";
    script["defaults"]["refine"] = resp;
    auto g = testutil::make_scripted(script);
    Reflector r(*g.gateway, LoopConfig{});
    RevisionPlan plan;
    plan.file_plans = {{"constants.py", {"Create the constants module."}}};

    Workspace after = r.apply_revision(make_workspace(), plan);
    CHECK(after.files.count("constants.py") == 1);
    CHECK(after.files.count("rogue.py") == 0);
    bool warned = false;
    for (const auto& w : r.warnings())
        if (w.find("rogue.py") != std::string::npos) warned = true;
    CHECK(warned);
}

TEST_CASE("loop stops at the first all-pass round") {
    nlohmann::json script = {{"defaults", {{"verify", kPassVerify}}}};
    auto g = testutil::make_scripted(script);
    Reflector r(*g.gateway, LoopConfig{});
    CountingSink sink;
    auto [ws, trace] = r.reflect_loop(make_workspace(), make_fingerprint(3), &sink);
    REQUIRE(trace.iterations.size() == 1);
    CHECK(trace.terminal_reason == TerminalReason::all_pass);
    CHECK(trace.iterations[0].pass_count == 3);
    CHECK(trace.iterations[0].verdicts.size() == 3);
    CHECK_FALSE(trace.error_flag);
    CHECK(sink.calls == 1);
}

TEST_CASE("loop revises after a failing round and then converges") {
    nlohmann::json script = {
        {"responses", {{"verify", {kFailVerify}}, {"plan", {kPlanText}}}},
        {"defaults",
         {{"verify", kPassVerify},
          {"refine", refine_response("def main():\n    run(0.005)\n", true, "",
                                     "learning_rate: 0.005\n")}}}};
    auto g = testutil::make_scripted(script);
    Reflector r(*g.gateway, LoopConfig{});
    auto [ws, trace] = r.reflect_loop(make_workspace(), make_fingerprint(1));
    REQUIRE(trace.iterations.size() == 2);
    CHECK(trace.terminal_reason == TerminalReason::all_pass);
    CHECK(trace.iterations[0].pass_count == 0);
    CHECK(trace.iterations[1].pass_count == 1);
    CHECK_FALSE(trace.iterations[0].plan.empty());
    bool changed_main = false, changed_config = false;
    for (const auto& f : trace.iterations[0].changed_files) {
        if (f == "main.py") changed_main = true;
        if (f == "config.yaml") changed_config = true;
    }
    CHECK(changed_main);
    CHECK(changed_config);
    CHECK(ws.files["main.py"].find("0.005") != std::string::npos);
}

TEST_CASE("loop exhausts the iteration budget when nothing ever passes") {
    nlohmann::json script = {
        {"defaults",
         {{"verify", kFailVerify},
          {"plan", kPlanText},
          {"refine", refine_response("def main():\n    run(0.01)\n")}}}};
    auto g = testutil::make_scripted(script);
    LoopConfig cfg;
    cfg.max_iterations = 2;
    Reflector r(*g.gateway, cfg);
    CountingSink sink;
    auto [ws, trace] = r.reflect_loop(make_workspace(), make_fingerprint(2), &sink);
    REQUIRE(trace.iterations.size() == 2);
    CHECK(trace.terminal_reason == TerminalReason::max_iterations);
    CHECK_FALSE(trace.error_flag);
    CHECK(sink.calls == 2);
    for (const auto& rec : trace.iterations) CHECK(rec.verdicts.size() == 2);
}

TEST_CASE("a stage failure inside the loop sets the error flag") {
    nlohmann::json script = {{"defaults",
                              {{"verify", kFailVerify}, {"plan", "no headings here"}}}};
    auto g = testutil::make_scripted(script);
    LoopConfig cfg;
    cfg.max_reprompts = 0;
    Reflector r(*g.gateway, cfg);
    auto [ws, trace] = r.reflect_loop(make_workspace(), make_fingerprint(1));
    CHECK(trace.error_flag);
    CHECK_FALSE(trace.error_detail.empty());
    REQUIRE(trace.iterations.size() == 1);
}

TEST_CASE("oversized paper text is truncated around the methods section") {
    std::string paper = "Title\n" + std::string(30000, 'a') + "\n# Method\n" +
                        std::string(30000, 'b') + "\nTail";
    auto backend = std::make_shared<CaptureBackend>();
    GatewayConfig gc;
    gc.backoff_ms = 0;
    Gateway gw(gc, backend, std::make_shared<HashedEmbedder>(64));
    LoopConfig cfg;
    cfg.paper_context_budget = 8000;
    Reflector r(gw, cfg, paper);
    r.verify_criterion(make_workspace(), make_criterion("c0", "x"));
    const std::string& prompt = backend->last.messages.back().text;
    CHECK(prompt.find("Method") != std::string::npos);
    CHECK(prompt.size() < paper.size());

    // A paper within budget passes through untouched.
    Reflector small(gw, LoopConfig{}, "short paper text");
    small.verify_criterion(make_workspace(), make_criterion("c1", "y"));
    CHECK(backend->last.messages.back().text.find("short paper text") != std::string::npos);
}

TEST_CASE("loop traces serialize with verdicts and terminal state") {
    LoopTrace trace;
    IterationRecord rec;
    rec.iteration = 1;
    Verdict v;
    v.criterion_id = "c0";
    v.score = 1;
    rec.verdicts = {v};
    rec.pass_count = 1;
    trace.iterations = {rec};
    trace.terminal_reason = TerminalReason::all_pass;
    nlohmann::json j = to_json(trace);
    CHECK(j["terminal_reason"] == "all_pass");
    CHECK(j["error_flag"] == false);
    CHECK(j["iterations"][0]["verdicts"][0]["criterion_id"] == "c0");
    CHECK_FALSE(j.contains("error_detail"));
}

}  // TEST_SUITE
