#include "repro/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>

#include "repro/codegen.hpp"
#include "repro/embed.hpp"
#include "repro/error.hpp"
#include "repro/fingerprint.hpp"
#include "repro/gateway.hpp"
#include "repro/paper.hpp"
#include "repro/reflect.hpp"
#include "repro/scoring.hpp"

namespace fs = std::filesystem;

namespace repro {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : fallback;
}

nlohmann::json config_snapshot(const RunConfig& c) {
    return {{"paper_path", c.paper_path},
            {"mode", to_string(c.mode)},
            {"analysis_model", c.analysis_model},
            {"coding_model", c.coding_model},
            {"embed_model", c.embed_model},
            {"embed_dim", c.embed_dim},
            {"max_iterations", c.max_iterations},
            {"verify_parallelism", c.verify_parallelism},
            {"feedback_batch_size", c.feedback_batch_size},
            {"top_k_paragraphs", c.top_k_paragraphs},
            {"dedup_threshold", c.dedup_threshold},
            {"context_window", c.context_window},
            {"filter_cap", c.filter_cap},
            {"max_reprompts", c.max_reprompts}};
}

std::unique_ptr<Gateway> build_gateway(const RunConfig& config) {
    GatewayConfig gc;
    gc.mode = config.mode;
    gc.retry_limit = config.retry_limit;
    gc.backoff_ms = config.backoff_ms;
    gc.parallel_cap = config.parallel_cap;
    gc.price_table = config.price_table;

    std::shared_ptr<ChatBackend> backend;
    if (config.mode != GatewayMode::replay) {
        if (!config.script_path.empty()) {
            auto script = nlohmann::json::parse(read_file(config.script_path), nullptr, false);
            if (script.is_discarded())
                throw Error("script file is not valid JSON: " + config.script_path);
            backend = std::make_shared<ScriptedBackend>(script);
        } else {
            std::string base = env_or("REPRO_API_BASE", "");
            if (base.empty())
                throw Error("live/record mode needs REPRO_API_BASE (or a script_path in the config)");
            backend = std::make_shared<HttpChatBackend>(base, env_or("REPRO_API_KEY", ""));
        }
    }

    std::shared_ptr<Embedder> embedder;
    std::string embed_base = env_or("REPRO_EMBED_BASE", "");
    if (!embed_base.empty() && config.embed_model.rfind("hashed-", 0) != 0) {
        embedder = std::make_shared<HttpEmbedder>(embed_base, env_or("REPRO_EMBED_KEY", ""),
                                                  config.embed_model);
    } else {
        embedder = std::make_shared<HashedEmbedder>(config.embed_dim);
    }

    auto gw = std::make_unique<Gateway>(gc, backend, embedder);
    std::string transcript_path = config.run_dir + "/transcripts.jsonl";
    if (config.mode == GatewayMode::replay) {
        if (!file_exists(transcript_path))
            throw ReplayMiss("no transcript file at " + transcript_path);
        gw->load_transcripts(transcript_path);
    } else if (config.mode == GatewayMode::record) {
        gw->load_transcripts(transcript_path);
        gw->record_to(transcript_path);
    }
    return gw;
}

void write_costs(const std::string& run_dir, Gateway& gw) {
    write_json_artifact(run_dir + "/costs.json", gw.ledger().to_json());
}

void write_workspace_dir(const std::string& dir, const Workspace& ws) {
    std::error_code ec;
    fs::remove_all(dir, ec);
    for (const auto& [path, text] : ws.files) write_file(dir + "/" + path, text);
    write_file(dir + "/config.yaml", ws.config_doc);
}

Workspace load_workspace_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) throw Error("workspace directory missing: " + dir);
    Workspace ws;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string rel = fs::relative(entry.path(), dir).generic_string();
        std::string text = read_file(entry.path().string());
        if (rel == "config.yaml")
            ws.config_doc = text;
        else
            ws.files[rel] = text;
    }
    return ws;
}

std::string render_plan_markdown(const RevisionPlan& plan) {
    std::string out = "### CONFIG_PLAN\n";
    if (plan.config_steps.empty()) {
        out += "No changes needed.\n";
    } else {
        for (std::size_t i = 0; i < plan.config_steps.size(); ++i)
            out += std::to_string(i + 1) + ". " + plan.config_steps[i] + "\n";
    }
    out += "\n### CODE_PLAN\n";
    if (plan.file_plans.empty()) out += "No changes needed.\n";
    for (const auto& fp : plan.file_plans) {
        out += "\n#### " + fp.file + "\n";
        for (std::size_t i = 0; i < fp.steps.size(); ++i)
            out += std::to_string(i + 1) + ". " + fp.steps[i] + "\n";
    }
    return out;
}

// Runs the fingerprint stage, persisting intermediates even on failure.
Fingerprint run_fingerprint_stage(const RunConfig& config, Gateway& gw, RunManifest& manifest) {
    std::string md = read_file(config.paper_path);
    PaperDoc doc = load_paper(md, config.paper_path);
    write_json_artifact(config.run_dir + "/paper_doc.json", to_json(doc));

    FingerprintConfig fpc;
    fpc.analysis_model = config.analysis_model;
    fpc.top_k_paragraphs = config.top_k_paragraphs;
    fpc.dedup_threshold = config.dedup_threshold;
    fpc.context_window = config.context_window;
    fpc.filter_cap = config.filter_cap;
    fpc.max_reprompts = config.max_reprompts;
    FingerprintBuilder builder(gw, fpc);

    auto persist_partials = [&] {
        nlohmann::json guides = nlohmann::json::array();
        for (const auto& g : builder.guides()) guides.push_back(to_json(g));
        write_json_artifact(config.run_dir + "/guides.json", guides);
        nlohmann::json raw = nlohmann::json::array();
        for (const auto& c : builder.raw_criteria()) raw.push_back(to_json(c));
        write_json_artifact(config.run_dir + "/criteria_raw.json", raw);
        write_json_artifact(config.run_dir + "/clusters.json", to_json(builder.clusters()));
        write_costs(config.run_dir, gw);
        append_warnings(config.run_dir, builder.warnings());
    };

    Fingerprint fp;
    try {
        fp = builder.build(doc);
    } catch (...) {
        persist_partials();
        throw;
    }
    persist_partials();
    write_json_artifact(config.run_dir + "/fingerprint.json", to_json(fp));
    manifest.mark_complete(
        "fingerprint",
        {"paper_doc.json", "guides.json", "criteria_raw.json", "clusters.json", "fingerprint.json"},
        config_snapshot(config));
    return fp;
}

// Translates pipeline exceptions into the shared exit-code contract.
int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ReplayMiss& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitReplayMiss;
    } catch (const StageFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStageFailure;
    } catch (const EmptyDocument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const GatewayError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStageFailure;
    } catch (const ParseFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStageFailure;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStageFailure;
    }
}

}  // namespace

int cmd_fingerprint(const RunConfig& config) {
    return guarded([&] {
        if (!file_exists(config.paper_path))
            throw Error("paper file not found: " + config.paper_path);
        fs::create_directories(config.run_dir);
        RunLock lock(config.run_dir);
        RunManifest manifest = RunManifest::load(config.run_dir);
        if (!config.from_scratch && manifest.stage_valid("fingerprint")) {
            std::cout << "fingerprint stage already complete: " << config.run_dir
                      << "/fingerprint.json\n";
            return kExitOk;
        }
        auto gw = build_gateway(config);
        Fingerprint fp = run_fingerprint_stage(config, *gw, manifest);
        std::cout << "fingerprint: " << fp.stage_counts.guides << " guides -> "
                  << fp.stage_counts.standardized << " standardized -> "
                  << fp.stage_counts.after_dedup << " after dedup -> "
                  << fp.stage_counts.final_count << " final criteria\n";
        return kExitOk;
    });
}

namespace {

// Streams per-iteration artifacts to the run directory as the loop advances.
struct RunDirSink : LoopSink {
    std::string run_dir;
    explicit RunDirSink(std::string dir) : run_dir(std::move(dir)) {}

    void on_iteration(const IterationRecord& record, const Workspace& workspace) override {
        std::string iter_dir = run_dir + "/iter_" + std::to_string(record.iteration);
        nlohmann::json verdicts = nlohmann::json::array();
        for (const auto& v : record.verdicts) verdicts.push_back(to_json(v));
        write_json_artifact(iter_dir + "/verdicts.json", verdicts);
        write_file(iter_dir + "/plan.md", render_plan_markdown(record.plan));
        write_workspace_dir(run_dir + "/workspace_iter" + std::to_string(record.iteration),
                            workspace);
    }
};

}  // namespace

int cmd_reproduce(const RunConfig& config) {
    return guarded([&] {
        fs::create_directories(config.run_dir);
        RunLock lock(config.run_dir);
        RunManifest manifest = RunManifest::load(config.run_dir);
        if (!config.from_scratch && manifest.stage_valid("codegen") &&
            manifest.stage_valid("reflect")) {
            std::cout << "reproduce already complete: " << config.run_dir << "\n";
            return kExitOk;
        }
        auto gw = build_gateway(config);

        // Stage: fingerprint (reused when its artifacts exist and hash-match).
        Fingerprint fp;
        if (!config.from_scratch && manifest.stage_valid("fingerprint")) {
            auto j = read_json_artifact(config.run_dir + "/fingerprint.json");
            if (!j) throw Error("fingerprint.json unreadable in " + config.run_dir);
            fp = fingerprint_from_json(*j);
        } else if (config.from_scratch) {
            if (!file_exists(config.paper_path))
                throw Error("paper file not found: " + config.paper_path);
            fp = run_fingerprint_stage(config, *gw, manifest);
        } else {
            throw Error("no completed fingerprint stage in " + config.run_dir +
                        "; run the fingerprint command first or pass --from-scratch");
        }
        auto guides_json = read_json_artifact(config.run_dir + "/guides.json");
        if (!guides_json) throw Error("guides.json missing in " + config.run_dir);
        std::vector<GuideUnit> guides;
        for (const auto& g : *guides_json) guides.push_back(guide_unit_from_json(g));

        // Stage: codegen (skeleton + fills -> workspace_iter0).
        Workspace ws;
        std::string iter0_dir = config.run_dir + "/workspace_iter0";
        if (!config.from_scratch && manifest.stage_valid("codegen") && fs::is_directory(iter0_dir)) {
            ws = load_workspace_dir(iter0_dir);
        } else {
            CodegenConfig cc;
            cc.coding_model = config.coding_model;
            cc.max_reprompts = config.max_reprompts;
            CodeGenerator generator(*gw, cc);
            std::vector<FillOutcome> fill_log;
            try {
                ws = generator.initial_implementation(guides, &fill_log);
            } catch (...) {
                write_costs(config.run_dir, *gw);
                append_warnings(config.run_dir, generator.warnings());
                throw;
            }
            write_workspace_dir(iter0_dir, ws);
            nlohmann::json log = nlohmann::json::array();
            for (const auto& o : fill_log)
                log.push_back({{"file", o.target.file},
                               {"symbol", o.target.symbol},
                               {"kind", o.target.kind},
                               {"filled", o.filled},
                               {"reprompts", o.reprompts},
                               {"note", o.note}});
            write_json_artifact(config.run_dir + "/fill_log.json", log);
            append_warnings(config.run_dir, generator.warnings());
            manifest.mark_complete("codegen", {"fill_log.json"}, config_snapshot(config));
        }

        // Stage: reflective loop.
        std::string paper_text;
        if (file_exists(config.paper_path)) {
            paper_text = read_file(config.paper_path);
        } else if (auto pd = read_json_artifact(config.run_dir + "/paper_doc.json")) {
            for (const auto& p : pd->value("paragraphs", nlohmann::json::array()))
                paper_text += p.value("raw", "") + "\n\n";
        }
        LoopConfig lc;
        lc.max_iterations = config.max_iterations;
        lc.verify_parallelism = config.verify_parallelism;
        lc.feedback_batch_size = config.feedback_batch_size;
        lc.analysis_model = config.analysis_model;
        lc.coding_model = config.coding_model;
        lc.max_reprompts = config.max_reprompts;
        lc.paper_context_budget = config.paper_context_budget;
        Reflector reflector(*gw, lc, paper_text);
        RunDirSink sink(config.run_dir);
        auto [final_ws, trace] = reflector.reflect_loop(ws, fp, &sink);

        write_json_artifact(config.run_dir + "/loop_trace.json", to_json(trace));
        write_costs(config.run_dir, *gw);
        append_warnings(config.run_dir, reflector.warnings());
        if (trace.error_flag)
            throw StageFailure("reflect", trace.error_detail);
        manifest.mark_complete("reflect", {"loop_trace.json"}, config_snapshot(config));

        int last_pass = trace.iterations.empty() ? 0 : trace.iterations.back().pass_count;
        std::cout << "reproduce: " << trace.iterations.size() << " iteration(s), terminal "
                  << (trace.terminal_reason == TerminalReason::all_pass ? "all_pass"
                                                                        : "max_iterations")
                  << ", " << last_pass << "/" << fp.criteria.size() << " criteria passing\n";
        return kExitOk;
    });
}

namespace {

void grade_ungraded_leaves(RubricNode& node, Reflector& reflector, const Workspace& ws) {
    if (node.is_leaf()) {
        if (!node.leaf_score) {
            Criterion c;
            c.id = node.id;
            c.fact = *node.leaf_requirement;
            c.rendered = *node.leaf_requirement;
            node.leaf_score = reflector.verify_criterion(ws, c).score;
        }
        return;
    }
    for (auto& child : node.children) grade_ungraded_leaves(child, reflector, ws);
}

bool has_ungraded_leaf(const RubricNode& node) {
    if (node.is_leaf()) return !node.leaf_score.has_value();
    return std::any_of(node.children.begin(), node.children.end(), has_ungraded_leaf);
}

// Highest iteration index with a persisted workspace, or -1 when none exists.
int latest_workspace_iteration(const std::string& run_dir) {
    int best = -1;
    for (int i = 0; i <= 64; ++i)
        if (fs::is_directory(run_dir + "/workspace_iter" + std::to_string(i))) best = i;
    return best;
}

}  // namespace

int cmd_score(const RunConfig& config, const std::string& rubric_path) {
    return guarded([&] {
        if (!file_exists(rubric_path)) throw Error("rubric file not found: " + rubric_path);
        auto rubric_json = read_json_artifact(rubric_path);
        if (!rubric_json) throw Error("rubric is not valid JSON: " + rubric_path);
        RubricNode root;
        try {
            root = rubric_from_json(*rubric_json);
        } catch (const ParseFailure& e) {
            throw Error(std::string("malformed rubric: ") + e.what());
        }

        fs::create_directories(config.run_dir);
        RunLock lock(config.run_dir);
        RunManifest manifest = RunManifest::load(config.run_dir);

        std::unique_ptr<Gateway> gw;
        std::vector<std::string> warnings;
        if (has_ungraded_leaf(root)) {
            int iter = latest_workspace_iteration(config.run_dir);
            if (iter < 0)
                throw Error("rubric has ungraded leaves and no workspace exists in " +
                            config.run_dir + "; grade the leaves or run reproduce first");
            Workspace ws =
                load_workspace_dir(config.run_dir + "/workspace_iter" + std::to_string(iter));
            gw = build_gateway(config);
            LoopConfig lc;
            lc.analysis_model = config.analysis_model;
            lc.max_reprompts = config.max_reprompts;
            Reflector reflector(*gw, lc);
            grade_ungraded_leaves(root, reflector, ws);
            warnings = reflector.warnings();
        }

        double pr_root = score_rubric(root);
        auto leaves = collect_leaves(root);
        std::vector<int> leaf_scores;
        nlohmann::json leaf_json = nlohmann::json::array();
        for (const auto* leaf : leaves) {
            leaf_scores.push_back(leaf->leaf_score.value_or(0));
            leaf_json.push_back({{"id", leaf->id},
                                 {"requirement", *leaf->leaf_requirement},
                                 {"score", leaf->leaf_score.value_or(0)}});
        }
        double prl = pr_leaf(leaf_scores);

        nlohmann::json report = {{"pr_root", pr_root}, {"pr_leaf", prl}, {"leaves", leaf_json}};
        nlohmann::json pass_curve = nlohmann::json::array();
        int best_iteration = 0, best_pass = -1;
        if (auto trace = read_json_artifact(config.run_dir + "/loop_trace.json")) {
            for (const auto& it : trace->value("iterations", nlohmann::json::array())) {
                int pc = it.value("pass_count", 0);
                pass_curve.push_back({{"iteration", it.value("iteration", 0)}, {"pass_count", pc}});
                if (pc > best_pass) {
                    best_pass = pc;
                    best_iteration = it.value("iteration", 0);
                }
            }
            report["best_iteration"] = best_iteration;
        }
        report["pass_curve"] = pass_curve;

        if (auto fpj = read_json_artifact(config.run_dir + "/fingerprint.json")) {
            Fingerprint fp = fingerprint_from_json(*fpj);
            std::vector<std::string> rubric_leaves;
            for (const auto* leaf : leaves) rubric_leaves.push_back(*leaf->leaf_requirement);
            if (!fp.criteria.empty() && !rubric_leaves.empty()) {
                if (!gw) gw = build_gateway(config);
                MatcherConfig mc;
                mc.analysis_model = config.analysis_model;
                mc.max_reprompts = config.max_reprompts;
                MatchReport match =
                    match_fingerprint_to_rubric(*gw, fp, rubric_leaves, mc, &warnings);
                report["match"] = to_json(match);
            }
        }

        write_json_artifact(config.run_dir + "/score_report.json", report);
        if (gw) write_costs(config.run_dir, *gw);
        append_warnings(config.run_dir, warnings);
        manifest.mark_complete("score", {"score_report.json"}, config_snapshot(config));

        std::printf("PR_root: %.4f (%.2f%%)\n", pr_root, pr_root * 100.0);
        std::printf("PR_leaf: %.4f (%.2f%%)\n", prl, prl * 100.0);
        std::string curve = "pass curve:";
        for (const auto& p : pass_curve)
            curve += " " + std::to_string(p.value("pass_count", 0));
        std::cout << (pass_curve.empty() ? std::string("pass curve: (no loop trace)") : curve)
                  << "\n";
        return kExitOk;
    });
}

int cmd_report(const std::string& run_dir) {
    return guarded([&] {
        if (!file_exists(run_dir + "/run_manifest.json"))
            throw Error("no run manifest in " + run_dir);

        std::string md = "# Run report\n\n";

        md += "## Criteria pipeline\n\n";
        if (auto fpj = read_json_artifact(run_dir + "/fingerprint.json")) {
            const auto sc = fpj->value("stage_counts", nlohmann::json::object());
            md += "- guides extracted: " + std::to_string(sc.value("guides", 0)) + "\n";
            md += "- standardized criteria: " + std::to_string(sc.value("standardized", 0)) + "\n";
            md += "- after dedup: " + std::to_string(sc.value("after_dedup", 0)) + "\n";
            md += "- final criteria: " + std::to_string(sc.value("final", 0)) + "\n";
        } else {
            md += "- fingerprint stage not completed\n";
        }

        md += "\n## Cost\n\n";
        if (auto costs = read_json_artifact(run_dir + "/costs.json")) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6f", costs->value("total_cost", 0.0));
            md += "- total cost: $" + std::string(buf) + "\n";
            md += "- calls: " +
                  std::to_string(costs->value("calls", nlohmann::json::array()).size()) + "\n";
            const nlohmann::json per_purpose =
                costs->value("per_purpose", nlohmann::json::object());
            for (const auto& [purpose, agg] : per_purpose.items()) {
                md += "- " + purpose + ": " + std::to_string(agg.value("prompt_tokens", 0)) +
                      " prompt tokens, " + std::to_string(agg.value("completion_tokens", 0)) +
                      " completion tokens\n";
            }
        } else {
            md += "- no cost ledger\n";
        }

        md += "\n## Iteration curve\n\n";
        if (auto trace = read_json_artifact(run_dir + "/loop_trace.json")) {
            int best_iter = 0, best_pass = -1;
            for (const auto& it : trace->value("iterations", nlohmann::json::array())) {
                int n = it.value("iteration", 0);
                int pc = it.value("pass_count", 0);
                int total = static_cast<int>(it.value("verdicts", nlohmann::json::array()).size());
                md += "- iteration " + std::to_string(n) + ": " + std::to_string(pc) + "/" +
                      std::to_string(total) + " criteria passing\n";
                if (pc > best_pass) {
                    best_pass = pc;
                    best_iter = n;
                }
            }
            md += "- terminal reason: " + trace->value("terminal_reason", std::string("unknown")) +
                  "\n";
            if (best_pass >= 0) md += "- best iteration: " + std::to_string(best_iter) + "\n";
            if (trace->value("error_flag", false))
                md += "- loop error: " + trace->value("error_detail", std::string()) + "\n";
        } else {
            md += "- reflective loop not run\n";
        }

        if (auto score = read_json_artifact(run_dir + "/score_report.json")) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "- PR_root: %.4f\n- PR_leaf: %.4f\n",
                          score->value("pr_root", 0.0), score->value("pr_leaf", 0.0));
            md += "\n## Score\n\n" + std::string(buf);
        }

        md += "\n## Warnings\n\n";
        auto warnings = read_json_artifact(run_dir + "/warnings.json");
        if (warnings && !warnings->empty()) {
            for (const auto& w : *warnings) md += "- " + w.get<std::string>() + "\n";
        } else {
            md += "- none\n";
        }

        write_file(run_dir + "/report.md", md);
        std::cout << md;
        return kExitOk;
    });
}

}  // namespace repro
