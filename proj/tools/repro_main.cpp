#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "repro/commands.hpp"
#include "repro/error.hpp"
#include "repro/rundir.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string run_dir;
    std::string mode;
    bool resume = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--run-dir", opts.run_dir, "run directory for artifacts");
    cmd->add_option("--mode", opts.mode, "gateway mode: live, record, or replay")
        ->check(CLI::IsMember({"live", "record", "replay"}));
    cmd->add_flag("--resume", opts.resume, "skip stages already completed in the run directory");
}

// Config file first, then command-line overrides.
repro::RunConfig resolve_config(const CommonOpts& opts) {
    repro::RunConfig config;
    if (!opts.config_path.empty()) config = repro::load_run_config(opts.config_path);
    if (!opts.run_dir.empty()) config.run_dir = opts.run_dir;
    if (!opts.mode.empty()) config.mode = repro::gateway_mode_from_string(opts.mode);
    config.resume = opts.resume;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reflective paper-to-code reproduction pipeline"};
    app.require_subcommand(1);

    CommonOpts fp_opts, rep_opts, score_opts, report_opts;
    std::string paper_path, rubric_path;
    bool from_scratch = false;

    CLI::App* fp = app.add_subcommand("fingerprint", "extract verification criteria from a paper");
    add_common(fp, fp_opts);
    fp->add_option("--paper", paper_path, "paper Markdown file (overrides config)");

    CLI::App* rep = app.add_subcommand("reproduce", "generate and iteratively refine code");
    add_common(rep, rep_opts);
    rep->add_flag("--from-scratch", from_scratch, "rerun all stages, including fingerprint");

    CLI::App* score = app.add_subcommand("score", "score a run against an evaluation rubric");
    add_common(score, score_opts);
    score->add_option("--rubric", rubric_path, "rubric JSON file")->required();

    CLI::App* report = app.add_subcommand("report", "render a Markdown summary of a run");
    add_common(report, report_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : repro::kExitUserError;
    }

    try {
        if (fp->parsed()) {
            repro::RunConfig config = resolve_config(fp_opts);
            if (!paper_path.empty()) config.paper_path = paper_path;
            if (config.paper_path.empty()) {
                std::cerr << "error: no paper path (use --paper or paper_path in the config)\n";
                return repro::kExitUserError;
            }
            return repro::cmd_fingerprint(config);
        }
        if (rep->parsed()) {
            repro::RunConfig config = resolve_config(rep_opts);
            config.from_scratch = from_scratch;
            return repro::cmd_reproduce(config);
        }
        if (score->parsed()) {
            return repro::cmd_score(resolve_config(score_opts), rubric_path);
        }
        if (report->parsed()) {
            std::string dir = report_opts.run_dir;
            if (dir.empty() && !report_opts.config_path.empty())
                dir = repro::load_run_config(report_opts.config_path).run_dir;
            if (dir.empty()) {
                std::cerr << "error: report needs --run-dir or a config with run_dir\n";
                return repro::kExitUserError;
            }
            return repro::cmd_report(dir);
        }
    } catch (const repro::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return repro::kExitUserError;
    }
    return repro::kExitUserError;
}
