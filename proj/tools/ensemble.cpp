#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ensemble/cli/commands.hpp"

int main(int argc, char** argv) {
    using namespace ensemble::cli;

    CLI::App app{"Ensemble campaign engine: simulate or run screening campaigns and analyse their traces"};
    app.require_subcommand(1);
    app.fallthrough();
    bool quiet = false, verbose = false;
    app.add_flag("-q,--quiet", quiet, "Only print errors");
    app.add_flag("-v,--verbose", verbose, "Print per-stage details");

    RunOptions sim, local;
    auto add_run = [&](CLI::App* cmd, RunOptions& o) {
        cmd->add_option("--config", o.config_path, "Campaign configuration (JSON)")->required();
        cmd->add_option("--out", o.out_dir, "Output directory")->required();
        cmd->add_option("--seed", o.seed, "Override the configured seed");
        cmd->add_flag("--force", o.force, "Overwrite existing outputs");
        cmd->add_option("--bucket-width", o.bucket_width_s, "Utilization bucket width in seconds (default: auto)");
    };
    auto* c_sim = app.add_subcommand("simulate", "Run a campaign on the discrete-event simulator");
    add_run(c_sim, sim);
    auto* c_local = app.add_subcommand("run-local", "Run a campaign on this machine");
    add_run(c_local, local);

    AnalyzeOptions an;
    auto* c_an = app.add_subcommand("analyze", "Compute RES, recall, LOF or chamfer from CSV input");
    c_an->add_option("input", an.input, "Scores CSV (res, recall) or point-set CSV (lof, chamfer)")->required();
    c_an->add_option("--metric", an.metric, "res | recall | lof | chamfer")
        ->check(CLI::IsMember({"res", "recall", "lof", "chamfer"}));
    c_an->add_option("--other", an.other, "Second point-set CSV for chamfer");
    c_an->add_option("--k", an.k, "Top-k count (recall) or neighbourhood size (lof)");
    c_an->add_option("--delta", an.delta, "Prediction budget count (recall)");
    c_an->add_option("--out", an.out_dir, "Output directory (default: stdout)");

    ReportOptions rep;
    auto* c_rep = app.add_subcommand("report", "Utilization, throughput and overhead from a trace");
    c_rep->add_option("trace", rep.trace_path, "trace.jsonl")->required();
    c_rep->add_option("--out", rep.out_dir, "Output directory")->required();
    c_rep->add_option("--bucket-width", rep.bucket_width_s, "Utilization bucket width in seconds (default: auto)");

    CLI11_PARSE(app, argc, argv);

    Console con;
    con.verbosity = quiet ? Verbosity::quiet : verbose ? Verbosity::verbose : Verbosity::normal;
    try {
        if (*c_sim)
            return cmd_simulate(sim, con);
        if (*c_local)
            return cmd_run_local(local, con);
        if (*c_an)
            return cmd_analyze(an, con);
        return cmd_report(rep, con);
    } catch (const std::exception& e) {
        con.error(e.what());
        return kFailed;
    }
}
