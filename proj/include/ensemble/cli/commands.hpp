#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ensemble/analysis/chamfer.hpp"
#include "ensemble/analysis/enrichment.hpp"
#include "ensemble/analysis/lof.hpp"
#include "ensemble/campaign/validate.hpp"
#include "ensemble/engine/local.hpp"
#include "ensemble/engine/sim.hpp"
#include "ensemble/io/config.hpp"
#include "ensemble/io/csv.hpp"
#include "ensemble/io/report.hpp"
#include "ensemble/trace/jsonl.hpp"
#include "ensemble/workload/library.hpp"

namespace ensemble::cli {

enum class Verbosity { quiet, normal, verbose };

/// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;
inline constexpr int kBadConfig = 2;

struct Console {
    std::ostream& out = std::cout;
    std::ostream& err = std::cerr;
    Verbosity verbosity = Verbosity::normal;

    void info(const std::string& s) const {
        if (verbosity != Verbosity::quiet)
            out << s << '\n';
    }
    void detail(const std::string& s) const {
        if (verbosity == Verbosity::verbose)
            out << s << '\n';
    }
    void warn(const std::string& s) const { err << "warning: " << s << '\n'; }
    void error(const std::string& s) const { err << "error: " << s << '\n'; }
};

struct RunOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    bool force = false;
    double bucket_width_s = 0.0;
};

struct AnalyzeOptions {
    std::string metric = "res";
    std::string input;
    /// Second point set, for chamfer.
    std::string other;
    std::string out_dir;
    /// Top-k count for recall, neighbourhood size for lof.
    std::optional<std::size_t> k;
    std::optional<std::size_t> delta;
};

struct ReportOptions {
    std::string trace_path;
    std::string out_dir;
    double bucket_width_s = 0.0;
};

namespace detail {

/// Creates `dir` and refuses to clobber any of `files` unless forced.
/// Analysis and report outputs are pure functions of their inputs and are
/// rewritten in place; run outputs include the trace and are protected.
inline bool prepare_out_dir(const std::string& dir, const std::vector<std::string>& files, bool force,
                            const Console& con) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        con.error("cannot create output directory '" + dir + "': " + ec.message());
        return false;
    }
    if (force)
        return true;
    for (const auto& f : files) {
        const auto p = fs::path(dir) / f;
        if (fs::exists(p)) {
            con.error("'" + p.string() + "' already exists (use --force to overwrite)");
            return false;
        }
    }
    return true;
}

template <typename Write>
bool write_file(const std::string& dir, const std::string& name, const Console& con, Write&& write) {
    const auto path = (std::filesystem::path(dir) / name).string();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        con.error("cannot write '" + path + "'");
        return false;
    }
    write(os);
    os.flush();
    if (!os) {
        con.error("write to '" + path + "' failed");
        return false;
    }
    return true;
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

inline int run_campaign(const RunOptions& opt, Backend backend, const Console& con) {
    RunConfig cfg;
    try {
        cfg = load_config(opt.config_path);
    } catch (const ConfigError& e) {
        con.error(e.what());
        return kBadConfig;
    }
    if (opt.seed)
        cfg.seed = *opt.seed;
    cfg.resource.backend = backend;

    FunnelCampaign fc;
    try {
        fc = build_campaign(cfg);
    } catch (const Error& e) {
        con.error(std::string("config file '") + opt.config_path + "' is invalid:\n  " + e.what());
        return kBadConfig;
    }
    auto violations = validate_campaign(fc.spec);
    if (!violations.empty()) {
        std::string msg = "config file '" + opt.config_path + "' describes an invalid campaign:";
        for (const auto& v : violations)
            msg += "\n  " + v.message;
        con.error(msg);
        return kBadConfig;
    }

    const std::vector<std::string> files{"trace.jsonl", "metrics.csv", "summary.json", "utilization.csv",
                                         "throughput.csv"};
    if (!prepare_out_dir(opt.out_dir, files, opt.force, con))
        return kFailed;

    con.detail("seed " + std::to_string(cfg.seed) + ", library " + std::to_string(cfg.funnel.library_size) +
               ", pilot " + std::to_string(cfg.resource.nodes) + " nodes");
    RunResult result;
    try {
        if (backend == Backend::simulated) {
            result = simulate(fc.spec, &fc.functions, cfg.cost, engine_config(cfg));
        } else {
            LocalConfig lc;
            lc.overlay = cfg.overlay;
            lc.gpu_host_cpu = cfg.gpu_host_cpu;
            result = run_local(fc.spec, &fc.functions, cfg.cost, lc);
        }
    } catch (const Error& e) {
        con.error(e.what());
        return kFailed;
    }

    const auto summary = run_summary(result.trace, opt.bucket_width_s);
    const auto util = metrics::utilization(result.trace, opt.bucket_width_s);
    bool ok = write_file(opt.out_dir, "trace.jsonl", con, [&](std::ostream& os) { write_jsonl(os, result.trace); });
    ok = ok && write_file(opt.out_dir, "metrics.csv", con, [&](std::ostream& os) { write_metrics_csv(os, summary); });
    ok = ok && write_file(opt.out_dir, "summary.json", con, [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
    ok = ok && write_file(opt.out_dir, "utilization.csv", con, [&](std::ostream& os) { write_utilization_csv(os, util); });
    ok = ok && write_file(opt.out_dir, "throughput.csv", con,
                          [&](std::ostream& os) { write_throughput_csv(os, all_stage_throughput(result.trace)); });
    if (!ok)
        return kFailed;

    for (const auto& b : util.buckets)
        if (b.busy_node_fraction < 0.0 || b.busy_node_fraction > 1.0) {
            con.error("utilization bucket outside [0, 1]");
            return kFailed;
        }

    const auto& f = summary.at("funnel");
    con.info("makespan " + fmt(summary.at("makespan_s").get<double>()) + " s, utilization " +
             fmt(summary.at("utilization_mean").get<double>()) + ", overhead fraction " +
             fmt(summary.at("overhead_fraction").get<double>()));
    con.info("funnel: S1 survivors " + f.at("s1_survivors").dump() + ", CG ligands " + f.at("cg_ligands").dump() +
             ", binders " + f.at("s2_binders").dump() + ", selected conformations " +
             f.at("selected_conformations").dump() + ", S3-FG tasks " + f.at("s3fg_tasks").dump());
    for (const auto& [stage, t] : summary.at("throughput").items())
        con.detail("throughput " + stage + ": " + fmt(t.at("overall_per_s").get<double>()) + " tasks/s");
    if (result.walltime_exceeded) {
        con.error("walltime expired before the campaign finished");
        return kFailed;
    }
    for (const auto& p : result.pipelines)
        if (p.status() != PipelineStatus::done) {
            con.error("pipeline '" + p.id() + "' ended " + to_string(p.status()));
            return kFailed;
        }
    return kOk;
}

} // namespace detail

inline int cmd_simulate(const RunOptions& opt, const Console& con = {}) {
    return detail::run_campaign(opt, Backend::simulated, con);
}

inline int cmd_run_local(const RunOptions& opt, const Console& con = {}) {
    return detail::run_campaign(opt, Backend::local, con);
}

inline int cmd_analyze(const AnalyzeOptions& opt, const Console& con = {}) {
    const auto& m = opt.metric;
    if (m != "res" && m != "recall" && m != "lof" && m != "chamfer") {
        con.error("unknown metric '" + m + "' (expected res, recall, lof or chamfer)");
        return kBadConfig;
    }
    auto open = [&](const std::string& path) -> std::optional<std::ifstream> {
        std::ifstream is(path);
        if (!is) {
            con.error("cannot open '" + path + "'");
            return std::nullopt;
        }
        return is;
    };
    auto in = open(opt.input);
    if (!in)
        return kFailed;

    const std::string file = m + ".csv";
    std::ostringstream result;
    try {
        if (m == "res" || m == "recall") {
            const auto scored = to_scored_set(read_library_csv(*in));
            if (m == "res") {
                write_res_csv(result, analysis::compute_res(scored));
            } else {
                if (!opt.k || !opt.delta) {
                    con.error("recall needs --k and --delta");
                    return kBadConfig;
                }
                result << "k,delta,recall\n"
                       << *opt.k << ',' << *opt.delta << ','
                       << ensemble::detail::csv_number(analysis::top_k_recall(scored, *opt.k, *opt.delta)) << '\n';
            }
        } else if (m == "lof") {
            const auto points = read_point_set_csv(*in);
            write_lof_csv(result, analysis::lof(points, opt.k.value_or(10)));
        } else {
            if (opt.other.empty()) {
                con.error("chamfer needs a second point set (--other)");
                return kBadConfig;
            }
            auto in2 = open(opt.other);
            if (!in2)
                return kFailed;
            const auto a = read_point_set_csv(*in);
            analysis::PointSet b;
            try {
                b = read_point_set_csv(*in2);
            } catch (const InputError& e) {
                con.error("'" + opt.other + "': " + e.what());
                return kFailed;
            }
            result << "chamfer\n" << ensemble::detail::csv_number(analysis::chamfer(a, b)) << '\n';
        }
    } catch (const InputError& e) {
        con.error("'" + opt.input + "': " + e.what());
        return kFailed;
    } catch (const Error& e) {
        con.error(e.what());
        return kFailed;
    }

    if (opt.out_dir.empty()) {
        con.out << result.str();
        return kOk;
    }
    if (!detail::prepare_out_dir(opt.out_dir, {file}, true, con))
        return kFailed;
    if (!detail::write_file(opt.out_dir, file, con, [&](std::ostream& os) { os << result.str(); }))
        return kFailed;
    con.info("wrote " + (std::filesystem::path(opt.out_dir) / file).string());
    return kOk;
}

inline int cmd_report(const ReportOptions& opt, const Console& con = {}) {
    std::ifstream in(opt.trace_path);
    if (!in) {
        con.error("cannot open trace '" + opt.trace_path + "'");
        return kFailed;
    }
    std::vector<TraceEvent> trace;
    try {
        trace = read_jsonl(in);
    } catch (const InputError& e) {
        con.error("'" + opt.trace_path + "': " + e.what());
        return kFailed;
    }
    if (trace.empty())
        con.warn("trace '" + opt.trace_path + "' has no events; writing empty reports");

    if (!detail::prepare_out_dir(opt.out_dir, {}, true, con))
        return kFailed;
    const auto util = metrics::utilization(trace, opt.bucket_width_s);
    const auto oh = metrics::overhead(trace);
    bool ok = detail::write_file(opt.out_dir, "utilization.csv", con,
                                 [&](std::ostream& os) { write_utilization_csv(os, util); });
    ok = ok && detail::write_file(opt.out_dir, "throughput.csv", con,
                                  [&](std::ostream& os) { write_throughput_csv(os, all_stage_throughput(trace)); });
    ok = ok && detail::write_file(opt.out_dir, "overhead.json", con, [&](std::ostream& os) { write_overhead_json(os, oh); });
    if (!ok)
        return kFailed;
    for (const auto& b : util.buckets)
        if (b.busy_node_fraction < 0.0 || b.busy_node_fraction > 1.0) {
            con.error("utilization bucket outside [0, 1]");
            return kFailed;
        }
    con.info(std::to_string(util.buckets.size()) + " utilization buckets, mean " +
             detail::fmt(mean_node_utilization(util)) + ", overhead fraction " + detail::fmt(oh.fraction_of_makespan));
    return kOk;
}

} // namespace ensemble::cli
