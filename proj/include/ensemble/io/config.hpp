#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemble/engine/sim.hpp"
#include "ensemble/error.hpp"
#include "ensemble/overlay/bulk.hpp"
#include "ensemble/pilot/spec.hpp"
#include "ensemble/workload/cost.hpp"
#include "ensemble/workload/funnel.hpp"

namespace ensemble {

/// Everything a campaign run is built from.
struct RunConfig {
    PilotSpec resource;
    FunnelConfig funnel;
    CostModel cost = CostModel::summit_defaults();
    std::optional<overlay::MasterConfig> overlay;
    double bootstrap_s = 0.0;
    double sched_latency_s = 0.0;
    bool gpu_host_cpu = true;
    std::uint64_t seed = 0;
    double time_scale = 1e-4;
    PipelineMode mode = PipelineMode::concurrent;
};

namespace detail {

class ConfigReader {
public:
    std::vector<std::string> problems;

    /// Reports keys of `obj` outside `allowed`. Returns false if `obj` is
    /// not an object.
    bool object(const nlohmann::json& obj, const std::string& where, std::set<std::string> allowed) {
        if (!obj.is_object()) {
            problems.push_back(where + ": expected an object");
            return false;
        }
        for (const auto& [k, v] : obj.items())
            if (!allowed.count(k))
                problems.push_back(where + ": unknown key '" + k + "'");
        return true;
    }

    template <typename Int>
    void integer(const nlohmann::json& obj, const char* key, const std::string& where, Int& out, long long min) {
        if (!obj.contains(key))
            return;
        const auto& v = obj.at(key);
        if (!v.is_number_integer()) {
            problems.push_back(where + "." + key + ": expected an integer");
            return;
        }
        const long long x = v.get<long long>();
        if (x < min) {
            problems.push_back(where + "." + key + ": must be >= " + std::to_string(min));
            return;
        }
        out = static_cast<Int>(x);
    }

    void number(const nlohmann::json& obj, const char* key, const std::string& where, double& out) {
        if (!obj.contains(key))
            return;
        const auto& v = obj.at(key);
        if (!v.is_number()) {
            problems.push_back(where + "." + key + ": expected a number");
            return;
        }
        out = v.get<double>();
    }

    void boolean(const nlohmann::json& obj, const char* key, const std::string& where, bool& out) {
        if (!obj.contains(key))
            return;
        if (!obj.at(key).is_boolean()) {
            problems.push_back(where + "." + key + ": expected true or false");
            return;
        }
        out = obj.at(key).get<bool>();
    }

    std::optional<std::string> text(const nlohmann::json& obj, const char* key, const std::string& where) {
        if (!obj.contains(key))
            return std::nullopt;
        if (!obj.at(key).is_string()) {
            problems.push_back(where + "." + key + ": expected a string");
            return std::nullopt;
        }
        return obj.at(key).get<std::string>();
    }
};

inline std::optional<StageTag> stage_tag_named(const std::string& s) {
    for (auto k : {StageTag::Kind::ML1, StageTag::Kind::S1, StageTag::Kind::S3CG, StageTag::Kind::S2,
                   StageTag::Kind::S3FG})
        if (StageTag(k).str() == s)
            return StageTag(k);
    return std::nullopt;
}

inline void read_tail(ConfigReader& r, const nlohmann::json& j, const std::string& where, Tail& out) {
    if (!r.object(j, where, {"kind", "sigma", "alpha", "mix"}))
        return;
    const auto kind = r.text(j, "kind", where).value_or("lognormal");
    if (kind == "lognormal") {
        double sigma = out.kind == Tail::Kind::lognormal ? out.sigma : 0.0;
        r.number(j, "sigma", where, sigma);
        if (j.contains("alpha") || j.contains("mix"))
            r.problems.push_back(where + ": alpha/mix apply to pareto_mix only");
        if (!(sigma >= 0.0))
            r.problems.push_back(where + ".sigma: must be >= 0");
        out = Tail::lognormal(sigma);
    } else if (kind == "pareto_mix") {
        double alpha = 2.0, mix = 0.0;
        r.number(j, "alpha", where, alpha);
        r.number(j, "mix", where, mix);
        if (j.contains("sigma"))
            r.problems.push_back(where + ": sigma applies to lognormal only");
        if (!(alpha > 1.0))
            r.problems.push_back(where + ".alpha: must be > 1");
        if (!(mix >= 0.0 && mix <= 1.0))
            r.problems.push_back(where + ".mix: must be in [0, 1]");
        out = Tail::pareto_mix(alpha, mix);
    } else {
        r.problems.push_back(where + ".kind: expected 'lognormal' or 'pareto_mix'");
    }
}

} // namespace detail

/// Reads a run configuration, collecting every problem instead of stopping
/// at the first. Unknown keys are problems too.
inline std::vector<std::string> parse_config(const nlohmann::json& j, RunConfig& cfg) {
    detail::ConfigReader r;
    if (!r.object(j, "config", {"resource", "funnel", "cost_model", "overlay", "engine", "seed", "time_scale", "mode"}))
        return r.problems;

    if (j.contains("resource")) {
        const auto& o = j.at("resource");
        if (r.object(o, "resource", {"nodes", "cpus_per_node", "gpus_per_node", "walltime_s", "backend"})) {
            r.integer(o, "nodes", "resource", cfg.resource.nodes, 1);
            r.integer(o, "cpus_per_node", "resource", cfg.resource.cpus_per_node, 0);
            r.integer(o, "gpus_per_node", "resource", cfg.resource.gpus_per_node, 0);
            r.number(o, "walltime_s", "resource", cfg.resource.walltime_s);
            if (auto b = r.text(o, "backend", "resource")) {
                if (*b == "simulated")
                    cfg.resource.backend = Backend::simulated;
                else if (*b == "local")
                    cfg.resource.backend = Backend::local;
                else
                    r.problems.push_back("resource.backend: expected 'simulated' or 'local'");
            }
            for (auto& v : pilot_violations(cfg.resource))
                r.problems.push_back("resource: " + v);
        }
    }

    if (j.contains("funnel")) {
        const auto& o = j.at("funnel");
        auto& f = cfg.funnel;
        if (r.object(o, "funnel",
                     {"library_size", "s1_fraction", "cg_count", "top_binders", "outliers_per_binder",
                      "conformations_per_binder", "lof_k", "noise_sigma", "replica_noise"})) {
            r.integer(o, "library_size", "funnel", f.library_size, 1);
            r.number(o, "s1_fraction", "funnel", f.s1_fraction);
            r.integer(o, "cg_count", "funnel", f.cg_count, 1);
            r.integer(o, "top_binders", "funnel", f.top_binders, 1);
            r.integer(o, "outliers_per_binder", "funnel", f.outliers_per_binder, 1);
            r.integer(o, "conformations_per_binder", "funnel", f.conformations_per_binder, 2);
            r.integer(o, "lof_k", "funnel", f.lof_k, 1);
            r.number(o, "noise_sigma", "funnel", f.noise_sigma);
            r.number(o, "replica_noise", "funnel", f.replica_noise);
        }
    }

    if (j.contains("cost_model") && r.object(j.at("cost_model"), "cost_model", {"ML1", "S1", "S3CG", "S2", "S3FG"})) {
        for (const auto& [name, o] : j.at("cost_model").items()) {
            const auto tag = detail::stage_tag_named(name);
            if (!tag)
                continue;
            const std::string where = "cost_model." + name;
            StageCost c = cfg.cost.at(*tag);
            if (!r.object(o, where, {"median_node_hours", "tail", "nodes_per_task", "throughput_per_gpu"}))
                continue;
            r.number(o, "median_node_hours", where, c.median_node_hours);
            r.number(o, "nodes_per_task", where, c.nodes_per_task);
            if (o.contains("throughput_per_gpu")) {
                double rate = 0.0;
                r.number(o, "throughput_per_gpu", where, rate);
                if (!(rate > 0.0))
                    r.problems.push_back(where + ".throughput_per_gpu: must be > 0");
                c.throughput_per_gpu = rate;
            }
            if (o.contains("tail"))
                detail::read_tail(r, o.at("tail"), where + ".tail", c.tail);
            if (!(c.median_node_hours > 0.0))
                r.problems.push_back(where + ".median_node_hours: must be > 0");
            if (!(c.nodes_per_task > 0.0))
                r.problems.push_back(where + ".nodes_per_task: must be > 0");
            cfg.cost.stages[*tag] = c;
        }
    }

    if (j.contains("overlay")) {
        const auto& o = j.at("overlay");
        overlay::MasterConfig m;
        if (r.object(o, "overlay",
                     {"n_masters", "workers_per_master", "bulk_size", "n_workers", "policy", "worker_cpus",
                      "worker_gpus", "master_cpus", "master_startup_s", "worker_startup_s", "dispatch_latency_s"})) {
            r.integer(o, "n_masters", "overlay", m.n_masters, 1);
            r.integer(o, "workers_per_master", "overlay", m.workers_per_master, 1);
            r.integer(o, "bulk_size", "overlay", m.bulk_size, 1);
            r.integer(o, "n_workers", "overlay", m.n_workers, 0);
            r.integer(o, "worker_cpus", "overlay", m.worker_cpus, 0);
            r.integer(o, "worker_gpus", "overlay", m.worker_gpus, 0);
            r.integer(o, "master_cpus", "overlay", m.master_cpus, 0);
            r.number(o, "master_startup_s", "overlay", m.master_startup_s);
            r.number(o, "worker_startup_s", "overlay", m.worker_startup_s);
            r.number(o, "dispatch_latency_s", "overlay", m.dispatch_latency_s);
            if (auto p = r.text(o, "policy", "overlay")) {
                if (*p == "least_outstanding")
                    m.policy = overlay::DispatchPolicy::least_outstanding;
                else if (*p == "round_robin")
                    m.policy = overlay::DispatchPolicy::round_robin;
                else
                    r.problems.push_back("overlay.policy: expected 'least_outstanding' or 'round_robin'");
            }
            for (auto& v : overlay::config_violations(m))
                r.problems.push_back(v);
            cfg.overlay = m;
        }
    }

    if (j.contains("engine")) {
        const auto& o = j.at("engine");
        if (r.object(o, "engine", {"bootstrap_s", "sched_latency_s", "gpu_host_cpu"})) {
            r.number(o, "bootstrap_s", "engine", cfg.bootstrap_s);
            r.number(o, "sched_latency_s", "engine", cfg.sched_latency_s);
            r.boolean(o, "gpu_host_cpu", "engine", cfg.gpu_host_cpu);
            if (cfg.bootstrap_s < 0 || cfg.sched_latency_s < 0)
                r.problems.push_back("engine: delays must be >= 0");
        }
    }

    if (j.contains("seed")) {
        if (j.at("seed").is_number_unsigned() || (j.at("seed").is_number_integer() && j.at("seed").get<long long>() >= 0))
            cfg.seed = j.at("seed").get<std::uint64_t>();
        else
            r.problems.push_back("seed: expected a non-negative integer");
    }
    r.number(j, "time_scale", "config", cfg.time_scale);
    if (!(cfg.time_scale > 0.0))
        r.problems.push_back("time_scale: must be > 0");
    if (auto m = r.text(j, "mode", "config")) {
        if (*m == "concurrent")
            cfg.mode = PipelineMode::concurrent;
        else if (*m == "sequential_pipelines")
            cfg.mode = PipelineMode::sequential;
        else
            r.problems.push_back("mode: expected 'concurrent' or 'sequential_pipelines'");
    }

    for (auto& v : funnel_violations(cfg.funnel))
        r.problems.push_back(v);
    return r.problems;
}

/// Loads and checks a configuration file. Throws ConfigError listing every
/// problem, one per line.
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    RunConfig cfg;
    auto problems = parse_config(j, cfg);
    if (!problems.empty()) {
        std::string msg = "config file '" + path + "' is invalid:";
        for (const auto& p : problems)
            msg += "\n  " + p;
        throw ConfigError(msg);
    }
    return cfg;
}

inline EngineConfig engine_config(const RunConfig& c) {
    EngineConfig e;
    e.bootstrap_s = c.bootstrap_s;
    e.sched_latency_s = c.sched_latency_s;
    e.gpu_host_cpu = c.gpu_host_cpu;
    e.overlay = c.overlay;
    return e;
}

inline FunnelCampaign build_campaign(const RunConfig& c) {
    FunnelConfig f = c.funnel;
    f.seed = c.seed;
    auto fc = build_funnel_campaign(f, c.cost, c.resource, c.time_scale);
    fc.spec.pipeline_mode = c.mode;
    return fc;
}

} // namespace ensemble
