#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ensemble/analysis/enrichment.hpp"
#include "ensemble/campaign/functions.hpp"
#include "ensemble/campaign/records.hpp"
#include "ensemble/campaign/types.hpp"
#include "ensemble/error.hpp"
#include "ensemble/rng.hpp"
#include "ensemble/workload/cost.hpp"
#include "ensemble/workload/library.hpp"

namespace ensemble {

struct FunnelConfig {
    std::size_t library_size = 100000;
    double s1_fraction = 0.01;
    std::size_t cg_count = 100;
    std::size_t top_binders = 5;
    std::size_t outliers_per_binder = 5;
    std::uint64_t seed = 0;
    double noise_sigma = kCalibratedNoiseSigma;
    /// Conformations the S2 aggregation emits per binder, and the LOF
    /// neighbourhood used to pick outliers among them.
    std::size_t conformations_per_binder = 40;
    std::size_t lof_k = 10;
    /// Per-replica noise of the ESMACS score estimates.
    double replica_noise = 0.5;
};

inline constexpr int cg_replicas = 6;
inline constexpr int fg_replicas = 24;

/// Number of ligands that reach S1.
inline std::size_t s1_count(const FunnelConfig& f) {
    return analysis::count_for_fraction(f.s1_fraction, f.library_size);
}

inline std::vector<std::string> funnel_violations(const FunnelConfig& f) {
    std::vector<std::string> v;
    if (f.library_size < 1)
        v.push_back("funnel: library_size must be >= 1");
    if (!(f.s1_fraction > 0.0 && f.s1_fraction <= 1.0))
        v.push_back("funnel: s1_fraction must be in (0, 1]");
    if (!v.empty())
        return v;
    const std::size_t s1 = s1_count(f);
    if (f.cg_count < 1 || f.cg_count > s1)
        v.push_back("funnel: cg_count " + std::to_string(f.cg_count) + " must be in [1, " + std::to_string(s1) +
                    "] (S1 survivors)");
    if (f.top_binders < 1 || f.top_binders > f.cg_count)
        v.push_back("funnel: top_binders must be in [1, cg_count]");
    if (f.outliers_per_binder < 1 || f.outliers_per_binder > f.conformations_per_binder)
        v.push_back("funnel: outliers_per_binder must be in [1, conformations_per_binder]");
    if (f.conformations_per_binder < 2)
        v.push_back("funnel: conformations_per_binder must be >= 2");
    if (f.lof_k < 1)
        v.push_back("funnel: lof_k must be >= 1");
    if (!(f.noise_sigma >= 0.0) || !(f.replica_noise >= 0.0))
        v.push_back("funnel: noise levels must be >= 0");
    return v;
}

/// Task shapes of the per-ligand stages. Replicas run on one GPU each, so
/// on a 6-GPU node a CG ligand fills one node and an FG conformation four;
/// S2 holds one full CPU node for aggregation and one full GPU node for
/// training.
struct FunnelTemplates {
    TaskTemplate s1_dock;
    TaskTemplate cg_esmacs;
    TaskTemplate s2_aggregate;
    TaskTemplate s2_train;
    TaskTemplate fg_esmacs;
};

inline FunnelTemplates funnel_templates(const PilotSpec& shape) {
    FunnelTemplates t;
    t.s1_dock = {"dock", TaskKind::function, StageTag::Kind::S1, 0, 1, 1, DurationModel::stage_cost(StageTag::Kind::S1),
                 "s1.dock", 1};
    t.cg_esmacs = {"esmacs", TaskKind::simulated, StageTag::Kind::S3CG, 0, 1, 1,
                   DurationModel::stage_cost(StageTag::Kind::S3CG), "s3cg.esmacs", cg_replicas};
    t.s2_aggregate = {"aggregate", TaskKind::simulated, StageTag::Kind::S2, std::max(1, shape.cpus_per_node), 0, 1,
                      DurationModel::stage_cost(StageTag::Kind::S2), "s2.aggregate", 1};
    t.s2_train = {"train", TaskKind::simulated, StageTag::Kind::S2, 0, std::max(1, shape.gpus_per_node), 1,
                  DurationModel::stage_cost(StageTag::Kind::S2), "s2.train", 1};
    t.fg_esmacs = {"esmacs", TaskKind::simulated, StageTag::Kind::S3FG, 0, 1, 1,
                   DurationModel::stage_cost(StageTag::Kind::S3FG), "s3fg.esmacs", fg_replicas};
    return t;
}

struct FunnelCampaign {
    CampaignSpec spec;
    TaskFunctions functions;
    std::shared_ptr<const Library> library;
};

namespace detail {

inline const ScoredItem& single_item(const std::vector<ScoredItem>& items, const TaskDescriptor& t) {
    if (items.size() != 1)
        throw InputError("task '" + t.task_id + "' expects exactly one input record");
    return items.front();
}

inline double gaussian(Rng& rng, double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng); }

} // namespace detail

/// The five-stage screening funnel as one pipeline:
///   ML1 scores the whole library and keeps the best s1_fraction;
///   S1 docks those and keeps cg_count; S3-CG runs 6 replicas per ligand
///   and keeps top_binders; S2 aggregates conformations per binder and
///   keeps outliers_per_binder of them by LOF; S3-FG runs 24 replicas per
///   selected conformation.
inline FunnelCampaign build_funnel_campaign(const FunnelConfig& funnel, const CostModel& cost,
                                            const PilotSpec& resource, double time_scale = 1e-4) {
    auto bad = funnel_violations(funnel);
    if (!bad.empty())
        throw ValidationError(bad.front());
    for (auto tag : {StageTag::Kind::ML1, StageTag::Kind::S1, StageTag::Kind::S3CG, StageTag::Kind::S2,
                     StageTag::Kind::S3FG})
        cost.at(tag);

    auto lib = std::make_shared<Library>(
        surrogate_scores(generate_library(funnel.library_size, funnel.seed), funnel.noise_sigma, funnel.seed));
    auto index = std::make_shared<std::unordered_map<std::string, std::size_t>>();
    index->reserve(lib->size());
    for (std::size_t i = 0; i < lib->size(); ++i)
        (*index)[(*lib)[i].ligand_id] = i;

    FunnelCampaign fc;
    fc.library = lib;
    const auto tpl = funnel_templates(resource);

    TaskDescriptor ml1;
    ml1.task_id = "ML1.infer";
    ml1.kind = TaskKind::simulated;
    ml1.stage_tag = StageTag::Kind::ML1;
    ml1.cpus = 0;
    ml1.gpus = std::max(1, resource.gpus_per_node);
    ml1.duration = DurationModel::stage_cost(StageTag::Kind::ML1, static_cast<double>(funnel.library_size));
    ml1.entrypoint = "ml1.infer";

    PostHook to_s1{HookKind::select_top_fraction, funnel.s1_fraction, 0, 1, 5, {tpl.s1_dock}};
    PostHook to_cg{HookKind::select_top_k, 1.0, funnel.cg_count, 1, 5, {tpl.cg_esmacs}};
    PostHook to_s2{HookKind::select_top_k, 1.0, funnel.top_binders, 1, 5, {tpl.s2_aggregate, tpl.s2_train}};
    PostHook to_fg{HookKind::lof_outliers, 1.0, 0, funnel.outliers_per_binder, funnel.lof_k, {tpl.fg_esmacs}};

    PipelineSpec p;
    p.pipeline_id = "funnel";
    p.stages = {{"ML1", {ml1}, to_s1}, {"S1", {}, to_cg}, {"S3CG", {}, to_s2}, {"S2", {}, to_fg}, {"S3FG", {}, {}}};

    fc.spec.pipelines = {std::move(p)};
    fc.spec.resource = resource;
    fc.spec.mode = resource.backend;
    fc.spec.seed = funnel.seed;
    fc.spec.time_scale = time_scale;

    auto true_score = [lib, index](const std::string& id, const TaskDescriptor& t) {
        auto it = index->find(id);
        if (it == index->end())
            throw InputError("task '" + t.task_id + "': unknown ligand '" + id + "'");
        return (*lib)[it->second].true_score;
    };

    fc.functions.add("ml1.infer", [lib](const TaskDescriptor&, const TaskContext&) {
        std::string out;
        out.reserve(lib->size() * 24);
        for (const auto& r : *lib) {
            out += r.ligand_id;
            out += ',';
            append_number(out, r.predicted_score);
            out += '\n';
        }
        return out;
    });
    fc.functions.add("s1.dock", [true_score](const TaskDescriptor& t, const TaskContext&) {
        const auto item = detail::single_item(decode_items(t.payload), t);
        return encode_item({item.id, true_score(item.id, t), {}, {}}) + "\n";
    });
    const double rn = funnel.replica_noise;
    fc.functions.add("s3cg.esmacs", [true_score, rn](const TaskDescriptor& t, const TaskContext& ctx) {
        const auto item = detail::single_item(decode_items(t.payload), t);
        Rng rng = derived_rng(ctx.seed, t.task_id, 1);
        return encode_item({item.id, true_score(item.id, t) + detail::gaussian(rng, rn), {}, {}}) + "\n";
    });
    const std::size_t n_conf = funnel.conformations_per_binder;
    const std::size_t n_out = funnel.outliers_per_binder;
    fc.functions.add("s2.aggregate", [n_conf, n_out](const TaskDescriptor& t, const TaskContext& ctx) {
        // A tight cluster of conformations plus a few far-flung ones.
        const auto item = detail::single_item(decode_items(t.payload), t);
        Rng rng = derived_rng(ctx.seed, t.task_id, 1);
        std::normal_distribution<double> unit(0.0, 1.0);
        std::uniform_real_distribution<double> radius(6.0, 12.0);
        std::vector<ScoredItem> confs;
        for (std::size_t j = 0; j < n_conf; ++j) {
            double x = unit(rng), y = unit(rng), z = unit(rng);
            if (j >= n_conf - n_out) {
                const double norm = std::sqrt(x * x + y * y + z * z) + 1e-12;
                const double r = radius(rng) / norm;
                x *= r, y *= r, z *= r;
            }
            char suffix[16];
            std::snprintf(suffix, sizeof suffix, ".c%03zu", j);
            confs.push_back({item.id + suffix, item.score, item.id, {x, y, z}});
        }
        return encode_items(confs);
    });
    fc.functions.add("s2.train", [](const TaskDescriptor&, const TaskContext&) { return std::string(); });
    fc.functions.add("s3fg.esmacs", [rn](const TaskDescriptor& t, const TaskContext& ctx) {
        const auto item = detail::single_item(decode_items(t.payload), t);
        Rng rng = derived_rng(ctx.seed, t.task_id, 1);
        return encode_item({item.id, item.score + 0.5 * detail::gaussian(rng, rn), {}, {}}) + "\n";
    });
    return fc;
}

} // namespace ensemble
