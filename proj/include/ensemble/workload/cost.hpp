#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <random>

#include "ensemble/campaign/types.hpp"
#include "ensemble/error.hpp"
#include "ensemble/rng.hpp"

namespace ensemble {

/// Multiplicative spread of per-ligand cost around the median.
///  - lognormal: exp(N(0, sigma)); sigma = 0 gives a fixed duration.
///  - pareto_mix: with probability `mix` the median is stretched by a
///    Pareto(alpha, 1) factor; otherwise it is exactly the median.
struct Tail {
    enum class Kind { lognormal, pareto_mix };

    Kind kind = Kind::lognormal;
    double sigma = 0.0;
    double alpha = 2.0;
    double mix = 0.0;

    static Tail lognormal(double sigma) { return {Kind::lognormal, sigma, 2.0, 0.0}; }
    static Tail pareto_mix(double alpha, double mix) { return {Kind::pareto_mix, 0.0, alpha, mix}; }

    double mean_factor() const {
        if (kind == Kind::lognormal)
            return std::exp(0.5 * sigma * sigma);
        return (1.0 - mix) + mix * alpha / (alpha - 1.0);
    }

    bool degenerate() const { return kind == Kind::lognormal ? sigma == 0.0 : mix == 0.0; }

    double sample(Rng& rng) const {
        if (kind == Kind::lognormal) {
            if (sigma == 0.0)
                return 1.0;
            return std::lognormal_distribution<double>(0.0, sigma)(rng);
        }
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) >= mix)
            return 1.0;
        return std::pow(1.0 - u(rng), -1.0 / alpha);
    }
};

/// Per-ligand cost of one stage.
struct StageCost {
    double median_node_hours = 1.0;
    Tail tail;
    /// Nodes one ligand occupies while it is processed.
    double nodes_per_task = 1.0;
    /// Ligands per second per GPU. When set, durations are drawn so that
    /// their mean is 1/throughput_per_gpu (one GPU per ligand), overriding
    /// the node-hour median.
    std::optional<double> throughput_per_gpu;

    /// Median wall seconds for one ligand, before time scaling.
    double median_seconds() const {
        if (throughput_per_gpu)
            return 1.0 / (*throughput_per_gpu * tail.mean_factor());
        return median_node_hours * 3600.0 / nodes_per_task;
    }
};

struct CostModel {
    std::map<StageTag, StageCost> stages;

    const StageCost& at(const StageTag& tag) const {
        auto it = stages.find(tag);
        if (it == stages.end())
            throw ConfigError("cost model has no entry for stage '" + tag.str() + "'");
        return it->second;
    }

    /// Per-ligand node-hours on a 42-core, 6-GPU node. The ML1 entry is
    /// derived from an inference rate of 319674 ligands/s over 1536 GPUs.
    static CostModel summit_defaults() {
        CostModel cm;
        const double ml1_node_rate = 6.0 * 319674.0 / 1536.0;
        cm.stages[StageTag::Kind::ML1] = {1.0 / (ml1_node_rate * 3600.0), Tail::lognormal(0.0), 1.0, {}};
        cm.stages[StageTag::Kind::S1] = {1e-4, Tail::lognormal(1.0), 1.0 / 6.0, {}};
        cm.stages[StageTag::Kind::S3CG] = {0.5, Tail::lognormal(0.1), 1.0, {}};
        cm.stages[StageTag::Kind::S2] = {4.0, Tail::lognormal(0.1), 2.0, {}};
        cm.stages[StageTag::Kind::S3FG] = {5.0, Tail::lognormal(0.1), 4.0, {}};
        return cm;
    }

    /// Per-GPU docking rate measured for S1: 14252 ligands/s on 6000 GPUs.
    static constexpr double s1_ligands_per_gpu_second = 14252.0 / 6000.0;
};

/// One duration draw for a ligand of `tag`, in clock seconds:
/// median seconds * tail factor * time_scale.
inline double sample_duration(const StageTag& tag, const CostModel& cm, Rng& rng, double time_scale = 1.0) {
    const StageCost& c = cm.at(tag);
    return c.median_seconds() * c.tail.sample(rng) * time_scale;
}

/// Duration of a task covering `units` ligands: one draw per whole ligand,
/// plus a scaled draw for a fractional remainder.
inline double sample_units_duration(const StageTag& tag, const CostModel& cm, Rng& rng, double units,
                                    double time_scale = 1.0) {
    const StageCost& c = cm.at(tag);
    if (c.tail.degenerate() || units <= 1.0)
        return units * c.median_seconds() * c.tail.sample(rng) * time_scale;
    const double whole = std::floor(units);
    double factor = 0.0;
    for (double i = 0; i < whole; ++i)
        factor += c.tail.sample(rng);
    if (units > whole)
        factor += (units - whole) * c.tail.sample(rng);
    return c.median_seconds() * factor * time_scale;
}

} // namespace ensemble
