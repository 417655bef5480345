#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ensemble/error.hpp"
#include "ensemble/pilot/spec.hpp"

namespace ensemble {

enum class TaskKind { executable, function, simulated };

inline const char* to_string(TaskKind k) {
    switch (k) {
    case TaskKind::executable: return "executable";
    case TaskKind::function: return "function";
    case TaskKind::simulated: return "simulated";
    }
    return "?";
}

/// Which funnel stage a task belongs to. Known stages compare by kind;
/// `other` carries a free-form label.
class StageTag {
public:
    enum class Kind { ML1, S1, S3CG, S2, S3FG, other };

    StageTag() = default;
    StageTag(Kind k) : kind_(k) {} // NOLINT: implicit on purpose, StageTag::S1 reads well
    static StageTag other(std::string label) {
        StageTag t(Kind::other);
        t.label_ = std::move(label);
        return t;
    }

    static StageTag parse(const std::string& s) {
        if (s == "ML1") return Kind::ML1;
        if (s == "S1") return Kind::S1;
        if (s == "S3CG") return Kind::S3CG;
        if (s == "S2") return Kind::S2;
        if (s == "S3FG") return Kind::S3FG;
        return other(s);
    }

    Kind kind() const noexcept { return kind_; }

    std::string str() const {
        switch (kind_) {
        case Kind::ML1: return "ML1";
        case Kind::S1: return "S1";
        case Kind::S3CG: return "S3CG";
        case Kind::S2: return "S2";
        case Kind::S3FG: return "S3FG";
        case Kind::other: return label_;
        }
        return label_;
    }

    friend bool operator==(const StageTag& a, const StageTag& b) {
        return a.kind_ == b.kind_ && (a.kind_ != Kind::other || a.label_ == b.label_);
    }
    friend bool operator<(const StageTag& a, const StageTag& b) { return a.str() < b.str(); }

private:
    Kind kind_ = Kind::other;
    std::string label_;
};

/// How long a task runs: either a fixed number of seconds, or `units`
/// samples' worth of the per-ligand cost of a stage in the campaign's
/// cost model.
struct DurationModel {
    enum class Kind { fixed, stage_cost };

    Kind kind = Kind::fixed;
    double seconds = 0.0;
    StageTag stage;
    double units = 1.0;

    static DurationModel fixed_seconds(double s) { return {Kind::fixed, s, {}, 1.0}; }
    static DurationModel stage_cost(StageTag tag, double units = 1.0) {
        return {Kind::stage_cost, 0.0, std::move(tag), units};
    }
};

/// One schedulable unit. For multi-node tasks `cpus` and `gpus` are per
/// node of the placement.
struct TaskDescriptor {
    std::string task_id;
    TaskKind kind = TaskKind::simulated;
    StageTag stage_tag;
    int cpus = 1;
    int gpus = 0;
    int nodes = 1;
    DurationModel duration;
    /// Shell command for executables, registered function name otherwise.
    std::string entrypoint;
    std::string payload;
};

/// Shape of tasks generated for the next stage from each item a hook
/// selects. Generated ids are "<stage>.<item>.<name>", with ".r<j>"
/// appended when replicas > 1.
struct TaskTemplate {
    std::string name;
    TaskKind kind = TaskKind::simulated;
    StageTag stage_tag;
    int cpus = 1;
    int gpus = 0;
    int nodes = 1;
    DurationModel duration;
    std::string entrypoint;
    int replicas = 1;
};

enum class HookKind { identity, select_top_fraction, select_top_k, lof_outliers };

inline const char* to_string(HookKind k) {
    switch (k) {
    case HookKind::identity: return "identity";
    case HookKind::select_top_fraction: return "select_top_fraction";
    case HookKind::select_top_k: return "select_top_k";
    case HookKind::lof_outliers: return "lof_outliers";
    }
    return "?";
}

/// Filter applied to a finished stage's outputs. When `spawn` is empty the
/// selected records are appended to the payload of every declared task of
/// the next stage; otherwise the next stage is replaced by tasks generated
/// from `spawn`.
struct PostHook {
    HookKind kind = HookKind::identity;
    double fraction = 1.0;       // select_top_fraction
    std::size_t k = 0;           // select_top_k
    std::size_t per_group = 1;   // lof_outliers: outliers kept per group
    std::size_t k_neighbors = 5; // lof_outliers
    std::vector<TaskTemplate> spawn;
};

struct StageSpec {
    std::string stage_id;
    std::vector<TaskDescriptor> tasks;
    std::optional<PostHook> post_hook;
};

struct PipelineSpec {
    std::string pipeline_id;
    std::vector<StageSpec> stages;
};

enum class PipelineMode { concurrent, sequential };

struct CampaignSpec {
    std::vector<PipelineSpec> pipelines;
    PilotSpec resource;
    std::uint64_t seed = 0;
    Backend mode = Backend::simulated;
    /// Multiplier applied to modeled seconds before they reach the clock.
    double time_scale = 1e-4;
    PipelineMode pipeline_mode = PipelineMode::concurrent;
};

} // namespace ensemble
