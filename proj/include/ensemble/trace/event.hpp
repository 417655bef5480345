#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ensemble {

enum class Entity { task, worker, master, pilot, pipeline, stage };

inline const char* to_string(Entity e) {
    switch (e) {
    case Entity::task: return "task";
    case Entity::worker: return "worker";
    case Entity::master: return "master";
    case Entity::pilot: return "pilot";
    case Entity::pipeline: return "pipeline";
    case Entity::stage: return "stage";
    }
    return "?";
}

inline std::optional<Entity> parse_entity(std::string_view s) {
    if (s == "task") return Entity::task;
    if (s == "worker") return Entity::worker;
    if (s == "master") return Entity::master;
    if (s == "pilot") return Entity::pilot;
    if (s == "pipeline") return Entity::pipeline;
    if (s == "stage") return Entity::stage;
    return std::nullopt;
}

struct Resources {
    int nodes = 0;
    int cpus = 0;
    int gpus = 0;

    friend bool operator==(const Resources&, const Resources&) = default;
};

struct TraceEvent {
    double t = 0.0;
    Entity entity = Entity::task;
    std::string id;
    std::string transition;
    Resources res;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

// Transition vocabulary. Task, pipeline and stage transitions name the
// state entered; annotations (bulk_created) leave the state unchanged.
namespace tr {
inline constexpr std::string_view pending = "pending";
inline constexpr std::string_view scheduled = "scheduled";
inline constexpr std::string_view running = "running";
inline constexpr std::string_view done = "done";
inline constexpr std::string_view failed = "failed";
inline constexpr std::string_view canceled = "canceled";
inline constexpr std::string_view acquired = "acquired";
inline constexpr std::string_view active = "active";
inline constexpr std::string_view released = "released";
inline constexpr std::string_view idle = "idle";
inline constexpr std::string_view busy = "busy";
inline constexpr std::string_view bulk_created = "bulk_created";
} // namespace tr

/// Whether `transition` is legal for `entity` currently in `state` (empty
/// for an entity not seen yet). Annotations are legal in any live state.
inline bool legal_transition(Entity entity, std::string_view state, std::string_view transition) {
    auto in = [&](std::initializer_list<std::string_view> xs) {
        for (auto x : xs)
            if (x == state)
                return true;
        return false;
    };
    switch (entity) {
    case Entity::task:
        if (transition == tr::pending) return state.empty() || in({tr::running});
        if (transition == tr::scheduled) return in({tr::pending});
        if (transition == tr::running) return in({tr::scheduled});
        if (transition == tr::done || transition == tr::failed) return in({tr::running});
        if (transition == tr::canceled) return in({tr::pending, tr::scheduled, tr::running});
        return false;
    case Entity::pilot:
        if (transition == tr::acquired) return state.empty();
        if (transition == tr::active) return in({tr::acquired});
        if (transition == tr::released) return in({tr::acquired, tr::active});
        return false;
    case Entity::pipeline:
    case Entity::stage:
        if (transition == tr::running) return state.empty();
        if (transition == tr::done || transition == tr::failed || transition == tr::canceled)
            return in({tr::running});
        return false;
    case Entity::master:
        if (transition == tr::scheduled) return state.empty();
        if (transition == tr::running) return in({tr::scheduled});
        if (transition == tr::bulk_created) return in({tr::scheduled, tr::running});
        if (transition == tr::done || transition == tr::failed || transition == tr::canceled)
            return in({tr::scheduled, tr::running});
        return false;
    case Entity::worker:
        if (transition == tr::scheduled) return state.empty();
        if (transition == tr::running) return in({tr::scheduled});
        if (transition == tr::idle || transition == tr::busy) return in({tr::running, tr::idle, tr::busy});
        if (transition == tr::done || transition == tr::failed || transition == tr::canceled)
            return in({tr::scheduled, tr::running, tr::idle, tr::busy});
        return false;
    }
    return false;
}

inline bool is_annotation(std::string_view transition) { return transition == tr::bulk_created; }

} // namespace ensemble
