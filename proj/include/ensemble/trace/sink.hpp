#pragma once

#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ensemble/error.hpp"
#include "ensemble/trace/event.hpp"

namespace ensemble {

/// Tracks the current state of every entity and checks each new event
/// against the legal state graph and per-entity time order.
///
/// Traces of separate runs may be concatenated: a pilot acquired after
/// every pilot seen so far was released opens a new segment, and entity
/// states restart there.
class TransitionChecker {
public:
    /// Empty string when `ev` is legal, a diagnostic otherwise. Legal
    /// events update the tracked state.
    std::string check(const TraceEvent& ev) {
        if (ev.entity == Entity::pilot && ev.transition == tr::acquired && live_pilots_ == 0 && !tracks_.empty())
            tracks_.clear();
        std::string key;
        key.reserve(ev.id.size() + 1);
        key += static_cast<char>('0' + static_cast<int>(ev.entity));
        key += ev.id;
        auto& track = tracks_[key];
        if (!legal_transition(ev.entity, track.state, ev.transition))
            return std::string(to_string(ev.entity)) + " '" + ev.id + "': illegal transition " +
                   (track.state.empty() ? std::string("<new>") : track.state) + " -> " + ev.transition;
        if (ev.t < track.t)
            return std::string(to_string(ev.entity)) + " '" + ev.id + "': event at t=" + std::to_string(ev.t) +
                   " precedes previous event at t=" + std::to_string(track.t);
        track.t = ev.t;
        if (!is_annotation(ev.transition))
            track.state = ev.transition;
        if (ev.entity == Entity::pilot) {
            if (ev.transition == tr::acquired)
                ++live_pilots_;
            else if (ev.transition == tr::released)
                --live_pilots_;
        }
        return {};
    }

private:
    struct Track {
        std::string state;
        double t = -1e300;
    };
    std::unordered_map<std::string, Track> tracks_;
    int live_pilots_ = 0;
};

/// In-memory, thread-safe event log.
class TraceSink {
public:
    enum class Policy { reject, flag };

    explicit TraceSink(Policy policy = Policy::reject) : policy_(policy) {}

    /// Appends `ev`. An illegal transition throws TraceError under
    /// Policy::reject; under Policy::flag it is stored and also listed in
    /// flagged().
    void record(TraceEvent ev) {
        std::lock_guard lock(mu_);
        auto problem = checker_.check(ev);
        if (!problem.empty()) {
            if (policy_ == Policy::reject)
                throw TraceError(problem);
            flagged_.push_back(std::move(problem));
        }
        events_.push_back(std::move(ev));
    }

    void record(double t, Entity e, std::string id, std::string_view transition, Resources res = {}) {
        record(TraceEvent{t, e, std::move(id), std::string(transition), res});
    }

    /// Snapshot copy; safe while other threads keep recording.
    std::vector<TraceEvent> snapshot() const {
        std::lock_guard lock(mu_);
        return events_;
    }

    /// Direct access; only valid once producers have stopped.
    const std::vector<TraceEvent>& events() const noexcept { return events_; }
    std::vector<TraceEvent> take() noexcept { return std::move(events_); }

    const std::vector<std::string>& flagged() const noexcept { return flagged_; }
    std::size_t size() const {
        std::lock_guard lock(mu_);
        return events_.size();
    }

    void reserve(std::size_t n) {
        std::lock_guard lock(mu_);
        events_.reserve(n);
    }

private:
    Policy policy_;
    mutable std::mutex mu_;
    TransitionChecker checker_;
    std::vector<TraceEvent> events_;
    std::vector<std::string> flagged_;
};

} // namespace ensemble
