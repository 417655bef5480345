#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "ensemble/error.hpp"
#include "ensemble/pilot/slots.hpp"

namespace ensemble {

struct ReadyEntry {
    std::string task_id;
    /// Caller-defined owner tag (pipeline index, service task, ...).
    int owner = 0;
    Demand demand;
};

/// Ordered queue of tasks waiting for slots. Scheduling rounds place
/// entries first-fit in queue order, like schedule(), but stop as soon as
/// every demand still queued is known not to fit, so a full pilot with a
/// long homogeneous queue costs O(placed) per round.
class ReadyQueue {
public:
    std::size_t size() const noexcept { return live_count_; }
    bool empty() const noexcept { return live_count_ == 0; }

    void push(ReadyEntry e) {
        ++classes_[key(e.demand)];
        ++live_count_;
        items_.push_back(std::move(e));
        live_.push_back(1);
    }

    /// Drops every queued entry for which `pred(entry)` holds; returns
    /// how many were dropped.
    template <typename Pred>
    std::size_t erase_if(Pred&& pred) {
        std::size_t n = 0;
        for (std::size_t i = head_; i < items_.size(); ++i)
            if (live_[i] && pred(items_[i])) {
                kill(i);
                ++n;
            }
        compact();
        return n;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (std::size_t i = head_; i < items_.size(); ++i)
            if (live_[i])
                f(items_[i]);
    }

    /// One first-fit round. `placed(entry, placement)` runs for every
    /// entry that got slots, in queue order; the entry leaves the queue.
    template <typename OnPlaced>
    std::size_t place(SlotMap& slots, double now, OnPlaced&& placed) {
        const PilotSpec& spec = slots.spec();
        std::map<Key, std::size_t> remaining = classes_;
        std::vector<Demand> rejected;
        std::size_t n_placed = 0;
        auto dominated = [&](const Demand& d) {
            for (const auto& r : rejected)
                if (r.cpus <= d.cpus && r.gpus <= d.gpus && r.nodes <= d.nodes)
                    return true;
            return false;
        };
        for (std::size_t i = head_; i < items_.size(); ++i) {
            if (!live_[i])
                continue;
            const Demand d = items_[i].demand;
            --remaining[key(d)];
            if (dominated(d))
                continue;
            if (!fits_empty_pilot(d, spec))
                throw UnsatisfiableError("task '" + items_[i].task_id + "' is larger than the whole pilot");
            auto nodes = slots.find_nodes(d, d.nodes);
            if (static_cast<int>(nodes.size()) == d.nodes) {
                const Placement& p = slots.occupy(items_[i].task_id, d, nodes, now);
                kill(i);
                ReadyEntry e = std::move(items_[i]);
                ++n_placed;
                placed(e, p);
                continue;
            }
            rejected.push_back(d);
            bool any_left = false;
            for (const auto& [k, count] : remaining)
                if (count > 0 && !dominated(demand_of(k))) {
                    any_left = true;
                    break;
                }
            if (!any_left)
                break;
        }
        compact();
        return n_placed;
    }

private:
    using Key = std::tuple<int, int, int>;
    static Key key(const Demand& d) { return {d.nodes, d.cpus, d.gpus}; }
    static Demand demand_of(const Key& k) { return {std::get<0>(k), std::get<1>(k), std::get<2>(k)}; }

    void kill(std::size_t i) {
        live_[i] = 0;
        --live_count_;
        auto it = classes_.find(key(items_[i].demand));
        if (--it->second == 0)
            classes_.erase(it);
    }

    void compact() {
        while (head_ < items_.size() && !live_[head_])
            ++head_;
        if (head_ > 4096 && head_ * 2 > items_.size()) {
            items_.erase(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(head_));
            live_.erase(live_.begin(), live_.begin() + static_cast<std::ptrdiff_t>(head_));
            head_ = 0;
        }
    }

    std::vector<ReadyEntry> items_;
    std::vector<char> live_;
    std::size_t head_ = 0;
    std::size_t live_count_ = 0;
    std::map<Key, std::size_t> classes_;
};

} // namespace ensemble
