#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "ensemble/error.hpp"

namespace ensemble {

enum class Backend { simulated, local };

inline const char* to_string(Backend b) { return b == Backend::simulated ? "simulated" : "local"; }

/// A block of homogeneous nodes acquired once and then filled with tasks.
struct PilotSpec {
    int nodes = 1;
    int cpus_per_node = 1;
    int gpus_per_node = 0;
    double walltime_s = 3600.0;
    Backend backend = Backend::simulated;

    int total_cpus() const noexcept { return nodes * cpus_per_node; }
    int total_gpus() const noexcept { return nodes * gpus_per_node; }
};

inline std::vector<std::string> pilot_violations(const PilotSpec& p) {
    std::vector<std::string> out;
    if (p.nodes < 1)
        out.push_back("pilot: nodes must be >= 1");
    if (p.cpus_per_node < 0 || p.gpus_per_node < 0)
        out.push_back("pilot: slot counts must be non-negative");
    if (p.cpus_per_node + p.gpus_per_node <= 0)
        out.push_back("pilot: cpus_per_node + gpus_per_node must be > 0");
    if (!(p.walltime_s > 0.0))
        out.push_back("pilot: walltime_s must be positive");
    return out;
}

/// Slots a task needs on each node of its placement. A GPU task always
/// holds at least one CPU slot for its host process unless
/// `gpu_host_cpu` is off.
struct Demand {
    int nodes = 1;
    int cpus = 0;
    int gpus = 0;

    friend bool operator==(const Demand&, const Demand&) = default;
};

inline Demand make_demand(int cpus, int gpus, int nodes, bool gpu_host_cpu = true) {
    Demand d{nodes, cpus, gpus};
    if (gpu_host_cpu && gpus > 0 && cpus < 1)
        d.cpus = 1;
    return d;
}

inline bool fits_empty_pilot(const Demand& d, const PilotSpec& p) {
    return d.nodes <= p.nodes && d.cpus <= p.cpus_per_node && d.gpus <= p.gpus_per_node;
}

/// Node-equivalents a demand occupies: its dominant resource share of a
/// node, times the node count.
inline double node_share(const Demand& d, const PilotSpec& p) {
    double c = p.cpus_per_node > 0 ? static_cast<double>(d.cpus) / p.cpus_per_node : 0.0;
    double g = p.gpus_per_node > 0 ? static_cast<double>(d.gpus) / p.gpus_per_node : 0.0;
    return d.nodes * std::max(c, g);
}

inline void check_pilot(const PilotSpec& p) {
    auto v = pilot_violations(p);
    if (!v.empty())
        throw ValidationError(v.front());
}

} // namespace ensemble
