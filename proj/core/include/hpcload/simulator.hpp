#pragma once

// Synthetic whole-node-scheduled clusters. A Scenario is a static plan (who
// runs what where, and the envelopes their loads move in); generate_timeline
// walks the loads through that plan and emits one set of cluster-directory
// texts per snapshot interval.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpcload/collectors.hpp"
#include "hpcload/model.hpp"
#include "hpcload/timeutil.hpp"

namespace hpcload {

enum class Preset { healthy, lowgpu, misalloc, threadstorm, mixed };
std::string_view to_string(Preset p);
std::optional<Preset> preset_from(std::string_view token);

struct Envelope {
    double lo = 0.0;
    double hi = 0.0;
};

struct ScenarioConfig {
    std::uint64_t seed = 1;
    int nodes = 16;
    int cores_per_node = 40;
    int gpus_per_node = 2;
    int mem_gb_per_node = 384;
    int users = 4;
    double duration_hours = 24.0;
    double interval_hours = 0.25;
    Preset preset = Preset::healthy;
    Instant start = Instant{std::chrono::sys_days{std::chrono::year{2024} / 3 / 4}};
    std::string cluster_name = "sim";
    /// Replaces the designated user's normalized CPU load envelope.
    std::optional<Envelope> designated_cpu_load;

    /// Throws std::invalid_argument.
    void validate() const;
    std::size_t interval_count() const;
};

/// What one node runs during a phase.
struct NodePlan {
    std::string name;
    std::vector<JobRecord> jobs;  ///< running jobs, all on this node
    Envelope cpu_load;            ///< normalized load
    Envelope gpu_util;            ///< percent, for allocated GPUs
    std::int64_t gpu_mem_used_mb = 0;  ///< per allocated GPU; 0 draws from a default range
    std::int64_t mem_used_mb = 0;      ///< 0 draws from a default range
};

struct Phase {
    std::size_t first_interval = 0;
    std::vector<NodePlan> nodes;  ///< every node of the cluster, sorted by name
};

struct Scenario {
    ScenarioConfig config;
    std::vector<std::string> users;
    std::string designated_user;              ///< empty for healthy
    std::vector<std::string> designated_nodes;
    std::vector<Phase> phases;                ///< ascending first_interval, first is 0
};

inline constexpr std::int64_t kGpuMemoryMb = 65536;

Scenario preset_healthy(const ScenarioConfig& config);
/// The designated user runs one 1-GPU job per node with GPU utilization in
/// [23, 44] %, 2 GB of GPU memory and 63 GB of host memory in use.
Scenario preset_lowgpu(const ScenarioConfig& config);
/// Five jobs of the designated user on c-8-6-[1-5]. The first half of the
/// timeline every job asks for a whole node and one GPU; the second half each
/// asks for half the cores and one GPU, so two share a node and c-8-6-1 keeps one.
Scenario preset_misalloc(const ScenarioConfig& config);
/// One job per designated node with a load of 1.8x to 6x the core count.
Scenario preset_threadstorm(const ScenarioConfig& config);
/// lowgpu, threadstorm and an idle user side by side, plus one shared Jupyter node.
Scenario preset_mixed(const ScenarioConfig& config);

Scenario build_scenario(const ScenarioConfig& config);

std::vector<ClusterFiles> generate_timeline(const Scenario& scenario);
std::vector<ClusterFiles> generate_timeline(const ScenarioConfig& config);

/// One subdirectory per interval, named by its RFC 3339 timestamp.
void write_timeline(const std::filesystem::path& out_dir, const std::vector<ClusterFiles>& timeline);

}  // namespace hpcload
