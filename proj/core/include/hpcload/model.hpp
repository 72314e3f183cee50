#pragma once

// Domain types and the pure utilization math shared by every other module.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hpcload {

enum class NodeState { idle, mixed, alloc, down };
enum class JobType { batch, interactive, jupyter };
enum class JobState { running, pending };

std::string_view to_string(NodeState s);
std::string_view to_string(JobType t);
std::string_view to_string(JobState s);
std::optional<NodeState> node_state_from(std::string_view token);
std::optional<JobType> job_type_from(std::string_view token);
std::optional<JobState> job_state_from(std::string_view token);

/// One compute node as reported by the scheduler. Free counts are always
/// derived (total - used) and never stored.
struct NodeRecord {
    std::string name;
    int cores_total = 0;
    int cores_alloc = 0;
    double load5 = 0.0;  ///< 5-minute load average; may exceed cores_total
    std::int64_t mem_total_mb = 0;
    std::int64_t mem_used_mb = 0;
    int gpus_total = 0;
    int gpus_alloc = 0;
    NodeState state = NodeState::idle;

    friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct GpuRecord {
    std::string node_name;
    int index = 0;
    int util_percent = 0;
    std::int64_t mem_used_mb = 0;
    std::int64_t mem_total_mb = 0;

    friend bool operator==(const GpuRecord&, const GpuRecord&) = default;
};

struct JobRecord {
    std::string job_id;
    std::string user;
    std::string node_name;
    JobType type = JobType::batch;
    int cores_req = 1;
    int gpus_req = 0;
    JobState state = JobState::running;
    std::string name;

    friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

/// Per-(user, node) metric row. Every view and every archived snapshot row is
/// built from this.
struct UserNodeUsage {
    std::string user;
    std::string node_name;
    JobType job_type = JobType::batch;

    int cpu_total = 0;
    int cpu_used = 0;
    int cpu_free = 0;
    double load_norm = 0.0;

    std::int64_t mem_total_gb = 0;
    std::int64_t mem_used_gb = 0;
    std::int64_t mem_free_gb = 0;

    int gpu_total = 0;
    int gpu_used = 0;
    int gpu_free = 0;
    std::optional<double> gpu_load_norm;
    std::optional<std::int64_t> gpu_mem_total_gb;
    std::optional<std::int64_t> gpu_mem_used_gb;
    std::optional<std::int64_t> gpu_mem_free_gb;

    friend bool operator==(const UserNodeUsage&, const UserNodeUsage&) = default;
};

/// Classification cutoffs and snapshot cadence.
struct Thresholds {
    double low = 0.45;
    double high_cpu = 1.65;
    double interval_hours = 0.25;

    /// The over-utilization cutoff written as 1 + (1 - low).
    static Thresholds from_low_formula(double low, double interval_hours = 0.25);

    /// Throws std::invalid_argument unless 0 < low < 1 < high_cpu and interval > 0.
    void validate() const;
    friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

class InvalidNodeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class NoRecommendationError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

double normalize_cpu_load(double load5, int cores_total);

/// Mean utilization over the GPUs, on a 0..1 scale. Empty input gives nullopt.
std::optional<double> normalize_gpu_load(std::span<const GpuRecord> gpus);

/// Whole GB for display: used values are floored, totals rounded half-up.
std::int64_t mb_to_gb_floor(std::int64_t mb);
std::int64_t mb_to_gb_round(std::int64_t mb);

struct NodeAggregation {
    std::vector<UserNodeUsage> rows;     ///< one per user with running jobs, sorted by user
    std::vector<std::string> warnings;   ///< whole-node policy violations
};

/// True when every running job on the node belongs to the shared (jupyter or
/// interactive/debug) pools, where several users may legitimately co-reside.
bool is_shared_node(std::span<const JobRecord> jobs_on_node);

/// Builds the per-user rows for one node. `jobs` may contain jobs for other
/// nodes and pending jobs; both are ignored. GPU indices are handed out to
/// running jobs in job-id order, each job taking its gpus_req next indices.
NodeAggregation aggregate_user_node(const NodeRecord& node, std::span<const JobRecord> jobs,
                                    std::span<const GpuRecord> gpus);

enum class Category { low_gpu, low_cpu, high_cpu };
inline constexpr Category kAllCategories[] = {Category::low_gpu, Category::low_cpu,
                                              Category::high_cpu};
std::string_view to_string(Category c);
std::optional<Category> category_from(std::string_view token);

struct LoadFlags {
    bool low_gpu = false;
    bool low_cpu = false;
    bool high_cpu = false;

    bool has(Category c) const;
    bool any() const { return low_gpu || low_cpu || high_cpu; }
    friend bool operator==(const LoadFlags&, const LoadFlags&) = default;
};

LoadFlags classify_load(const UserNodeUsage& usage, const Thresholds& t);

enum class LimitingFactor { gpu_load, gpu_memory, cpu_cores, cpu_memory };
std::string_view to_string(LimitingFactor f);

struct NppnRecommendation {
    int nppn = 1;
    LimitingFactor limiting_factor = LimitingFactor::gpu_load;
};

/// Suggests how many copies of the observed job fit on one node.
///
/// The row is assumed to be produced by `current_nppn` identical jobs, so the
/// per-job footprint is the row's usage divided by current_nppn. Four
/// capacities are compared against that footprint:
///   gpu_load    node GPUs / per-job GPU-equivalents busy (gpu_load_norm * gpu_used)
///   gpu_memory  node GPU memory / per-job GPU memory
///   cpu_cores   node cores / per-job busy cores (load_norm * cpu_total)
///   cpu_memory  node memory / per-job memory
/// Each ratio is floored and the smallest wins. Factors with no footprint are
/// skipped. The answer is clamped to at least one; a value below current_nppn
/// means the node is already overcommitted.
NppnRecommendation recommend_nppn(const UserNodeUsage& usage, int current_nppn);

/// Orders job ids numerically when both are all digits, else lexicographically.
bool job_id_less(std::string_view a, std::string_view b);

}  // namespace hpcload
