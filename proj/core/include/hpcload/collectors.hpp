#pragma once

// Scheduler-format inputs and the assembled cluster view.
//
// Text formats (one record per line, '\n' terminated):
//   nodes.txt        NODE|CORES_TOTAL|CORES_ALLOC|LOAD5|MEM_TOTAL_MB|MEM_USED_MB|GPUS_TOTAL|GPUS_ALLOC|STATE
//   jobs.txt         JOBID|USER|NODE|JOBTYPE|CORES|GPUS|STATE|NAME
//   gpu/<node>.csv   index,util,mem_used_mb,mem_total_mb   (no header)
//   users.tsv        user<TAB>email, '#' comments
//   cluster.tsv      cluster<TAB>name / timestamp<TAB>RFC3339   (optional)

#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hpcload/model.hpp"
#include "hpcload/timeutil.hpp"

namespace hpcload {

inline constexpr std::string_view kNodeTableHeader =
    "NODE|CORES_TOTAL|CORES_ALLOC|LOAD5|MEM_TOTAL_MB|MEM_USED_MB|GPUS_TOTAL|GPUS_ALLOC|STATE";
inline constexpr std::string_view kJobTableHeader = "JOBID|USER|NODE|JOBTYPE|CORES|GPUS|STATE|NAME";

class ParseError : public std::runtime_error {
  public:
    ParseError(std::string source, std::size_t line, const std::string& what);
    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

  private:
    std::string source_;
    std::size_t line_;
};

class AssemblyError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct UserTable {
    std::map<std::string, std::string> entries;  ///< user -> email
    std::vector<std::string> warnings;

    const std::string* email_of(std::string_view user) const;
};

std::vector<NodeRecord> parse_node_table(std::string_view text);
std::vector<JobRecord> parse_job_table(std::string_view text);
std::vector<GpuRecord> parse_gpu_csv(std::string_view node_name, std::string_view text);
UserTable load_user_table(std::string_view text);

std::string emit_node_table(const std::vector<NodeRecord>& nodes);
std::string emit_job_table(const std::vector<JobRecord>& jobs);
std::string emit_gpu_csv(const std::vector<GpuRecord>& gpus);
std::string emit_user_table(const std::map<std::string, std::string>& entries);

struct ClusterView {
    Instant timestamp{};
    std::string cluster_name;
    std::vector<NodeRecord> nodes;       ///< sorted by name
    std::vector<JobRecord> jobs;         ///< sorted by (node, job id)
    std::vector<GpuRecord> gpu_records;  ///< sorted by (node, index)
    std::map<std::string, std::string> user_table;
    std::set<std::string> stale_gpu_nodes;  ///< GPU nodes whose query text was missing
    std::vector<std::string> warnings;

    const NodeRecord* find_node(std::string_view name) const;
    friend bool operator==(const ClusterView&, const ClusterView&) = default;
};

/// Cross-checks the parsed tables and parses the per-node GPU texts serially
/// in node-name order. Throws AssemblyError if a running job names a node that
/// is not in the node table.
ClusterView assemble_cluster_view(std::vector<NodeRecord> nodes, std::vector<JobRecord> jobs,
                                  const std::map<std::string, std::string>& gpu_texts,
                                  const UserTable& user_table, Instant timestamp,
                                  std::string cluster_name = "cluster");

struct UsageTable {
    std::vector<UserNodeUsage> rows;  ///< sorted by (user, node)
    std::vector<std::string> warnings;
};

/// Aggregates every occupied node of the view.
UsageTable collect_usage(const ClusterView& view);

/// Raw texts of one cluster directory.
struct ClusterFiles {
    std::string cluster_name;
    Instant timestamp{};
    std::string nodes;
    std::string jobs;
    std::map<std::string, std::string> gpu;  ///< node -> csv text
    std::string users;
    std::string privileges;

    friend bool operator==(const ClusterFiles&, const ClusterFiles&) = default;
};

std::string emit_cluster_meta(std::string_view cluster_name, Instant timestamp);

/// Writes the files of a cluster directory (creating it). Existing files are replaced.
void write_cluster_files(const std::filesystem::path& dir, const ClusterFiles& files);

/// Reads a cluster directory. Missing cluster.tsv falls back to the
/// directory name and the current time. Throws std::runtime_error when the
/// node or job table is missing.
ClusterFiles read_cluster_files(const std::filesystem::path& dir);

ClusterView assemble_from_files(const ClusterFiles& files);

}  // namespace hpcload
