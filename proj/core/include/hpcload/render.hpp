#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpcload/collectors.hpp"

namespace hpcload {

/// Loads are always shown with two decimals.
std::string format_load(double v);

/// The value a load takes after a trip through its two-decimal text form.
double quantize_load(double v);

/// NODE, CPU(U/F/T), LOAD, MEM_GB(U/F/T) [, GPU(U/F/T), GPULOAD, GPUMEM_GB(U/F/T)],
/// one row per node the user occupies plus a TOTAL row.
std::string render_user_view(const ClusterView& view, std::string_view user, bool gpu);

/// Jupyter summary first, then one "USER <name> <email>" block per user.
std::string render_all_view(const ClusterView& view, bool gpu);

/// The n nodes with the highest normalized load, all users, highest first.
std::string render_top_view(const ClusterView& view, int n);

/// Node inventory and job listing for each requested node in the given order.
/// When `viewer` is set, job names of other users are replaced by "(hidden)".
struct NodesViewResult {
    std::string text;
    std::size_t unknown = 0;
};
NodesViewResult render_nodes_view(const ClusterView& view, const std::vector<std::string>& nodelist,
                                  bool gpu, const std::optional<std::string>& viewer = std::nullopt);

inline constexpr std::string_view kTsvHeader =
    "ts\tcluster\tuser\tnode\tjobtype\tcpu_total\tcpu_used\tcpu_free\tload_norm\t"
    "mem_total_gb\tmem_used_gb\tmem_free_gb\tgpu_total\tgpu_used\tgpu_free\tgpu_load_norm\t"
    "gpu_mem_total_gb\tgpu_mem_used_gb\tgpu_mem_free_gb";

/// One row per (user, node). `user` restricts the rows to one user; nullopt
/// means every user. Without `gpu` the seven GPU columns are all "-". On a
/// node without GPUs gpu_total is 0 and the six GPU columns after it are "-".
std::string render_tsv(const ClusterView& view, const std::optional<std::string>& user, bool gpu);

/// Expands "c-8-6-[1-3],c-9-1-1" style host lists. Zero padding inside a
/// range is preserved ("n[08-10]" -> n08 n09 n10). Throws std::invalid_argument.
std::vector<std::string> expand_nodelist(std::string_view hostlist);

}  // namespace hpcload
