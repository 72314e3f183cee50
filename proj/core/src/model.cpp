#include "hpcload/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

namespace hpcload {

std::string_view to_string(NodeState s) {
    switch (s) {
        case NodeState::idle: return "idle";
        case NodeState::mixed: return "mixed";
        case NodeState::alloc: return "alloc";
        case NodeState::down: return "down";
    }
    return "?";
}

std::string_view to_string(JobType t) {
    switch (t) {
        case JobType::batch: return "batch";
        case JobType::interactive: return "interactive";
        case JobType::jupyter: return "jupyter";
    }
    return "?";
}

std::string_view to_string(JobState s) {
    return s == JobState::running ? "running" : "pending";
}

std::optional<NodeState> node_state_from(std::string_view token) {
    for (auto s : {NodeState::idle, NodeState::mixed, NodeState::alloc, NodeState::down}) {
        if (token == to_string(s)) return s;
    }
    return std::nullopt;
}

std::optional<JobType> job_type_from(std::string_view token) {
    for (auto t : {JobType::batch, JobType::interactive, JobType::jupyter}) {
        if (token == to_string(t)) return t;
    }
    return std::nullopt;
}

std::optional<JobState> job_state_from(std::string_view token) {
    if (token == "running") return JobState::running;
    if (token == "pending") return JobState::pending;
    return std::nullopt;
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::low_gpu: return "low_gpu";
        case Category::low_cpu: return "low_cpu";
        case Category::high_cpu: return "high_cpu";
    }
    return "?";
}

std::optional<Category> category_from(std::string_view token) {
    for (auto c : kAllCategories) {
        if (token == to_string(c)) return c;
    }
    return std::nullopt;
}

std::string_view to_string(LimitingFactor f) {
    switch (f) {
        case LimitingFactor::gpu_load: return "gpu_load";
        case LimitingFactor::gpu_memory: return "gpu_memory";
        case LimitingFactor::cpu_cores: return "cpu_cores";
        case LimitingFactor::cpu_memory: return "cpu_memory";
    }
    return "?";
}

Thresholds Thresholds::from_low_formula(double low, double interval_hours) {
    Thresholds t;
    t.low = low;
    t.high_cpu = 1.0 + (1.0 - low);
    t.interval_hours = interval_hours;
    t.validate();
    return t;
}

void Thresholds::validate() const {
    if (!(low > 0.0 && low < 1.0)) {
        throw std::invalid_argument(fmt::format("low threshold {} outside (0,1)", low));
    }
    if (!(high_cpu > 1.0)) {
        throw std::invalid_argument(fmt::format("high threshold {} must exceed 1", high_cpu));
    }
    if (!(interval_hours > 0.0)) {
        throw std::invalid_argument("snapshot interval must be positive");
    }
}

double normalize_cpu_load(double load5, int cores_total) {
    if (cores_total <= 0) {
        throw InvalidNodeError(fmt::format("node reports {} cores", cores_total));
    }
    if (!(load5 >= 0.0)) {
        throw std::invalid_argument(fmt::format("negative load average {}", load5));
    }
    return load5 / static_cast<double>(cores_total);
}

std::optional<double> normalize_gpu_load(std::span<const GpuRecord> gpus) {
    if (gpus.empty()) return std::nullopt;
    long long sum = 0;
    for (const auto& g : gpus) sum += g.util_percent;
    return static_cast<double>(sum) / (100.0 * static_cast<double>(gpus.size()));
}

std::int64_t mb_to_gb_floor(std::int64_t mb) { return mb / 1024; }

std::int64_t mb_to_gb_round(std::int64_t mb) { return (mb + 512) / 1024; }

bool job_id_less(std::string_view a, std::string_view b) {
    auto digits = [](std::string_view s) {
        return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (digits(a) && digits(b) && a.size() != b.size()) return a.size() < b.size();
    return a < b;
}

bool is_shared_node(std::span<const JobRecord> jobs_on_node) {
    bool any = false;
    for (const auto& j : jobs_on_node) {
        if (j.state != JobState::running) continue;
        any = true;
        if (j.type == JobType::batch) return false;
    }
    return any;
}

NodeAggregation aggregate_user_node(const NodeRecord& node, std::span<const JobRecord> jobs,
                                    std::span<const GpuRecord> gpus) {
    NodeAggregation out;
    const double load_norm = normalize_cpu_load(node.load5, node.cores_total);

    std::vector<const JobRecord*> running;
    for (const auto& j : jobs) {
        if (j.state == JobState::running && j.node_name == node.name) running.push_back(&j);
    }
    if (running.empty()) return out;
    std::sort(running.begin(), running.end(), [](const JobRecord* a, const JobRecord* b) {
        return job_id_less(a->job_id, b->job_id);
    });

    // Index universe: every index the query reported plus the inventory count,
    // so a stale or partial GPU query still yields correct allocation counts.
    std::set<int> universe;
    for (int i = 0; i < node.gpus_total; ++i) universe.insert(i);
    std::map<int, const GpuRecord*> by_index;
    for (const auto& g : gpus) {
        if (g.node_name != node.name && !g.node_name.empty()) continue;
        universe.insert(g.index);
        by_index.emplace(g.index, &g);
    }

    struct Acc {
        long long cores = 0;
        std::vector<int> gpu_indices;
        JobType type = JobType::batch;
    };
    std::map<std::string, Acc> per_user;
    auto next_gpu = universe.begin();
    for (const JobRecord* j : running) {
        Acc& acc = per_user[j->user];
        acc.cores += j->cores_req;
        if (j->type == JobType::jupyter ||
            (j->type == JobType::interactive && acc.type == JobType::batch)) {
            acc.type = j->type;
        }
        for (int k = 0; k < j->gpus_req && next_gpu != universe.end(); ++k, ++next_gpu) {
            acc.gpu_indices.push_back(*next_gpu);
        }
    }

    const bool shared = std::all_of(running.begin(), running.end(), [](const JobRecord* j) {
        return j->type != JobType::batch;
    });
    if (per_user.size() > 1 && !shared) {
        std::string users;
        for (const auto& [u, _] : per_user) users += (users.empty() ? "" : ",") + u;
        out.warnings.push_back(fmt::format(
            "whole-node policy violation on {}: jobs from users {}", node.name, users));
    }

    for (const auto& [user, acc] : per_user) {
        UserNodeUsage u;
        u.user = user;
        u.node_name = node.name;
        u.job_type = acc.type;

        u.cpu_total = node.cores_total;
        u.cpu_used = static_cast<int>(std::min<long long>(acc.cores, node.cores_total));
        u.cpu_free = u.cpu_total - u.cpu_used;
        u.load_norm = load_norm;

        u.mem_total_gb = mb_to_gb_round(node.mem_total_mb);
        u.mem_used_gb = std::min(mb_to_gb_floor(node.mem_used_mb), u.mem_total_gb);
        u.mem_free_gb = u.mem_total_gb - u.mem_used_gb;

        u.gpu_total = node.gpus_total;
        u.gpu_used = std::min(static_cast<int>(acc.gpu_indices.size()), node.gpus_total);
        u.gpu_free = u.gpu_total - u.gpu_used;

        std::vector<GpuRecord> mine;
        for (int idx : acc.gpu_indices) {
            if (auto it = by_index.find(idx); it != by_index.end()) mine.push_back(*it->second);
        }
        if (u.gpu_total > 0 && !mine.empty()) {
            u.gpu_load_norm = normalize_gpu_load(mine);
            std::int64_t total_mb = 0, used_mb = 0;
            for (const auto& g : mine) {
                total_mb += g.mem_total_mb;
                used_mb += g.mem_used_mb;
            }
            const auto total = mb_to_gb_round(total_mb);
            const auto used = std::min(mb_to_gb_floor(used_mb), total);
            u.gpu_mem_total_gb = total;
            u.gpu_mem_used_gb = used;
            u.gpu_mem_free_gb = total - used;
        }
        out.rows.push_back(std::move(u));
    }
    return out;
}

bool LoadFlags::has(Category c) const {
    switch (c) {
        case Category::low_gpu: return low_gpu;
        case Category::low_cpu: return low_cpu;
        case Category::high_cpu: return high_cpu;
    }
    return false;
}

LoadFlags classify_load(const UserNodeUsage& usage, const Thresholds& t) {
    LoadFlags f;
    f.low_cpu = usage.load_norm < t.low;
    f.high_cpu = usage.load_norm > t.high_cpu;
    f.low_gpu = usage.gpu_total > 0 && usage.gpu_load_norm && *usage.gpu_load_norm < t.low;
    return f;
}

NppnRecommendation recommend_nppn(const UserNodeUsage& usage, int current_nppn) {
    if (current_nppn < 1) throw std::invalid_argument("current NPPN must be at least 1");
    const double jobs = current_nppn;
    // Ratios that land on an integer can come out a few ulps short.
    constexpr double kSlack = 1e-9;

    double best = std::numeric_limits<double>::infinity();
    LimitingFactor limiting = LimitingFactor::gpu_load;
    auto consider = [&](LimitingFactor f, double capacity, double per_job) {
        if (!(per_job > 0.0) || !(capacity > 0.0)) return;
        const double fit = std::floor(capacity / per_job + kSlack);
        if (fit < best) {
            best = fit;
            limiting = f;
        }
    };

    if (usage.gpu_total > 0 && usage.gpu_used > 0) {
        if (usage.gpu_load_norm) {
            consider(LimitingFactor::gpu_load, usage.gpu_total,
                     *usage.gpu_load_norm * usage.gpu_used / jobs);
        }
        if (usage.gpu_mem_total_gb && usage.gpu_mem_used_gb) {
            const double node_gpu_mem = static_cast<double>(*usage.gpu_mem_total_gb) *
                                        usage.gpu_total / usage.gpu_used;
            consider(LimitingFactor::gpu_memory, node_gpu_mem,
                     static_cast<double>(*usage.gpu_mem_used_gb) / jobs);
        }
    }
    consider(LimitingFactor::cpu_cores, usage.cpu_total, usage.load_norm * usage.cpu_total / jobs);
    consider(LimitingFactor::cpu_memory, static_cast<double>(usage.mem_total_gb),
             static_cast<double>(usage.mem_used_gb) / jobs);

    if (!std::isfinite(best)) {
        throw NoRecommendationError(fmt::format(
            "no measurable footprint for {} on {}", usage.user, usage.node_name));
    }
    return {std::max(1, static_cast<int>(best)), limiting};
}

}  // namespace hpcload
