#include "hpcload/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

namespace hpcload {

namespace {

constexpr Envelope kHealthyCpu{0.70, 1.00};
constexpr Envelope kHealthyGpu{70.0, 95.0};
constexpr Envelope kIdleCpu{0.00, 0.02};
constexpr Envelope kLowGpuUtil{23.0, 44.0};
constexpr Envelope kLowGpuCpu{0.05, 0.20};
constexpr Envelope kMisallocGpuBefore{8.0, 25.0};
constexpr Envelope kMisallocGpuAfter{20.0, 44.0};
constexpr Envelope kMisallocCpuBefore{0.05, 0.15};
constexpr Envelope kMisallocCpuAfter{0.10, 0.30};
constexpr Envelope kThreadstormCpu{1.8, 6.0};
constexpr Envelope kIdleUserCpu{0.02, 0.20};
constexpr Envelope kJupyterCpu{0.05, 0.30};
constexpr Envelope kJupyterGpu{5.0, 60.0};
constexpr double kWalkStep = 0.15;  // fraction of the envelope width per interval
constexpr int kFirstJobId = 100000;

// The engine's output sequence is fixed by the standard; the mapping to
// doubles is done here rather than through <random> distributions, whose
// algorithms vary between standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(const Envelope& e) { return e.lo + (e.hi - e.lo) * unit(); }

  private:
    std::mt19937_64 engine_;
};

std::string generic_node_name(int i) {
    return fmt::format("c-{}-{}-{}", 1 + i / 32, 1 + (i / 8) % 4, 1 + i % 8);
}

std::vector<std::string> make_users(int n) {
    static constexpr const char* kNames[] = {"amara", "bruno", "chen",  "dasha", "emeka", "farah", "goran",
                                             "hana",  "ivan",  "jin",   "kofi",  "lena",  "mateo", "nadia",
                                             "omar",  "priya", "quinn", "rosa",  "sven",  "tariq", "uma",
                                             "viktor", "wren", "xenia", "yusuf", "zoe"};
    constexpr int kCount = static_cast<int>(std::size(kNames));
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(i < kCount ? std::string(kNames[i]) : fmt::format("{}{}", kNames[i % kCount], i / kCount));
    }
    return out;
}

class PlanBuilder {
  public:
    explicit PlanBuilder(const ScenarioConfig& config) : config_(config) {}

    JobRecord job(const std::string& user, const std::string& node, JobType type, int cores, int gpus,
                  std::string name) {
        return JobRecord{std::to_string(next_id_++), user, node, type, std::max(1, cores), gpus,
                         JobState::running, std::move(name)};
    }

    NodePlan healthy(const std::string& node, const std::string& user, int slot) {
        NodePlan p{node, {}, kHealthyCpu, kHealthyGpu, 0, 0};
        const int gpus = config_.gpus_per_node;
        if (slot % 2 == 0 || config_.cores_per_node < 2) {
            p.jobs.push_back(job(user, node, JobType::batch, config_.cores_per_node, gpus, "sim"));
        } else {
            const int half = config_.cores_per_node / 2;
            p.jobs.push_back(job(user, node, JobType::batch, half, gpus / 2, "sweep"));
            p.jobs.push_back(job(user, node, JobType::batch, config_.cores_per_node - half, gpus - gpus / 2, "sweep"));
        }
        return p;
    }

    static NodePlan idle(const std::string& node) { return NodePlan{node, {}, kIdleCpu, kHealthyGpu, 0, 0}; }

    const ScenarioConfig& config() const { return config_; }

  private:
    const ScenarioConfig& config_;
    int next_id_ = kFirstJobId;
};

Envelope designated_cpu(const ScenarioConfig& c, Envelope fallback) {
    return c.designated_cpu_load.value_or(fallback);
}

// Gives the remaining node names to `others` round-robin, or leaves them idle.
void fill_healthy(PlanBuilder& b, std::vector<NodePlan>& plans, const std::vector<std::string>& names,
                  const std::vector<std::string>& others) {
    for (std::size_t i = 0; i < names.size(); ++i) {
        plans.push_back(others.empty() ? PlanBuilder::idle(names[i])
                                       : b.healthy(names[i], others[i % others.size()], static_cast<int>(i)));
    }
}

void sort_plans(std::vector<NodePlan>& plans) {
    std::sort(plans.begin(), plans.end(), [](const NodePlan& a, const NodePlan& b) { return a.name < b.name; });
}

Scenario base_scenario(const ScenarioConfig& config) {
    config.validate();
    Scenario s;
    s.config = config;
    s.users = make_users(config.users);
    return s;
}

std::vector<std::string> generic_names(int from, int count) {
    std::vector<std::string> out;
    for (int i = from; i < from + count; ++i) out.push_back(generic_node_name(i));
    return out;
}

}  // namespace

std::string_view to_string(Preset p) {
    switch (p) {
        case Preset::healthy: return "healthy";
        case Preset::lowgpu: return "lowgpu";
        case Preset::misalloc: return "misalloc";
        case Preset::threadstorm: return "threadstorm";
        case Preset::mixed: return "mixed";
    }
    return "?";
}

std::optional<Preset> preset_from(std::string_view token) {
    for (auto p : {Preset::healthy, Preset::lowgpu, Preset::misalloc, Preset::threadstorm, Preset::mixed}) {
        if (token == to_string(p)) return p;
    }
    return std::nullopt;
}

std::size_t ScenarioConfig::interval_count() const {
    return static_cast<std::size_t>(std::llround(duration_hours / interval_hours));
}

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument("scenario: " + what); };
    if (nodes < 1 || cores_per_node < 1 || mem_gb_per_node < 1 || users < 1) fail("counts must be at least 1");
    if (gpus_per_node < 0) fail("negative GPU count");
    if (!(interval_hours > 0.0) || !(duration_hours > 0.0)) fail("duration and interval must be positive");
    const double minutes = interval_hours * 60.0;
    if (std::fabs(minutes - std::round(minutes)) > 1e-9) fail("interval must be a whole number of minutes");
    const double steps = duration_hours / interval_hours;
    if (std::fabs(steps - std::round(steps)) > 1e-9) fail("interval must divide the duration");
    if (designated_cpu_load && !(designated_cpu_load->lo >= 0.0 && designated_cpu_load->lo <= designated_cpu_load->hi)) {
        fail("bad CPU load envelope");
    }
    switch (preset) {
        case Preset::lowgpu:
            if (gpus_per_node < 1) fail("lowgpu needs GPU nodes");
            break;
        case Preset::misalloc:
            if (nodes < 5 || gpus_per_node < 2 || cores_per_node < 2) {
                fail("misalloc needs at least 5 nodes with 2 GPUs and 2 cores");
            }
            break;
        case Preset::mixed:
            if (users < 3 || nodes < 4) fail("mixed needs at least 3 users and 4 nodes");
            break;
        default:
            break;
    }
}

Scenario preset_healthy(const ScenarioConfig& config) {
    Scenario s = base_scenario(config);
    PlanBuilder b(s.config);
    Phase phase;
    fill_healthy(b, phase.nodes, generic_names(0, config.nodes), s.users);
    sort_plans(phase.nodes);
    s.phases.push_back(std::move(phase));
    return s;
}

Scenario preset_lowgpu(const ScenarioConfig& config) {
    Scenario s = base_scenario(config);
    PlanBuilder b(s.config);
    s.designated_user = s.users.front();
    const int designated = std::max(1, config.nodes / 4);
    const auto names = generic_names(0, config.nodes);

    Phase phase;
    const std::int64_t mem_total_mb = std::int64_t{config.mem_gb_per_node} * 1024;
    for (int i = 0; i < designated; ++i) {
        NodePlan p{names[i], {}, designated_cpu(config, kLowGpuCpu), kLowGpuUtil, 2048,
                   std::min<std::int64_t>(64512, mem_total_mb)};
        p.jobs.push_back(b.job(s.designated_user, names[i], JobType::batch, std::max(1, config.cores_per_node / 2), 1,
                               "train"));
        s.designated_nodes.push_back(names[i]);
        phase.nodes.push_back(std::move(p));
    }
    fill_healthy(b, phase.nodes, {names.begin() + designated, names.end()}, {s.users.begin() + 1, s.users.end()});
    sort_plans(phase.nodes);
    s.phases.push_back(std::move(phase));
    return s;
}

Scenario preset_misalloc(const ScenarioConfig& config) {
    Scenario s = base_scenario(config);
    PlanBuilder b(s.config);
    s.designated_user = s.users.front();
    const auto& user = s.designated_user;
    for (int i = 1; i <= 5; ++i) s.designated_nodes.push_back(fmt::format("c-8-6-{}", i));
    const auto others = generic_names(0, config.nodes - 5);
    const std::vector<std::string> other_users(s.users.begin() + 1, s.users.end());

    // Whole-node requests: one job, one GPU per node.
    Phase before;
    for (const auto& node : s.designated_nodes) {
        NodePlan p{node, {}, designated_cpu(config, kMisallocCpuBefore), kMisallocGpuBefore, 0, 0};
        p.jobs.push_back(b.job(user, node, JobType::batch, config.cores_per_node, 1, "train"));
        before.nodes.push_back(std::move(p));
    }
    PlanBuilder other_builder = b;
    fill_healthy(b, before.nodes, others, other_users);
    sort_plans(before.nodes);

    // Half-node requests: the same five jobs pack two per node.
    Phase after;
    after.first_interval = config.interval_count() / 2;
    const int half = config.cores_per_node / 2;
    const int per_node[] = {1, 2, 2, 0, 0};
    for (std::size_t n = 0; n < 5; ++n) {
        const auto& node = s.designated_nodes[n];
        if (per_node[n] == 0) {
            after.nodes.push_back(PlanBuilder::idle(node));
            continue;
        }
        NodePlan p{node, {}, designated_cpu(config, kMisallocCpuAfter), kMisallocGpuAfter, 0, 0};
        for (int k = 0; k < per_node[n]; ++k) p.jobs.push_back(b.job(user, node, JobType::batch, half, 1, "train"));
        after.nodes.push_back(std::move(p));
    }
    // Other users keep their jobs across the change.
    fill_healthy(other_builder, after.nodes, others, other_users);
    sort_plans(after.nodes);

    s.phases.push_back(std::move(before));
    if (after.first_interval > 0) s.phases.push_back(std::move(after));
    return s;
}

Scenario preset_threadstorm(const ScenarioConfig& config) {
    Scenario s = base_scenario(config);
    PlanBuilder b(s.config);
    s.designated_user = s.users.front();
    const int designated = std::max(1, config.nodes / 8);
    const auto names = generic_names(0, config.nodes);

    Phase phase;
    for (int i = 0; i < designated; ++i) {
        NodePlan p{names[i], {}, designated_cpu(config, kThreadstormCpu), kHealthyGpu, 0, 0};
        p.jobs.push_back(b.job(s.designated_user, names[i], JobType::batch, config.cores_per_node, 0, "mp_writer"));
        s.designated_nodes.push_back(names[i]);
        phase.nodes.push_back(std::move(p));
    }
    fill_healthy(b, phase.nodes, {names.begin() + designated, names.end()}, {s.users.begin() + 1, s.users.end()});
    sort_plans(phase.nodes);
    s.phases.push_back(std::move(phase));
    return s;
}

Scenario preset_mixed(const ScenarioConfig& config) {
    Scenario s = base_scenario(config);
    PlanBuilder b(s.config);
    s.designated_user = s.users.front();
    const int group = std::max(1, config.nodes / 8);
    const auto names = generic_names(0, config.nodes);
    const std::int64_t mem_total_mb = std::int64_t{config.mem_gb_per_node} * 1024;
    const bool gpus = config.gpus_per_node > 0;

    Phase phase;
    int next = 0;
    for (int i = 0; i < group && next < config.nodes - 1; ++i, ++next) {
        NodePlan p{names[next], {}, designated_cpu(config, kLowGpuCpu), kLowGpuUtil, 2048,
                   std::min<std::int64_t>(64512, mem_total_mb)};
        p.jobs.push_back(b.job(s.users[0], names[next], JobType::batch, config.cores_per_node / 2, gpus ? 1 : 0, "train"));
        s.designated_nodes.push_back(names[next]);
        phase.nodes.push_back(std::move(p));
    }
    for (int i = 0; i < group && next < config.nodes - 1; ++i, ++next) {
        NodePlan p{names[next], {}, kThreadstormCpu, kHealthyGpu, 0, 0};
        p.jobs.push_back(b.job(s.users[1], names[next], JobType::batch, config.cores_per_node, 0, "mp_writer"));
        phase.nodes.push_back(std::move(p));
    }
    for (int i = 0; i < group && next < config.nodes - 1; ++i, ++next) {
        NodePlan p{names[next], {}, kIdleUserCpu, kHealthyGpu, 0, 0};
        p.jobs.push_back(b.job(s.users[2], names[next], JobType::batch, config.cores_per_node, 0, "postproc"));
        phase.nodes.push_back(std::move(p));
    }
    {
        const auto& node = names[next++];
        NodePlan p{node, {}, kJupyterCpu, kJupyterGpu, 0, 0};
        for (int u = 0; u < 3; ++u) {
            p.jobs.push_back(b.job(s.users[u], node, JobType::jupyter, std::min(4, config.cores_per_node),
                                   (u == 0 && gpus) ? 1 : 0, "notebook"));
        }
        phase.nodes.push_back(std::move(p));
    }
    fill_healthy(b, phase.nodes, {names.begin() + next, names.end()}, {s.users.begin() + 3, s.users.end()});
    sort_plans(phase.nodes);
    s.phases.push_back(std::move(phase));
    return s;
}

Scenario build_scenario(const ScenarioConfig& config) {
    switch (config.preset) {
        case Preset::healthy: return preset_healthy(config);
        case Preset::lowgpu: return preset_lowgpu(config);
        case Preset::misalloc: return preset_misalloc(config);
        case Preset::threadstorm: return preset_threadstorm(config);
        case Preset::mixed: return preset_mixed(config);
    }
    throw std::invalid_argument("unknown preset");
}

namespace {

struct WalkState {
    double cpu = 0.0;
    std::vector<double> gpu_util;
    std::vector<std::int64_t> gpu_mem_mb;
    std::int64_t mem_used_mb = 0;
};

int allocated_gpus(const NodePlan& p, int gpus_total) {
    int sum = 0;
    for (const auto& j : p.jobs) sum += j.gpus_req;
    return std::min(sum, gpus_total);
}

WalkState init_state(const NodePlan& p, const ScenarioConfig& c, Rng& rng) {
    WalkState st;
    st.cpu = rng.uniform(p.cpu_load);
    const int alloc = allocated_gpus(p, c.gpus_per_node);
    for (int g = 0; g < alloc; ++g) {
        st.gpu_util.push_back(rng.uniform(p.gpu_util));
        const double gb = rng.uniform({8.0, 48.0});
        st.gpu_mem_mb.push_back(p.gpu_mem_used_mb > 0 ? p.gpu_mem_used_mb
                                                      : static_cast<std::int64_t>(gb * 1024.0));
    }
    const std::int64_t total_mb = std::int64_t{c.mem_gb_per_node} * 1024;
    const double frac = rng.uniform({0.25, 0.83});
    if (p.jobs.empty()) {
        st.mem_used_mb = std::min<std::int64_t>(total_mb, 2048);
    } else {
        st.mem_used_mb = p.mem_used_mb > 0 ? std::min(p.mem_used_mb, total_mb)
                                           : static_cast<std::int64_t>(frac * static_cast<double>(total_mb));
    }
    return st;
}

double walk(double v, const Envelope& e, Rng& rng) {
    const double step = (rng.unit() * 2.0 - 1.0) * kWalkStep * (e.hi - e.lo);
    return std::clamp(v + step, e.lo, e.hi);
}

void step_state(WalkState& st, const NodePlan& p, Rng& rng) {
    st.cpu = walk(st.cpu, p.cpu_load, rng);
    for (auto& u : st.gpu_util) u = walk(u, p.gpu_util, rng);
}

// Two-decimal load average whose normalized value stays inside the envelope.
double emitted_load5(double load_norm, const Envelope& e, int cores) {
    const double lo = std::ceil(e.lo * cores * 100.0 - 1e-6) / 100.0;
    const double hi = std::floor(e.hi * cores * 100.0 + 1e-6) / 100.0;
    const double v = std::round(load_norm * cores * 100.0) / 100.0;
    return std::clamp(v, lo, std::max(lo, hi));
}

ClusterFiles emit_interval(const Scenario& s, const Phase& phase, const std::vector<WalkState>& states,
                           Instant ts, const std::string& users_text) {
    const auto& c = s.config;
    ClusterFiles files;
    files.cluster_name = c.cluster_name;
    files.timestamp = ts;
    files.users = users_text;
    files.privileges = "# users allowed to run hpcload --all\nadmin\n";

    std::vector<NodeRecord> nodes;
    std::vector<JobRecord> jobs;
    for (std::size_t i = 0; i < phase.nodes.size(); ++i) {
        const auto& p = phase.nodes[i];
        const auto& st = states[i];
        NodeRecord r;
        r.name = p.name;
        r.cores_total = c.cores_per_node;
        long long cores = 0;
        for (const auto& j : p.jobs) cores += j.cores_req;
        r.cores_alloc = static_cast<int>(std::min<long long>(cores, c.cores_per_node));
        r.load5 = emitted_load5(st.cpu, p.cpu_load, c.cores_per_node);
        r.mem_total_mb = std::int64_t{c.mem_gb_per_node} * 1024;
        r.mem_used_mb = st.mem_used_mb;
        r.gpus_total = c.gpus_per_node;
        r.gpus_alloc = allocated_gpus(p, c.gpus_per_node);
        r.state = p.jobs.empty() ? NodeState::idle
                                 : (r.cores_alloc >= r.cores_total ? NodeState::alloc : NodeState::mixed);
        nodes.push_back(r);
        jobs.insert(jobs.end(), p.jobs.begin(), p.jobs.end());

        if (c.gpus_per_node > 0) {
            std::vector<GpuRecord> gpus;
            for (int g = 0; g < c.gpus_per_node; ++g) {
                const bool busy = g < static_cast<int>(st.gpu_util.size());
                gpus.push_back(GpuRecord{p.name, g, busy ? static_cast<int>(std::lround(st.gpu_util[g])) : 0,
                                         busy ? st.gpu_mem_mb[g] : 0, kGpuMemoryMb});
            }
            files.gpu.emplace(p.name, emit_gpu_csv(gpus));
        }
    }
    files.nodes = emit_node_table(nodes);
    files.jobs = emit_job_table(jobs);
    return files;
}

}  // namespace

std::vector<ClusterFiles> generate_timeline(const Scenario& scenario) {
    const auto& c = scenario.config;
    c.validate();
    const auto interval = interval_from_hours(c.interval_hours);
    std::map<std::string, std::string> emails;
    for (const auto& u : scenario.users) emails.emplace(u, u + "@example.org");
    const std::string users_text = emit_user_table(emails);

    Rng rng(c.seed);
    std::vector<ClusterFiles> out;
    const auto count = c.interval_count();
    out.reserve(count);
    std::vector<WalkState> states;
    std::size_t phase_idx = 0;
    for (std::size_t i = 0; i < count; ++i) {
        bool fresh = i == 0;
        while (phase_idx + 1 < scenario.phases.size() && scenario.phases[phase_idx + 1].first_interval <= i) {
            ++phase_idx;
            fresh = true;
        }
        const Phase& phase = scenario.phases[phase_idx];
        if (fresh) {
            states.clear();
            for (const auto& p : phase.nodes) states.push_back(init_state(p, c, rng));
        } else {
            for (std::size_t n = 0; n < phase.nodes.size(); ++n) step_state(states[n], phase.nodes[n], rng);
        }
        const Instant ts = c.start + interval * static_cast<long long>(i);
        out.push_back(emit_interval(scenario, phase, states, ts, users_text));
    }
    return out;
}

std::vector<ClusterFiles> generate_timeline(const ScenarioConfig& config) {
    return generate_timeline(build_scenario(config));
}

void write_timeline(const std::filesystem::path& out_dir, const std::vector<ClusterFiles>& timeline) {
    for (const auto& files : timeline) write_cluster_files(out_dir / format_rfc3339(files.timestamp), files);
}

}  // namespace hpcload
