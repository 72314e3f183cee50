#include "hpcload/collectors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace hpcload {

namespace fs = std::filesystem;

ParseError::ParseError(std::string source, std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("{}:{}: {}", source, line, what)),
      source_(std::move(source)),
      line_(line) {}

namespace {

struct Line {
    std::size_t number;
    std::string_view text;
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> out;
    std::size_t number = 0;
    while (!text.empty()) {
        ++number;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.push_back({number, line});
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    while (true) {
        const auto pos = s.find(sep);
        out.push_back(s.substr(0, pos));
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

template <typename Int>
Int parse_count(std::string_view field, const char* what, const char* source, std::size_t line) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || v < 0) {
        throw ParseError(source, line, fmt::format("bad {} '{}'", what, field));
    }
    return v;
}

double parse_load(std::string_view field, const char* source, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() ||
        !std::isfinite(v) || v < 0.0) {
        throw ParseError(source, line, fmt::format("bad load '{}'", field));
    }
    return v;
}

void require_header(const std::vector<Line>& lines, std::string_view header, const char* source) {
    if (lines.empty()) throw ParseError(source, 1, "missing header");
    if (lines.front().text != header) {
        throw ParseError(source, 1, fmt::format("unexpected header '{}'", lines.front().text));
    }
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot read {}", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write {}", p.string()));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error(fmt::format("short write to {}", p.string()));
}

}  // namespace

const std::string* UserTable::email_of(std::string_view user) const {
    auto it = entries.find(std::string(user));
    return it == entries.end() ? nullptr : &it->second;
}

std::vector<NodeRecord> parse_node_table(std::string_view text) {
    constexpr const char* src = "nodes";
    const auto lines = split_lines(text);
    require_header(lines, kNodeTableHeader, src);

    std::vector<NodeRecord> nodes;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto [n, line] = lines[i];
        if (line.empty()) continue;
        const auto f = split(line, '|');
        if (f.size() != 9) {
            throw ParseError(src, n, fmt::format("expected 9 fields, got {}", f.size()));
        }
        NodeRecord r;
        r.name = std::string(f[0]);
        if (r.name.empty()) throw ParseError(src, n, "empty node name");
        r.cores_total = parse_count<int>(f[1], "CORES_TOTAL", src, n);
        r.cores_alloc = parse_count<int>(f[2], "CORES_ALLOC", src, n);
        r.load5 = parse_load(f[3], src, n);
        r.mem_total_mb = parse_count<std::int64_t>(f[4], "MEM_TOTAL_MB", src, n);
        r.mem_used_mb = parse_count<std::int64_t>(f[5], "MEM_USED_MB", src, n);
        r.gpus_total = parse_count<int>(f[6], "GPUS_TOTAL", src, n);
        r.gpus_alloc = parse_count<int>(f[7], "GPUS_ALLOC", src, n);
        const auto state = node_state_from(f[8]);
        if (!state) throw ParseError(src, n, fmt::format("unknown node state '{}'", f[8]));
        r.state = *state;

        if (r.cores_total < 1) throw ParseError(src, n, "node has no cores");
        if (r.cores_alloc > r.cores_total) throw ParseError(src, n, "CORES_ALLOC exceeds CORES_TOTAL");
        if (r.mem_used_mb > r.mem_total_mb) throw ParseError(src, n, "MEM_USED_MB exceeds MEM_TOTAL_MB");
        if (r.gpus_alloc > r.gpus_total) throw ParseError(src, n, "GPUS_ALLOC exceeds GPUS_TOTAL");
        nodes.push_back(std::move(r));
    }
    return nodes;
}

std::vector<JobRecord> parse_job_table(std::string_view text) {
    constexpr const char* src = "jobs";
    const auto lines = split_lines(text);
    require_header(lines, kJobTableHeader, src);

    std::vector<JobRecord> jobs;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto [n, line] = lines[i];
        if (line.empty()) continue;
        const auto f = split(line, '|');
        if (f.size() != 8) {
            throw ParseError(src, n, fmt::format("expected 8 fields, got {}", f.size()));
        }
        JobRecord j;
        j.job_id = std::string(f[0]);
        j.user = std::string(f[1]);
        j.node_name = std::string(f[2]);
        if (j.job_id.empty() || j.user.empty()) throw ParseError(src, n, "empty job id or user");
        const auto type = job_type_from(f[3]);
        if (!type) throw ParseError(src, n, fmt::format("unknown job type '{}'", f[3]));
        j.type = *type;
        j.cores_req = parse_count<int>(f[4], "CORES", src, n);
        if (j.cores_req < 1) throw ParseError(src, n, "job requests no cores");
        j.gpus_req = parse_count<int>(f[5], "GPUS", src, n);
        const auto state = job_state_from(f[6]);
        if (!state) throw ParseError(src, n, fmt::format("unknown job state '{}'", f[6]));
        j.state = *state;
        if (j.state == JobState::running && j.node_name.empty()) {
            throw ParseError(src, n, "running job without a node");
        }
        j.name = std::string(f[7]);
        jobs.push_back(std::move(j));
    }
    return jobs;
}

std::vector<GpuRecord> parse_gpu_csv(std::string_view node_name, std::string_view text) {
    const std::string src = fmt::format("gpu/{}.csv", node_name);
    std::vector<GpuRecord> gpus;
    std::set<int> seen;
    for (const auto [n, line] : split_lines(text)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 4) {
            throw ParseError(src, n, fmt::format("expected 4 fields, got {}", f.size()));
        }
        GpuRecord g;
        g.node_name = std::string(node_name);
        g.index = parse_count<int>(f[0], "index", src.c_str(), n);
        g.util_percent = parse_count<int>(f[1], "utilization", src.c_str(), n);
        g.mem_used_mb = parse_count<std::int64_t>(f[2], "mem_used_mb", src.c_str(), n);
        g.mem_total_mb = parse_count<std::int64_t>(f[3], "mem_total_mb", src.c_str(), n);
        if (g.util_percent > 100) {
            throw ParseError(src, n, fmt::format("utilization {} outside 0-100", g.util_percent));
        }
        if (g.mem_used_mb > g.mem_total_mb) throw ParseError(src, n, "GPU memory used exceeds total");
        if (!seen.insert(g.index).second) {
            throw ParseError(src, n, fmt::format("duplicate GPU index {}", g.index));
        }
        gpus.push_back(std::move(g));
    }
    return gpus;
}

UserTable load_user_table(std::string_view text) {
    UserTable table;
    for (const auto [n, line] : split_lines(text)) {
        if (line.empty() || line.front() == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos) {
            table.warnings.push_back(fmt::format("users:{}: no tab separator, entry skipped", n));
            continue;
        }
        const auto user = line.substr(0, tab);
        const auto email = line.substr(tab + 1);
        if (user.empty() || email.find('@') == std::string_view::npos) {
            table.warnings.push_back(
                fmt::format("users:{}: invalid email '{}' for '{}', entry skipped", n, email, user));
            continue;
        }
        table.entries.insert_or_assign(std::string(user), std::string(email));
    }
    return table;
}

std::string emit_node_table(const std::vector<NodeRecord>& nodes) {
    std::string out(kNodeTableHeader);
    out += '\n';
    for (const auto& r : nodes) {
        out += fmt::format("{}|{}|{}|{:.2f}|{}|{}|{}|{}|{}\n", r.name, r.cores_total, r.cores_alloc,
                           r.load5, r.mem_total_mb, r.mem_used_mb, r.gpus_total, r.gpus_alloc,
                           to_string(r.state));
    }
    return out;
}

std::string emit_job_table(const std::vector<JobRecord>& jobs) {
    std::string out(kJobTableHeader);
    out += '\n';
    for (const auto& j : jobs) {
        out += fmt::format("{}|{}|{}|{}|{}|{}|{}|{}\n", j.job_id, j.user, j.node_name, to_string(j.type),
                           j.cores_req, j.gpus_req, to_string(j.state), j.name);
    }
    return out;
}

std::string emit_gpu_csv(const std::vector<GpuRecord>& gpus) {
    std::string out;
    for (const auto& g : gpus) {
        out += fmt::format("{},{},{},{}\n", g.index, g.util_percent, g.mem_used_mb, g.mem_total_mb);
    }
    return out;
}

std::string emit_user_table(const std::map<std::string, std::string>& entries) {
    std::string out;
    for (const auto& [user, email] : entries) out += fmt::format("{}\t{}\n", user, email);
    return out;
}

const NodeRecord* ClusterView::find_node(std::string_view name) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), name,
                               [](const NodeRecord& n, std::string_view v) { return n.name < v; });
    return (it != nodes.end() && it->name == name) ? &*it : nullptr;
}

ClusterView assemble_cluster_view(std::vector<NodeRecord> nodes, std::vector<JobRecord> jobs,
                                  const std::map<std::string, std::string>& gpu_texts,
                                  const UserTable& user_table, Instant timestamp,
                                  std::string cluster_name) {
    ClusterView view;
    view.timestamp = timestamp;
    view.cluster_name = std::move(cluster_name);

    std::sort(nodes.begin(), nodes.end(),
              [](const NodeRecord& a, const NodeRecord& b) { return a.name < b.name; });
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        if (nodes[i].name == nodes[i - 1].name) {
            throw AssemblyError(fmt::format("node {} listed twice", nodes[i].name));
        }
    }
    view.nodes = std::move(nodes);

    std::vector<std::string> orphans;
    for (const auto& j : jobs) {
        if (j.state == JobState::running && !view.find_node(j.node_name)) {
            orphans.push_back(fmt::format("{} ({} on {})", j.job_id, j.user, j.node_name));
        }
    }
    if (!orphans.empty()) {
        std::string list;
        for (const auto& o : orphans) list += (list.empty() ? "" : ", ") + o;
        throw AssemblyError("running jobs reference unknown nodes: " + list);
    }
    std::sort(jobs.begin(), jobs.end(), [](const JobRecord& a, const JobRecord& b) {
        if (a.node_name != b.node_name) return a.node_name < b.node_name;
        return job_id_less(a.job_id, b.job_id);
    });
    view.jobs = std::move(jobs);

    for (const auto& node : view.nodes) {
        auto it = gpu_texts.find(node.name);
        if (node.gpus_total == 0) {
            if (it != gpu_texts.end()) {
                view.warnings.push_back(
                    fmt::format("GPU data supplied for CPU-only node {}, ignored", node.name));
            }
            continue;
        }
        if (it == gpu_texts.end()) {
            view.stale_gpu_nodes.insert(node.name);
            view.warnings.push_back(fmt::format("no GPU data for {}, GPU fields left empty", node.name));
            continue;
        }
        auto records = parse_gpu_csv(node.name, it->second);
        if (static_cast<int>(records.size()) > node.gpus_total) {
            view.warnings.push_back(fmt::format("{} reports {} GPUs but inventory lists {}", node.name,
                                                records.size(), node.gpus_total));
        }
        std::sort(records.begin(), records.end(),
                  [](const GpuRecord& a, const GpuRecord& b) { return a.index < b.index; });
        view.gpu_records.insert(view.gpu_records.end(), records.begin(), records.end());
    }
    for (const auto& [name, _] : gpu_texts) {
        if (!view.find_node(name)) {
            view.warnings.push_back(fmt::format("GPU data for unknown node {}, ignored", name));
        }
    }

    view.user_table = user_table.entries;
    view.warnings.insert(view.warnings.end(), user_table.warnings.begin(), user_table.warnings.end());
    return view;
}

UsageTable collect_usage(const ClusterView& view) {
    UsageTable table;
    auto job_it = view.jobs.begin();
    auto gpu_it = view.gpu_records.begin();
    for (const auto& node : view.nodes) {
        while (job_it != view.jobs.end() && job_it->node_name < node.name) ++job_it;
        auto job_end = job_it;
        while (job_end != view.jobs.end() && job_end->node_name == node.name) ++job_end;
        while (gpu_it != view.gpu_records.end() && gpu_it->node_name < node.name) ++gpu_it;
        auto gpu_end = gpu_it;
        while (gpu_end != view.gpu_records.end() && gpu_end->node_name == node.name) ++gpu_end;

        auto agg = aggregate_user_node(node, std::span(job_it, job_end), std::span(gpu_it, gpu_end));
        for (auto& r : agg.rows) table.rows.push_back(std::move(r));
        for (auto& w : agg.warnings) table.warnings.push_back(std::move(w));
        job_it = job_end;
        gpu_it = gpu_end;
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const UserNodeUsage& a, const UserNodeUsage& b) {
        return std::tie(a.user, a.node_name) < std::tie(b.user, b.node_name);
    });
    return table;
}

std::string emit_cluster_meta(std::string_view cluster_name, Instant timestamp) {
    return fmt::format("cluster\t{}\ntimestamp\t{}\n", cluster_name, format_rfc3339(timestamp));
}

void write_cluster_files(const fs::path& dir, const ClusterFiles& files) {
    fs::create_directories(dir / "gpu");
    write_file(dir / "cluster.tsv", emit_cluster_meta(files.cluster_name, files.timestamp));
    write_file(dir / "nodes.txt", files.nodes);
    write_file(dir / "jobs.txt", files.jobs);
    write_file(dir / "users.tsv", files.users);
    write_file(dir / "privileges.tsv", files.privileges);
    for (const auto& [node, text] : files.gpu) write_file(dir / "gpu" / (node + ".csv"), text);
}

ClusterFiles read_cluster_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw std::runtime_error(fmt::format("cluster directory {} not found", dir.string()));
    }
    ClusterFiles files;
    files.cluster_name = dir.filename().string();
    if (files.cluster_name.empty()) files.cluster_name = dir.parent_path().filename().string();
    files.timestamp = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());

    if (fs::exists(dir / "cluster.tsv")) {
        const std::string meta = read_file(dir / "cluster.tsv");
        for (const auto [n, line] : split_lines(meta)) {
            if (line.empty() || line.front() == '#') continue;
            const auto tab = line.find('\t');
            if (tab == std::string_view::npos) throw ParseError("cluster.tsv", n, "no tab separator");
            const auto key = line.substr(0, tab);
            const auto value = line.substr(tab + 1);
            if (key == "cluster") {
                files.cluster_name = std::string(value);
            } else if (key == "timestamp") {
                const auto t = parse_rfc3339(value);
                if (!t) throw ParseError("cluster.tsv", n, fmt::format("bad timestamp '{}'", value));
                files.timestamp = *t;
            }
        }
    }
    files.nodes = read_file(dir / "nodes.txt");
    files.jobs = read_file(dir / "jobs.txt");
    if (fs::exists(dir / "users.tsv")) files.users = read_file(dir / "users.tsv");
    if (fs::exists(dir / "privileges.tsv")) files.privileges = read_file(dir / "privileges.tsv");
    if (fs::is_directory(dir / "gpu")) {
        for (const auto& entry : fs::directory_iterator(dir / "gpu")) {
            if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
            files.gpu.emplace(entry.path().stem().string(), read_file(entry.path()));
        }
    }
    return files;
}

ClusterView assemble_from_files(const ClusterFiles& files) {
    return assemble_cluster_view(parse_node_table(files.nodes), parse_job_table(files.jobs), files.gpu,
                                 load_user_table(files.users), files.timestamp, files.cluster_name);
}

}  // namespace hpcload
