#include "hpcload/render.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

#include <fmt/format.h>

namespace hpcload {

namespace {

// Left-aligned columns separated by two spaces, no trailing blanks.
class TextTable {
  public:
    explicit TextTable(std::vector<std::string> header, std::string indent = {})
        : indent_(std::move(indent)) {
        rows_.push_back(std::move(header));
    }

    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

    std::string str() const {
        std::vector<std::size_t> width(rows_.front().size(), 0);
        for (const auto& r : rows_) {
            for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
        }
        std::string out;
        for (const auto& r : rows_) {
            out += indent_;
            for (std::size_t c = 0; c < r.size(); ++c) {
                out += r[c];
                if (c + 1 < r.size()) out.append(width[c] - r[c].size() + 2, ' ');
            }
            out += '\n';
        }
        return out;
    }

  private:
    std::string indent_;
    std::vector<std::vector<std::string>> rows_;
};

template <typename T>
std::string triple(T used, T free, T total) {
    return fmt::format("{}/{}/{}", used, free, total);
}

std::string opt_load(const std::optional<double>& v) { return v ? format_load(*v) : "-"; }

std::vector<std::string> usage_cells(const UserNodeUsage& u, bool gpu) {
    std::vector<std::string> row{u.node_name, triple(u.cpu_used, u.cpu_free, u.cpu_total),
                                 format_load(u.load_norm),
                                 triple(u.mem_used_gb, u.mem_free_gb, u.mem_total_gb)};
    if (gpu) {
        row.push_back(u.gpu_total > 0 ? triple(u.gpu_used, u.gpu_free, u.gpu_total) : "-");
        row.push_back(opt_load(u.gpu_load_norm));
        row.push_back(u.gpu_mem_total_gb
                          ? triple(*u.gpu_mem_used_gb, *u.gpu_mem_free_gb, *u.gpu_mem_total_gb)
                          : "-");
    }
    return row;
}

std::string user_table_text(const std::vector<const UserNodeUsage*>& rows, bool gpu) {
    std::vector<std::string> header{"NODE", "CPU(U/F/T)", "LOAD", "MEM_GB(U/F/T)"};
    if (gpu) {
        header.insert(header.end(), {"GPU(U/F/T)", "GPULOAD", "GPUMEM_GB(U/F/T)"});
    }
    TextTable table(header);
    if (rows.empty()) return table.str() + "no active jobs\n";

    UserNodeUsage sum;
    bool any_gpu = false, any_gpu_mem = false;
    std::int64_t gmt = 0, gmu = 0, gmf = 0;
    for (const auto* u : rows) {
        table.add(usage_cells(*u, gpu));
        sum.cpu_total += u->cpu_total;
        sum.cpu_used += u->cpu_used;
        sum.cpu_free += u->cpu_free;
        sum.mem_total_gb += u->mem_total_gb;
        sum.mem_used_gb += u->mem_used_gb;
        sum.mem_free_gb += u->mem_free_gb;
        sum.gpu_total += u->gpu_total;
        sum.gpu_used += u->gpu_used;
        sum.gpu_free += u->gpu_free;
        any_gpu = any_gpu || u->gpu_total > 0;
        if (u->gpu_mem_total_gb) {
            any_gpu_mem = true;
            gmt += *u->gpu_mem_total_gb;
            gmu += *u->gpu_mem_used_gb;
            gmf += *u->gpu_mem_free_gb;
        }
    }
    std::vector<std::string> total{"TOTAL", triple(sum.cpu_used, sum.cpu_free, sum.cpu_total), "-",
                                   triple(sum.mem_used_gb, sum.mem_free_gb, sum.mem_total_gb)};
    if (gpu) {
        total.push_back(any_gpu ? triple(sum.gpu_used, sum.gpu_free, sum.gpu_total) : "-");
        total.push_back("-");
        total.push_back(any_gpu_mem ? triple(gmu, gmf, gmt) : "-");
    }
    table.add(std::move(total));
    return table.str();
}

std::vector<const UserNodeUsage*> rows_of(const UsageTable& usage, std::string_view user) {
    std::vector<const UserNodeUsage*> out;
    for (const auto& r : usage.rows) {
        if (r.user == user) out.push_back(&r);
    }
    return out;
}

std::string opt_count(const std::optional<std::int64_t>& v) {
    return v ? std::to_string(*v) : "-";
}

std::size_t parse_index(std::string_view s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument(fmt::format("bad range bound '{}'", s));
    }
    return v;
}

void expand_one(std::string_view item, std::vector<std::string>& out) {
    const auto open = item.find('[');
    if (open == std::string_view::npos) {
        if (item.find(']') != std::string_view::npos) {
            throw std::invalid_argument(fmt::format("unbalanced ']' in '{}'", item));
        }
        out.emplace_back(item);
        return;
    }
    const auto close = item.find(']', open);
    if (close == std::string_view::npos) {
        throw std::invalid_argument(fmt::format("unbalanced '[' in '{}'", item));
    }
    const auto prefix = item.substr(0, open);
    const auto suffix = item.substr(close + 1);
    std::string_view body = item.substr(open + 1, close - open - 1);
    if (body.empty()) throw std::invalid_argument(fmt::format("empty range in '{}'", item));

    while (true) {
        const auto comma = body.find(',');
        const auto part = body.substr(0, comma);
        const auto dash = part.find('-');
        const auto lo_s = part.substr(0, dash);
        const auto hi_s = dash == std::string_view::npos ? lo_s : part.substr(dash + 1);
        const auto lo = parse_index(lo_s);
        const auto hi = parse_index(hi_s);
        if (hi < lo) throw std::invalid_argument(fmt::format("descending range '{}'", part));
        const std::size_t pad = lo_s.size() > 1 && lo_s.front() == '0' ? lo_s.size() : 0;
        for (std::size_t v = lo; v <= hi; ++v) {
            expand_one(fmt::format("{}{:0{}}{}", prefix, v, pad, suffix), out);
        }
        if (comma == std::string_view::npos) break;
        body.remove_prefix(comma + 1);
    }
}

}  // namespace

std::string format_load(double v) { return fmt::format("{:.2f}", v); }

double quantize_load(double v) {
    const std::string s = format_load(v);
    double q = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), q);
    return q;
}

std::string render_user_view(const ClusterView& view, std::string_view user, bool gpu) {
    const auto usage = collect_usage(view);
    return user_table_text(rows_of(usage, user), gpu);
}

std::string render_all_view(const ClusterView& view, bool gpu) {
    std::string out = "JUPYTER SESSIONS\n";
    TextTable jupyter({"NODE", "USER", "GPUS"}, "  ");
    std::size_t sessions = 0;
    for (const auto& j : view.jobs) {
        if (j.state != JobState::running || j.type != JobType::jupyter) continue;
        jupyter.add({j.node_name, j.user, j.gpus_req > 0 ? std::to_string(j.gpus_req) : "-"});
        ++sessions;
    }
    out += sessions ? jupyter.str() : "  none\n";

    const auto usage = collect_usage(view);
    std::vector<std::string> users;
    for (const auto& r : usage.rows) {
        if (users.empty() || users.back() != r.user) users.push_back(r.user);
    }
    for (const auto& user : users) {
        auto it = view.user_table.find(user);
        out += fmt::format("\nUSER {} {}\n", user,
                           it != view.user_table.end() ? it->second : "(no email on file)");
        out += user_table_text(rows_of(usage, user), gpu);
    }
    return out;
}

std::string render_top_view(const ClusterView& view, int n) {
    if (n < 1) throw std::invalid_argument("top count must be at least 1");
    struct Entry {
        const NodeRecord* node;
        double load_norm;
    };
    std::vector<Entry> entries;
    entries.reserve(view.nodes.size());
    for (const auto& node : view.nodes) {
        entries.push_back({&node, normalize_cpu_load(node.load5, node.cores_total)});
    }
    const auto keep = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(n));
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(keep), entries.end(),
                      [](const Entry& a, const Entry& b) {
                          if (a.load_norm != b.load_norm) return a.load_norm > b.load_norm;
                          return a.node->name < b.node->name;
                      });
    TextTable table({"NODE", "LOAD_NORM", "CORES", "STATE"});
    for (std::size_t i = 0; i < keep; ++i) {
        const auto& e = entries[i];
        table.add({e.node->name, format_load(e.load_norm), std::to_string(e.node->cores_total),
                   std::string(to_string(e.node->state))});
    }
    return table.str();
}

NodesViewResult render_nodes_view(const ClusterView& view, const std::vector<std::string>& nodelist,
                                  bool gpu, const std::optional<std::string>& viewer) {
    NodesViewResult result;
    bool first = true;
    for (const auto& name : nodelist) {
        if (!first) result.text += '\n';
        first = false;
        const NodeRecord* node = view.find_node(name);
        if (!node) {
            result.text += fmt::format("node {}: not found\n", name);
            ++result.unknown;
            continue;
        }
        result.text += fmt::format(
            "NODE {}  state={}  load_norm={}  cores={}/{}  mem_gb={}/{}  gpus={}/{}\n", node->name,
            to_string(node->state), format_load(normalize_cpu_load(node->load5, node->cores_total)),
            node->cores_alloc, node->cores_total, mb_to_gb_floor(node->mem_used_mb),
            mb_to_gb_round(node->mem_total_mb), node->gpus_alloc, node->gpus_total);

        TextTable jobs({"JOBID", "USER", "TYPE", "CORES", "GPUS", "NAME"}, "  ");
        std::size_t count = 0;
        for (const auto& j : view.jobs) {
            if (j.node_name != node->name || j.state != JobState::running) continue;
            const bool hide = viewer && *viewer != j.user;
            jobs.add({j.job_id, j.user, std::string(to_string(j.type)), std::to_string(j.cores_req),
                      std::to_string(j.gpus_req), hide ? "(hidden)" : j.name});
            ++count;
        }
        result.text += count ? jobs.str() : "  no running jobs\n";

        if (gpu && node->gpus_total > 0) {
            if (view.stale_gpu_nodes.count(node->name)) {
                result.text += "  GPU data unavailable\n";
                continue;
            }
            TextTable gpus({"GPU", "UTIL", "MEM_GB(U/T)"}, "  ");
            for (const auto& g : view.gpu_records) {
                if (g.node_name != node->name) continue;
                gpus.add({std::to_string(g.index), fmt::format("{}%", g.util_percent),
                          fmt::format("{}/{}", mb_to_gb_floor(g.mem_used_mb),
                                      mb_to_gb_round(g.mem_total_mb))});
            }
            result.text += gpus.str();
        }
    }
    return result;
}

std::string render_tsv(const ClusterView& view, const std::optional<std::string>& user, bool gpu) {
    const auto usage = collect_usage(view);
    const std::string ts = format_rfc3339(view.timestamp);
    std::string out(kTsvHeader);
    out += '\n';
    for (const auto& u : usage.rows) {
        if (user && u.user != *user) continue;
        out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}", ts, view.cluster_name, u.user,
                           u.node_name, to_string(u.job_type), u.cpu_total, u.cpu_used, u.cpu_free,
                           format_load(u.load_norm), u.mem_total_gb, u.mem_used_gb, u.mem_free_gb);
        if (!gpu) {
            out += "\t-\t-\t-\t-\t-\t-\t-\n";
        } else if (u.gpu_total == 0) {
            out += "\t0\t-\t-\t-\t-\t-\t-\n";
        } else {
            out += fmt::format("\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", u.gpu_total, u.gpu_used, u.gpu_free,
                               opt_load(u.gpu_load_norm), opt_count(u.gpu_mem_total_gb),
                               opt_count(u.gpu_mem_used_gb), opt_count(u.gpu_mem_free_gb));
        }
    }
    return out;
}

std::vector<std::string> expand_nodelist(std::string_view hostlist) {
    std::vector<std::string> out;
    std::size_t depth = 0, start = 0;
    for (std::size_t i = 0; i <= hostlist.size(); ++i) {
        const char c = i < hostlist.size() ? hostlist[i] : ',';
        if (c == '[') ++depth;
        if (c == ']') {
            if (depth == 0) throw std::invalid_argument(fmt::format("unbalanced ']' in '{}'", hostlist));
            --depth;
        }
        if (c == ',' && depth == 0) {
            const auto item = hostlist.substr(start, i - start);
            if (item.empty()) throw std::invalid_argument(fmt::format("empty entry in node list '{}'", hostlist));
            expand_one(item, out);
            start = i + 1;
        }
    }
    if (depth != 0) throw std::invalid_argument(fmt::format("unbalanced '[' in '{}'", hostlist));
    if (out.empty()) throw std::invalid_argument("empty node list");
    return out;
}

}  // namespace hpcload
