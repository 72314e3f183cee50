#include "hpcload/archive.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <fmt/format.h>
#include <unistd.h>

#include "hpcload/render.hpp"

namespace hpcload {

namespace fs = std::filesystem;
namespace chr = std::chrono;

namespace {

std::vector<std::string_view> split_tabs(std::string_view s) {
    std::vector<std::string_view> out;
    while (true) {
        const auto pos = s.find('\t');
        out.push_back(s.substr(0, pos));
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return out;
}

template <typename Int>
Int count_field(std::string_view f, std::size_t line, const char* what) {
    Int v{};
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size() || v < 0) {
        throw ParseError("snapshot", line, fmt::format("bad {} '{}'", what, f));
    }
    return v;
}

double load_field(std::string_view f, std::size_t line, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v) || v < 0.0) {
        throw ParseError("snapshot", line, fmt::format("bad {} '{}'", what, f));
    }
    return v;
}

template <typename Int>
std::optional<Int> opt_count(std::string_view f, std::size_t line, const char* what) {
    if (f == "-") return std::nullopt;
    return count_field<Int>(f, line, what);
}

bool all_digits(std::string_view s, std::size_t len) {
    return s.size() == len && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
    int v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

std::vector<fs::path> sorted_children(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<SnapshotRow> parse_snapshot_tsv(std::string_view text) {
    std::vector<SnapshotRow> rows;
    std::size_t n = 0;
    bool header_seen = false;
    while (!text.empty()) {
        ++n;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!header_seen) {
            if (line != kTsvHeader) throw ParseError("snapshot", n, "unexpected header");
            header_seen = true;
            continue;
        }
        if (line.empty()) continue;
        const auto f = split_tabs(line);
        if (f.size() != 19) throw ParseError("snapshot", n, fmt::format("expected 19 fields, got {}", f.size()));

        SnapshotRow r;
        const auto ts = parse_rfc3339(f[0]);
        if (!ts) throw ParseError("snapshot", n, fmt::format("bad timestamp '{}'", f[0]));
        r.ts = *ts;
        r.cluster = std::string(f[1]);
        auto& u = r.usage;
        u.user = std::string(f[2]);
        u.node_name = std::string(f[3]);
        const auto type = job_type_from(f[4]);
        if (!type) throw ParseError("snapshot", n, fmt::format("bad jobtype '{}'", f[4]));
        u.job_type = *type;
        u.cpu_total = count_field<int>(f[5], n, "cpu_total");
        u.cpu_used = count_field<int>(f[6], n, "cpu_used");
        u.cpu_free = count_field<int>(f[7], n, "cpu_free");
        u.load_norm = load_field(f[8], n, "load_norm");
        u.mem_total_gb = count_field<std::int64_t>(f[9], n, "mem_total_gb");
        u.mem_used_gb = count_field<std::int64_t>(f[10], n, "mem_used_gb");
        u.mem_free_gb = count_field<std::int64_t>(f[11], n, "mem_free_gb");
        if (u.cpu_used + u.cpu_free != u.cpu_total || u.mem_used_gb + u.mem_free_gb != u.mem_total_gb) {
            throw ParseError("snapshot", n, "used + free differs from total");
        }

        if (f[12] != "-") {
            u.gpu_total = count_field<int>(f[12], n, "gpu_total");
            if (u.gpu_total > 0) {
                u.gpu_used = count_field<int>(f[13], n, "gpu_used");
                u.gpu_free = count_field<int>(f[14], n, "gpu_free");
                if (u.gpu_used + u.gpu_free != u.gpu_total) {
                    throw ParseError("snapshot", n, "GPU used + free differs from total");
                }
                if (f[15] != "-") u.gpu_load_norm = load_field(f[15], n, "gpu_load_norm");
                u.gpu_mem_total_gb = opt_count<std::int64_t>(f[16], n, "gpu_mem_total_gb");
                u.gpu_mem_used_gb = opt_count<std::int64_t>(f[17], n, "gpu_mem_used_gb");
                u.gpu_mem_free_gb = opt_count<std::int64_t>(f[18], n, "gpu_mem_free_gb");
                const bool all = u.gpu_mem_total_gb && u.gpu_mem_used_gb && u.gpu_mem_free_gb;
                const bool none = !u.gpu_mem_total_gb && !u.gpu_mem_used_gb && !u.gpu_mem_free_gb;
                if (!(all || none) ||
                    (all && *u.gpu_mem_used_gb + *u.gpu_mem_free_gb != *u.gpu_mem_total_gb)) {
                    throw ParseError("snapshot", n, "inconsistent GPU memory fields");
                }
            }
        }
        rows.push_back(std::move(r));
    }
    if (!header_seen) throw ParseError("snapshot", 1, "empty snapshot file");
    return rows;
}

SnapshotArchive::SnapshotArchive(fs::path root, std::string cluster)
    : root_(std::move(root)), cluster_(std::move(cluster)) {
    if (cluster_.empty() || cluster_.find('/') != std::string::npos || cluster_ == "." || cluster_ == "..") {
        throw std::invalid_argument(fmt::format("invalid cluster name '{}'", cluster_));
    }
}

fs::path SnapshotArchive::path_for(Instant ts) const {
    const auto day = chr::floor<chr::days>(ts);
    const chr::year_month_day ymd{day};
    const chr::hh_mm_ss<chr::seconds> hms{ts - day};
    return cluster_dir() / fmt::format("{:04d}", static_cast<int>(ymd.year())) /
           fmt::format("{:02d}", static_cast<unsigned>(ymd.month())) /
           fmt::format("{:02d}", static_cast<unsigned>(ymd.day())) /
           fmt::format("{:02d}{:02d}.tsv", hms.hours().count(), hms.minutes().count());
}

std::vector<std::string> list_clusters(const fs::path& root) {
    if (!fs::is_directory(root)) throw ArchiveError(fmt::format("archive root {} not found", root.string()));
    std::vector<std::string> out;
    for (const auto& p : sorted_children(root)) {
        if (fs::is_directory(p) && p.filename().string().front() != '.') out.push_back(p.filename().string());
    }
    return out;
}

TakeResult take_snapshot(const ClusterView& view, const SnapshotArchive& archive, double interval_hours) {
    TakeResult result;
    const auto interval = interval_from_hours(interval_hours);
    if (interval < chr::minutes{1} || interval % chr::minutes{1} != chr::seconds{0}) {
        throw std::invalid_argument("snapshot interval must be a whole number of minutes");
    }
    result.aligned = floor_to_interval(view.timestamp, interval);
    if (result.aligned != view.timestamp) {
        result.notes.push_back(fmt::format("timestamp {} aligned to {}", format_rfc3339(view.timestamp),
                                           format_rfc3339(result.aligned)));
    }

    ClusterView stamped = view;
    stamped.timestamp = result.aligned;
    const std::string body = render_tsv(stamped, std::nullopt, true);

    result.path = archive.path_for(result.aligned);
    const fs::path tmp = result.path.parent_path() /
                         fmt::format(".{}.tmp.{}", result.path.filename().string(), ::getpid());
    try {
        fs::create_directories(result.path.parent_path());
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw ArchiveError(fmt::format("cannot write {}", tmp.string()));
            out.write(body.data(), static_cast<std::streamsize>(body.size()));
            out.flush();
            if (!out) throw ArchiveError(fmt::format("short write to {}", tmp.string()));
        }
        fs::rename(tmp, result.path);
    } catch (const fs::filesystem_error& e) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw ArchiveError(e.what());
    }
    return result;
}

RangeResult read_range(const SnapshotArchive& archive, Instant start, Instant end) {
    if (end < start) throw std::invalid_argument("range end precedes start");
    const fs::path dir = archive.cluster_dir();
    if (!fs::is_directory(dir)) throw ArchiveError(fmt::format("no archive for cluster at {}", dir.string()));

    RangeResult result;
    const auto first_day = chr::floor<chr::days>(start);
    const auto last_day = chr::floor<chr::days>(end);
    for (const auto& ydir : sorted_children(dir)) {
        const auto ys = ydir.filename().string();
        if (!all_digits(ys, 4) || !fs::is_directory(ydir)) continue;
        for (const auto& mdir : sorted_children(ydir)) {
            const auto ms = mdir.filename().string();
            if (!all_digits(ms, 2) || !fs::is_directory(mdir)) continue;
            for (const auto& ddir : sorted_children(mdir)) {
                const auto ds = ddir.filename().string();
                if (!all_digits(ds, 2) || !fs::is_directory(ddir)) continue;
                const chr::year_month_day ymd{chr::year{to_int(ys)}, chr::month{static_cast<unsigned>(to_int(ms))},
                                              chr::day{static_cast<unsigned>(to_int(ds))}};
                if (!ymd.ok()) continue;
                const chr::sys_days day{ymd};
                if (day < first_day || day > last_day) continue;

                for (const auto& file : sorted_children(ddir)) {
                    const auto name = file.filename().string();
                    if (name.front() == '.') continue;
                    const auto stem = file.stem().string();
                    if (file.extension() != ".tsv" || !all_digits(stem, 4)) {
                        result.warnings.push_back(fmt::format("ignoring stray file {}", file.string()));
                        continue;
                    }
                    const int hh = to_int(std::string_view(stem).substr(0, 2));
                    const int mm = to_int(std::string_view(stem).substr(2, 2));
                    if (hh > 23 || mm > 59) {
                        result.warnings.push_back(fmt::format("ignoring stray file {}", file.string()));
                        continue;
                    }
                    const Instant ts = Instant{day} + chr::hours{hh} + chr::minutes{mm};
                    if (ts < start || ts >= end) continue;

                    std::ifstream in(file, std::ios::binary);
                    std::ostringstream ss;
                    ss << in.rdbuf();
                    try {
                        if (!in) throw ArchiveError("unreadable");
                        auto rows = parse_snapshot_tsv(ss.str());
                        for (const auto& r : rows) {
                            if (r.ts != ts) {
                                throw ArchiveError(fmt::format("row stamped {} inside file for {}",
                                                               format_rfc3339(r.ts), format_rfc3339(ts)));
                            }
                        }
                        result.snapshots.push_back({ts, file, std::move(rows)});
                    } catch (const std::exception& e) {
                        result.warnings.push_back(fmt::format("skipping {}: {}", file.string(), e.what()));
                    }
                }
            }
        }
    }
    std::sort(result.snapshots.begin(), result.snapshots.end(),
              [](const Snapshot& a, const Snapshot& b) { return a.ts < b.ts; });
    return result;
}

}  // namespace hpcload
