#include "hpcload/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "hpcload/render.hpp"

namespace hpcload {

namespace fs = std::filesystem;

const ReportSection& WeeklyReport::section(Category c) const {
    return sections[static_cast<std::size_t>(c)];
}

ReportSection& WeeklyReport::section(Category c) { return sections[static_cast<std::size_t>(c)]; }

NodeHoursMap compute_node_hours(std::span<const Snapshot> snapshots, const Thresholds& t) {
    NodeHoursMap out;
    for (const auto& snap : snapshots) {
        for (const auto& row : snap.rows) {
            const auto flags = classify_load(row.usage, t);
            for (auto c : kAllCategories) {
                if (flags.has(c)) ++out[{row.usage.user, c}].instances;
            }
        }
    }
    for (auto& [_, h] : out) h.node_hours = static_cast<double>(h.instances) * t.interval_hours;
    return out;
}

std::vector<RankedEntry> rank_top(const NodeHoursMap& hours, Category category, std::size_t k) {
    std::vector<RankedEntry> all;
    for (const auto& [key, h] : hours) {
        if (key.second == category && h.instances > 0) all.push_back({0, key.first, h.node_hours, h.instances});
    }
    const auto keep = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      [](const RankedEntry& a, const RankedEntry& b) {
                          if (a.instances != b.instances) return a.instances > b.instances;
                          return a.user < b.user;
                      });
    all.resize(keep);
    for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = static_cast<int>(i + 1);
    return all;
}

WeeklyReport anonymize(WeeklyReport report) {
    if (report.anonymized) return report;
    for (auto& section : report.sections) {
        section.labels.clear();
        for (auto& e : section.entries) {
            auto label = fmt::format("user{:02d}", e.rank);
            section.labels.emplace(label, e.user);
            e.user = std::move(label);
        }
    }
    report.anonymized = true;
    return report;
}

WeeklyReport deanonymize(WeeklyReport report) {
    if (!report.anonymized) return report;
    for (auto& section : report.sections) {
        for (auto& e : section.entries) {
            if (auto it = section.labels.find(e.user); it != section.labels.end()) e.user = it->second;
        }
        section.labels.clear();
    }
    report.anonymized = false;
    return report;
}

namespace {

std::string_view section_title(Category c) {
    switch (c) {
        case Category::low_gpu: return "low GPU load";
        case Category::low_cpu: return "low CPU load";
        case Category::high_cpu: return "high CPU load";
    }
    return "";
}

std::string interval_words(double hours) {
    const auto minutes = std::llround(hours * 60.0);
    return minutes % 60 == 0 ? fmt::format("{} hour(s)", minutes / 60) : fmt::format("{} minutes", minutes);
}

double metric_of(const SnapshotRow& r, Category c) {
    return c == Category::low_gpu ? r.usage.gpu_load_norm.value_or(0.0) : r.usage.load_norm;
}

bool row_time_less(const SnapshotRow* a, const SnapshotRow* b) {
    return std::tie(a->ts, a->usage.node_name) < std::tie(b->ts, b->usage.node_name);
}

std::vector<SnapshotRow> select_evidence(std::vector<const SnapshotRow*> flagged, Category c) {
    std::sort(flagged.begin(), flagged.end(), row_time_less);
    std::set<const SnapshotRow*> chosen;
    if (!flagged.empty()) {
        chosen.insert(flagged.front());
        chosen.insert(flagged.back());
    }
    auto by_metric = flagged;
    std::stable_sort(by_metric.begin(), by_metric.end(), [c](const SnapshotRow* a, const SnapshotRow* b) {
        return metric_of(*a, c) < metric_of(*b, c);
    });
    std::size_t lo = 0, hi = by_metric.size();
    bool take_low = true;
    while (chosen.size() < kMaxEvidenceRows && lo < hi) {
        chosen.insert(take_low ? by_metric[lo++] : by_metric[--hi]);
        take_low = !take_low;
    }
    std::vector<const SnapshotRow*> ordered(chosen.begin(), chosen.end());
    std::sort(ordered.begin(), ordered.end(), row_time_less);
    std::vector<SnapshotRow> out;
    for (const auto* r : ordered) out.push_back(*r);
    return out;
}

std::string evidence_table(const std::vector<SnapshotRow>& rows) {
    std::string out = "TS\tNODE\tJOBTYPE\tCPU(U/F/T)\tLOAD\tMEM_GB(U/F/T)\tGPU(U/F/T)\tGPULOAD\tGPUMEM_GB(U/F/T)\n";
    for (const auto& r : rows) {
        const auto& u = r.usage;
        out += fmt::format("{}\t{}\t{}\t{}/{}/{}\t{}\t{}/{}/{}\t{}\t{}\t{}\n", format_rfc3339(r.ts), u.node_name,
                           to_string(u.job_type), u.cpu_used, u.cpu_free, u.cpu_total, format_load(u.load_norm),
                           u.mem_used_gb, u.mem_free_gb, u.mem_total_gb,
                           u.gpu_total > 0 ? fmt::format("{}/{}/{}", u.gpu_used, u.gpu_free, u.gpu_total) : "-",
                           u.gpu_load_norm ? format_load(*u.gpu_load_norm) : "-",
                           u.gpu_mem_total_gb ? fmt::format("{}/{}/{}", *u.gpu_mem_used_gb, *u.gpu_mem_free_gb,
                                                            *u.gpu_mem_total_gb)
                                              : "-");
    }
    return out;
}

std::string suggestions(Category c, const std::optional<NppnRecommendation>& nppn,
                        const SnapshotRow* median, int current_nppn) {
    std::string out;
    switch (c) {
        case Category::low_gpu:
            out += "- If your GPU memory use is small, a larger problem size per task (for example a\n"
                   "  larger training batch size) keeps the GPU busier.\n";
            if (nppn && median) {
                const auto& u = median->usage;
                out += fmt::format(
                    "- GPU overloading: run several tasks on the same GPU by raising the number of\n"
                    "  processes per node (NPPN). Your median flagged snapshot was\n"
                    "    node {} at {}\n"
                    "    GPU load {}, GPU memory {}/{} GB, {} task(s) per node\n"
                    "  and leaves room for NPPN={} per node (limiting factor: {}).\n",
                    u.node_name, format_rfc3339(median->ts), format_load(u.gpu_load_norm.value_or(0.0)),
                    u.gpu_mem_used_gb.value_or(0), u.gpu_mem_total_gb.value_or(0), current_nppn, nppn->nppn,
                    to_string(nppn->limiting_factor));
            }
            out += "- Request only the cores each task needs, so that more tasks (and all GPUs) of a\n"
                   "  node can be used by your jobs.\n";
            break;
        case Category::low_cpu:
            out += "- Request fewer cores per task, or pack more tasks onto each node (raise NPPN).\n"
                   "- Check that the application actually runs the number of threads it was given.\n";
            break;
        case Category::high_cpu:
            out += "- Many libraries start as many threads as the number of physical cores or\n"
                   "  hyperthreads they detect. With several tasks per node this oversubscribes the\n"
                   "  cores; cap the thread count per task (for example OMP_NUM_THREADS) to\n"
                   "  cores per node divided by tasks per node.\n"
                   "- Avoid writing files from inside tight loops; large numbers of concurrent file\n"
                   "  I/O requests also drive the load up.\n";
            break;
    }
    return out;
}

}  // namespace

std::string render_report(const WeeklyReport& report) {
    std::string out = "Weekly utilization report\n";
    out += fmt::format("cluster: {}\n", report.cluster);
    out += fmt::format("period: {} to {}\n", format_rfc3339(report.start), format_rfc3339(report.end));
    out += fmt::format("snapshots: {} (every {})\n", report.snapshot_count,
                       interval_words(report.thresholds.interval_hours));
    out += fmt::format("thresholds: low < {}, high > {}\n", format_load(report.thresholds.low),
                       format_load(report.thresholds.high_cpu));
    for (const auto& note : report.notes) out += "note: " + note + "\n";

    for (const auto& section : report.sections) {
        out += fmt::format("\nTop 10 users by node-hours of {}\n", section_title(section.category));
        if (section.entries.empty()) {
            out += "  none\n";
            continue;
        }
        std::size_t width = 4;
        for (const auto& e : section.entries) width = std::max(width, e.user.size());
        out += fmt::format("  RANK  {:<{}}  NODE_HOURS\n", "USER", width);
        for (const auto& e : section.entries) {
            out += fmt::format("  {:>4}  {:<{}}  {:>10.2f}\n", e.rank, e.user, width, e.node_hours);
        }
    }
    return out;
}

WeeklyRun build_weekly_report(const SnapshotArchive& archive, Instant start, const Thresholds& t,
                              bool anonymize_users, std::chrono::days length) {
    t.validate();
    const auto interval = interval_from_hours(t.interval_hours);
    if (floor_to_interval(start, interval) != start) {
        throw std::invalid_argument(
            fmt::format("report start {} is not on the snapshot grid", format_rfc3339(start)));
    }
    WeeklyRun run;
    run.report.cluster = archive.cluster();
    run.report.start = start;
    run.report.end = start + length;
    run.report.thresholds = t;

    run.data = read_range(archive, run.report.start, run.report.end);
    run.report.snapshot_count = run.data.snapshots.size();
    if (run.data.snapshots.empty()) run.report.notes.push_back("no snapshots in period");

    const auto hours = compute_node_hours(run.data.snapshots, t);
    for (auto c : kAllCategories) run.report.section(c).entries = rank_top(hours, c, 10);
    if (anonymize_users) run.report = anonymize(std::move(run.report));
    run.text = render_report(run.report);
    return run;
}

std::vector<EmailDraft> draft_emails(const WeeklyReport& report,
                                     const std::map<std::string, std::string>& user_table,
                                     std::span<const Snapshot> snapshots, std::vector<std::string>& warnings) {
    const WeeklyReport real = deanonymize(report);
    std::vector<EmailDraft> drafts;
    for (const auto& section : real.sections) {
        for (const auto& entry : section.entries) {
            EmailDraft d;
            d.user = entry.user;
            d.category = section.category;
            d.node_hours = entry.node_hours;
            if (auto it = user_table.find(entry.user); it != user_table.end()) {
                d.to = it->second;
            } else {
                d.to = fmt::format("<no email on file for {}>", entry.user);
                d.placeholder_recipient = true;
                warnings.push_back(fmt::format("no email on file for {}; draft addressed to a placeholder", entry.user));
            }

            std::vector<const SnapshotRow*> flagged;
            for (const auto& snap : snapshots) {
                for (const auto& row : snap.rows) {
                    if (row.usage.user == entry.user && classify_load(row.usage, real.thresholds).has(d.category)) {
                        flagged.push_back(&row);
                    }
                }
            }
            d.evidence = select_evidence(flagged, d.category);

            const SnapshotRow* median = nullptr;
            int current_nppn = 1;
            if (d.category == Category::low_gpu && !flagged.empty()) {
                auto by_load = flagged;
                std::sort(by_load.begin(), by_load.end(), [](const SnapshotRow* a, const SnapshotRow* b) {
                    const double la = a->usage.gpu_load_norm.value_or(0.0);
                    const double lb = b->usage.gpu_load_norm.value_or(0.0);
                    if (la != lb) return la < lb;
                    return row_time_less(a, b);
                });
                median = by_load[(by_load.size() - 1) / 2];
                // One GPU per task is the default packing, so the observed
                // task count is taken to be the number of GPUs in use.
                current_nppn = std::max(1, median->usage.gpu_used);
                try {
                    d.nppn = recommend_nppn(median->usage, current_nppn);
                } catch (const NoRecommendationError& e) {
                    warnings.push_back(e.what());
                }
            }

            const auto minutes = std::llround(real.thresholds.interval_hours * 60.0);
            std::string how;
            switch (d.category) {
                case Category::low_gpu:
                    how = fmt::format("its GPU load (mean utilization of your GPUs there) is below {}",
                                      format_load(real.thresholds.low));
                    break;
                case Category::low_cpu:
                    how = fmt::format("its CPU load (5-minute load average per core) is below {}",
                                      format_load(real.thresholds.low));
                    break;
                case Category::high_cpu:
                    how = fmt::format("its CPU load (5-minute load average per core) is above {}",
                                      format_load(real.thresholds.high_cpu));
                    break;
            }

            d.body = fmt::format("To: {}\n", d.to);
            d.body += fmt::format("Subject: Weekly utilization, {} on {}, week of {}\n\n", section_title(d.category), real.cluster,
                                  format_rfc3339(real.start).substr(0, 10));
            d.body += fmt::format("Hello {},\n\n", d.user);
            d.body += fmt::format(
                "Our weekly utilization analysis of {} recorded {} node-hours of\n{} for your jobs.\nPeriod: {} to {}\n\n",
                real.cluster, format_load(d.node_hours), section_title(d.category), format_rfc3339(real.start),
                format_rfc3339(real.end));
            d.body += fmt::format(
                "How this is measured: a snapshot of all running jobs is taken every {} minutes.\n"
                "One of your nodes is counted in a snapshot when\n  {}.\n"
                "Each counted node adds {} node-hours.\n\n",
                minutes, how, format_load(real.thresholds.interval_hours));
            d.body += fmt::format("Selected snapshot rows ({} of {} flagged):\n", d.evidence.size(), flagged.size());
            d.body += evidence_table(d.evidence);
            d.body += "\nSuggestions:\n";
            d.body += suggestions(d.category, d.nppn, median, current_nppn);
            d.body += "\nReply to this message if you would like help adjusting your jobs.\n";
            drafts.push_back(std::move(d));
        }
    }
    return drafts;
}

void write_weekly_outputs(const fs::path& out_dir, const WeeklyRun& run, const std::vector<EmailDraft>& drafts) {
    auto write = [](const fs::path& p, std::string_view content) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(fmt::format("cannot write {}", p.string()));
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    };
    fs::create_directories(out_dir / "emails");
    write(out_dir / "report.txt", run.text);
    for (const auto& d : drafts) {
        write(out_dir / "emails" / fmt::format("{}-{}.txt", d.user, to_string(d.category)), d.body);
    }
    if (run.report.anonymized) {
        std::string mapping = "section\tlabel\tuser\n";
        for (const auto& section : run.report.sections) {
            for (const auto& e : section.entries) {
                mapping += fmt::format("{}\t{}\t{}\n", to_string(section.category), e.user,
                                       section.labels.at(e.user));
            }
        }
        const auto path = out_dir / "mapping.tsv";
        write(path, "");
        fs::permissions(path, fs::perms::owner_read | fs::perms::owner_write, fs::perm_options::replace);
        write(path, mapping);
    }
}

}  // namespace hpcload
