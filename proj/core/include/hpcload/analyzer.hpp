#pragma once

// Weekly analysis over the snapshot archive: every archived (user, node,
// snapshot) row is classified on its own, flagged rows are summed into
// node-hours per user and category, and the top users per category are ranked.

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpcload/archive.hpp"
#include "hpcload/model.hpp"

namespace hpcload {

struct NodeHours {
    std::size_t instances = 0;
    double node_hours = 0.0;  ///< instances * interval_hours

    friend bool operator==(const NodeHours&, const NodeHours&) = default;
};

using NodeHoursMap = std::map<std::pair<std::string, Category>, NodeHours>;

NodeHoursMap compute_node_hours(std::span<const Snapshot> snapshots, const Thresholds& t);

struct RankedEntry {
    int rank = 0;
    std::string user;
    double node_hours = 0.0;
    std::size_t instances = 0;

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// The k users with the most node-hours in `category`; ties go to the
/// alphabetically smaller user name.
std::vector<RankedEntry> rank_top(const NodeHoursMap& hours, Category category, std::size_t k = 10);

struct ReportSection {
    Category category = Category::low_gpu;
    std::vector<RankedEntry> entries;
    std::map<std::string, std::string> labels;  ///< pseudonym -> real user, empty unless anonymized

    friend bool operator==(const ReportSection&, const ReportSection&) = default;
};

struct WeeklyReport {
    std::string cluster;
    Instant start{};
    Instant end{};
    Thresholds thresholds;
    std::size_t snapshot_count = 0;
    std::array<ReportSection, 3> sections{
        ReportSection{Category::low_gpu, {}, {}}, ReportSection{Category::low_cpu, {}, {}},
        ReportSection{Category::high_cpu, {}, {}}};
    bool anonymized = false;
    std::vector<std::string> notes;

    const ReportSection& section(Category c) const;
    ReportSection& section(Category c);
    friend bool operator==(const WeeklyReport&, const WeeklyReport&) = default;
};

/// Replaces user names by user01, user02, ... in rank order, independently per
/// section. The label -> user maps stay in the report for email drafting.
WeeklyReport anonymize(WeeklyReport report);
WeeklyReport deanonymize(WeeklyReport report);

std::string render_report(const WeeklyReport& report);

struct WeeklyRun {
    WeeklyReport report;
    std::string text;
    RangeResult data;
};

/// read_range -> compute_node_hours -> rank_top per category -> anonymize.
/// `start` must sit on the snapshot grid.
WeeklyRun build_weekly_report(const SnapshotArchive& archive, Instant start, const Thresholds& t,
                              bool anonymize_users = true, std::chrono::days length = std::chrono::days{7});

struct EmailDraft {
    std::string to;
    bool placeholder_recipient = false;
    std::string user;
    Category category = Category::low_gpu;
    double node_hours = 0.0;
    std::vector<SnapshotRow> evidence;
    std::optional<NppnRecommendation> nppn;
    std::string body;
};

inline constexpr std::size_t kMaxEvidenceRows = 12;

/// One draft per (user, category) listed in the report. Evidence holds the
/// earliest and latest flagged rows plus the most extreme ones, at most
/// kMaxEvidenceRows, in time order. Low-GPU drafts carry an NPPN suggestion
/// computed from the user's median flagged row.
std::vector<EmailDraft> draft_emails(const WeeklyReport& report,
                                     const std::map<std::string, std::string>& user_table,
                                     std::span<const Snapshot> snapshots, std::vector<std::string>& warnings);

/// report.txt, emails/<user>-<category>.txt and, for anonymized reports, an
/// owner-only mapping.tsv.
void write_weekly_outputs(const std::filesystem::path& out_dir, const WeeklyRun& run,
                          const std::vector<EmailDraft>& drafts);

}  // namespace hpcload
