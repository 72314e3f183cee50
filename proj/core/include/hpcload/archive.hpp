#pragma once

// Snapshot archive: <root>/<cluster>/<YYYY>/<MM>/<DD>/<HHMM>.tsv, one TSV file
// per snapshot instant. The listing is recovered from the directory tree alone.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hpcload/collectors.hpp"
#include "hpcload/model.hpp"
#include "hpcload/timeutil.hpp"

namespace hpcload {

class ArchiveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SnapshotRow {
    Instant ts{};
    std::string cluster;
    UserNodeUsage usage;

    friend bool operator==(const SnapshotRow&, const SnapshotRow&) = default;
};

/// Reads the output of render_tsv back. Throws ParseError.
std::vector<SnapshotRow> parse_snapshot_tsv(std::string_view text);

class SnapshotArchive {
  public:
    SnapshotArchive(std::filesystem::path root, std::string cluster);

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::string& cluster() const noexcept { return cluster_; }
    std::filesystem::path cluster_dir() const { return root_ / cluster_; }
    std::filesystem::path path_for(Instant ts) const;

  private:
    std::filesystem::path root_;
    std::string cluster_;
};

/// Cluster names present under an archive root.
std::vector<std::string> list_clusters(const std::filesystem::path& root);

struct TakeResult {
    std::filesystem::path path;
    Instant aligned{};
    std::vector<std::string> notes;
};

/// Writes the all-users GPU TSV of `view`, stamped with its timestamp floored
/// onto the interval grid. The file is written to a temporary name and renamed
/// into place, so rewriting an instant replaces the file whole.
TakeResult take_snapshot(const ClusterView& view, const SnapshotArchive& archive,
                         double interval_hours = 0.25);

struct Snapshot {
    Instant ts{};
    std::filesystem::path path;
    std::vector<SnapshotRow> rows;
};

struct RangeResult {
    std::vector<Snapshot> snapshots;  ///< ascending by ts
    std::vector<std::string> warnings;
};

/// Every snapshot with start <= ts < end. Unreadable files are reported in
/// `warnings` and skipped. Throws ArchiveError when the cluster directory is
/// missing.
RangeResult read_range(const SnapshotArchive& archive, Instant start, Instant end);

}  // namespace hpcload
