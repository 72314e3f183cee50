#include <random>

#include <gtest/gtest.h>

#include "hpcload/archive.hpp"
#include "hpcload/render.hpp"
#include "test_support.hpp"

using namespace hpcload;
namespace ht = hpcload::testing;
using namespace std::chrono;

namespace {

Instant at(const char* s) { return *parse_rfc3339(s); }

ClusterView random_view(std::mt19937_64& rng, Instant ts) {
    return assemble_from_files(ht::random_cluster_files(rng, ts));
}

}  // namespace

TEST(Layout, PathFromTimestamp) {
    const SnapshotArchive a("/arch", "txg");
    EXPECT_EQ(a.path_for(at("2024-03-05T09:45:00Z")), "/arch/txg/2024/03/05/0945.tsv");
    EXPECT_EQ(a.path_for(at("2024-12-31T23:00:00Z")), "/arch/txg/2024/12/31/2300.tsv");
}

TEST(Take, AlignsToGridAndWritesTsv) {
    ht::TempDir tmp;
    std::mt19937_64 rng(1);
    const SnapshotArchive a(tmp.path(), "rnd");
    auto view = random_view(rng, at("2024-03-05T10:07:31Z"));
    const auto r = take_snapshot(view, a);
    EXPECT_EQ(r.aligned, at("2024-03-05T10:00:00Z"));
    EXPECT_EQ(r.path, tmp / "rnd/2024/03/05/1000.tsv");
    EXPECT_EQ(r.notes.size(), 1u);
    view.timestamp = r.aligned;
    EXPECT_EQ(ht::read_text(r.path), render_tsv(view, std::nullopt, true));
    // nothing left behind but the snapshot itself
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(tmp.path())) files += e.is_regular_file();
    EXPECT_EQ(files, 1u);
}

TEST(Take, RewritingAnInstantReplacesTheFile) {
    ht::TempDir tmp;
    std::mt19937_64 rng(2);
    const SnapshotArchive a(tmp.path(), "rnd");
    const auto t = at("2024-03-05T10:15:00Z");
    take_snapshot(random_view(rng, t), a);
    const auto second = random_view(rng, t);
    const auto r = take_snapshot(second, a);
    EXPECT_EQ(ht::read_text(r.path), render_tsv(second, std::nullopt, true));
}

TEST(Take, RejectsOddIntervals) {
    ht::TempDir tmp;
    std::mt19937_64 rng(3);
    EXPECT_THROW(take_snapshot(random_view(rng, Instant{}), SnapshotArchive(tmp.path(), "x"), 0.0001),
                 std::invalid_argument);
}

TEST(Range, HalfOpenAndSorted) {
    ht::TempDir tmp;
    std::mt19937_64 rng(4);
    const SnapshotArchive a(tmp.path(), "rnd");
    const auto start = at("2024-03-04T23:00:00Z");
    std::vector<Instant> written;
    for (int i = 0; i < 12; ++i) {
        const Instant t = start + minutes{15 * i};
        take_snapshot(random_view(rng, t), a);
        written.push_back(t);
    }
    const auto all = read_range(a, start, start + hours{3});
    ASSERT_EQ(all.snapshots.size(), 12u);
    EXPECT_TRUE(all.warnings.empty());
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(all.snapshots[i].ts, written[i]);

    const auto part = read_range(a, written[2], written[5]);
    ASSERT_EQ(part.snapshots.size(), 3u);
    EXPECT_EQ(part.snapshots.front().ts, written[2]);
    EXPECT_EQ(part.snapshots.back().ts, written[4]);
    EXPECT_TRUE(read_range(a, written[3], written[3]).snapshots.empty());
    EXPECT_THROW(read_range(a, written[3], written[2]), std::invalid_argument);
}

TEST(Range, ContentsMatchWhatWasTaken) {
    ht::TempDir tmp;
    std::mt19937_64 rng(5);
    const SnapshotArchive a(tmp.path(), "rnd");
    const auto t = at("2024-03-05T12:30:00Z");
    const auto view = random_view(rng, t);
    take_snapshot(view, a);
    const auto got = read_range(a, t, t + minutes{15});
    ASSERT_EQ(got.snapshots.size(), 1u);
    EXPECT_EQ(got.snapshots[0].rows, parse_snapshot_tsv(render_tsv(view, std::nullopt, true)));
}

TEST(Range, CorruptAndStrayFilesAreSkippedWithWarnings) {
    ht::TempDir tmp;
    std::mt19937_64 rng(6);
    const SnapshotArchive a(tmp.path(), "rnd");
    const auto t = at("2024-03-05T00:00:00Z");
    take_snapshot(random_view(rng, t), a);
    take_snapshot(random_view(rng, t + minutes{15}), a);
    ht::write_text(a.path_for(t + minutes{30}), "garbage\n");
    ht::write_text(tmp / "rnd/2024/03/05/notes.txt", "hello");
    ht::write_text(tmp / "rnd/2024/03/05/.0045.tsv.tmp.123", "partial");
    // a file whose rows carry another timestamp
    const auto moved = ht::read_text(a.path_for(t));
    ht::write_text(a.path_for(t + minutes{60}), moved);

    const auto r = read_range(a, t, t + hours{2});
    EXPECT_EQ(r.snapshots.size(), 2u);
    EXPECT_EQ(r.warnings.size(), 3u);
}

TEST(Range, MissingClusterIsAnError) {
    ht::TempDir tmp;
    EXPECT_THROW(read_range(SnapshotArchive(tmp.path(), "none"), Instant{}, Instant{} + hours{1}), ArchiveError);
}

TEST(Range, ListClusters) {
    ht::TempDir tmp;
    std::mt19937_64 rng(7);
    take_snapshot(random_view(rng, Instant{}), SnapshotArchive(tmp.path(), "b"));
    take_snapshot(random_view(rng, Instant{}), SnapshotArchive(tmp.path(), "a"));
    EXPECT_EQ(list_clusters(tmp.path()), (std::vector<std::string>{"a", "b"}));
}

TEST(SnapshotTsv, ParseErrors) {
    const std::string h = std::string(kTsvHeader) + "\n";
    EXPECT_THROW(parse_snapshot_tsv("ts\tcluster\n"), ParseError);
    EXPECT_THROW(parse_snapshot_tsv(h + "x\n"), ParseError);
    EXPECT_THROW(parse_snapshot_tsv(h + "2024-03-05T00:00:00Z\tc\tu\tn\tbatch\t40\t20\t21\t0.10\t384\t1\t383\t0\t-\t-\t-\t-\t-\t-\n"),
                 ParseError);
    EXPECT_TRUE(parse_snapshot_tsv(h).empty());
}
