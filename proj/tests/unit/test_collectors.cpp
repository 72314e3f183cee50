#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "hpcload/collectors.hpp"
#include "test_support.hpp"

using namespace hpcload;
namespace ht = hpcload::testing;

namespace {

const std::string kNodes = std::string(kNodeTableHeader) +
                           "\n"
                           "c-8-6-1|40|20|8.00|393216|64512|2|1|mixed\n"
                           "c-8-6-2|40|40|66.10|393216|120000|2|2|alloc\n"
                           "c-9-1-1|48|0|0.00|196608|2048|0|0|idle\n";
const std::string kJobs = std::string(kJobTableHeader) +
                          "\n"
                          "1234|alice|c-8-6-1|batch|20|1|running|train\n"
                          "1240|bob|c-8-6-2|batch|20|1|running|sim\n"
                          "1239|bob|c-8-6-2|batch|20|1|running|sim\n"
                          "1300|carol||batch|4|0|pending|later\n";

std::string expect_parse_error(auto&& fn) {
    try {
        fn();
    } catch (const ParseError& e) {
        return e.what();
    }
    ADD_FAILURE() << "no ParseError";
    return {};
}

}  // namespace

TEST(NodeTable, ParsesFields) {
    const auto nodes = parse_node_table(kNodes);
    ASSERT_EQ(nodes.size(), 3u);
    const NodeRecord expect{"c-8-6-1", 40, 20, 8.0, 393216, 64512, 2, 1, NodeState::mixed};
    EXPECT_EQ(nodes[0], expect);
    EXPECT_EQ(nodes[2].state, NodeState::idle);
}

TEST(NodeTable, HeaderOnlyIsEmpty) {
    EXPECT_TRUE(parse_node_table(std::string(kNodeTableHeader) + "\n").empty());
}

TEST(NodeTable, ErrorsCarryLineNumbers) {
    const auto h = std::string(kNodeTableHeader) + "\n";
    auto msg = expect_parse_error([&] { parse_node_table(h + "a|1|0|0.00|1|0|0|0|idle\nn1|40|50|1.00|1|0|0|0|mixed\n"); });
    EXPECT_NE(msg.find(":3:"), std::string::npos) << msg;
    msg = expect_parse_error([&] { parse_node_table(h + "n1|40|0|1.00|1|0|0|0|sleeping\n"); });
    EXPECT_NE(msg.find("sleeping"), std::string::npos) << msg;
    expect_parse_error([&] { parse_node_table(h + "n1|40|0|1.00|1|0|0|0\n"); });
    expect_parse_error([&] { parse_node_table(h + "n1|0|0|1.00|1|0|0|0|idle\n"); });
    expect_parse_error([&] { parse_node_table(h + "n1|4x|0|1.00|1|0|0|0|idle\n"); });
    expect_parse_error([&] { parse_node_table(h + "n1|4|0|-1.00|1|0|0|0|idle\n"); });
    expect_parse_error([&] { parse_node_table(h + "n1|4|0|1.00|1|2|0|0|idle\n"); });
    expect_parse_error([&] { parse_node_table("NODE|CORES\n"); });
    expect_parse_error([&] { parse_node_table(""); });
}

TEST(JobTable, ParsesFieldsAndPending) {
    const auto jobs = parse_job_table(kJobs);
    ASSERT_EQ(jobs.size(), 4u);
    const JobRecord expect{"1234", "alice", "c-8-6-1", JobType::batch, 20, 1, JobState::running, "train"};
    EXPECT_EQ(jobs[0], expect);
    EXPECT_EQ(jobs[3].state, JobState::pending);
    EXPECT_TRUE(jobs[3].node_name.empty());
}

TEST(JobTable, Errors) {
    const auto h = std::string(kJobTableHeader) + "\n";
    expect_parse_error([&] { parse_job_table(h + "1|a|n|cron|1|0|running|x\n"); });
    expect_parse_error([&] { parse_job_table(h + "1|a|n|batch|0|0|running|x\n"); });
    expect_parse_error([&] { parse_job_table(h + "1|a||batch|1|0|running|x\n"); });
    expect_parse_error([&] { parse_job_table(h + "1|a|n|batch|1|0|done|x\n"); });
    expect_parse_error([&] { parse_job_table(h + "1|a|n|batch|1|0|running\n"); });
}

TEST(GpuCsv, ParsesAndValidates) {
    const auto g = parse_gpu_csv("c-8-6-1", "0,45,2048,65536\n1,0,0,65536\n");
    ASSERT_EQ(g.size(), 2u);
    const GpuRecord expect{"c-8-6-1", 0, 45, 2048, 65536};
    EXPECT_EQ(g[0], expect);
    EXPECT_EQ(mb_to_gb_floor(g[0].mem_used_mb), 2);
    EXPECT_EQ(mb_to_gb_round(g[0].mem_total_mb), 64);
    expect_parse_error([] { parse_gpu_csv("n", "0,101,0,65536\n"); });
    expect_parse_error([] { parse_gpu_csv("n", "0,1,0,65536\n0,2,0,65536\n"); });
    expect_parse_error([] { parse_gpu_csv("n", "0,1,70000,65536\n"); });
    expect_parse_error([] { parse_gpu_csv("n", "0,1,0\n"); });
    const auto msg = expect_parse_error([] { parse_gpu_csv("c-1", "0,1,0,1\n1,-3,0,1\n"); });
    EXPECT_NE(msg.find("gpu/c-1.csv:2:"), std::string::npos) << msg;
}

TEST(UserTable, CommentsInvalidEntriesAndLastWins) {
    const auto t = load_user_table("# staff\nalice\talice@example.org\nbob\tnot-an-address\nalice\tali@example.org\nnotab\n");
    ASSERT_EQ(t.entries.size(), 1u);
    EXPECT_EQ(t.entries.at("alice"), "ali@example.org");
    EXPECT_EQ(t.warnings.size(), 2u);
    ASSERT_NE(t.email_of("alice"), nullptr);
    EXPECT_EQ(t.email_of("bob"), nullptr);
    EXPECT_TRUE(load_user_table("# comment only\n").entries.empty());
}

TEST(RoundTrip, EmitParseIsIdentityOnFixtures) {
    EXPECT_EQ(emit_node_table(parse_node_table(kNodes)), kNodes);
    EXPECT_EQ(emit_job_table(parse_job_table(kJobs)), kJobs);
    const std::string csv = "0,45,2048,65536\n1,0,0,65536\n";
    EXPECT_EQ(emit_gpu_csv(parse_gpu_csv("n", csv)), csv);
}

TEST(RoundTrip, RandomClustersParseAndReemitIdentically) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 300; ++i) {
        const auto files = ht::random_cluster_files(rng, Instant{});
        EXPECT_EQ(emit_node_table(parse_node_table(files.nodes)), files.nodes);
        EXPECT_EQ(emit_job_table(parse_job_table(files.jobs)), files.jobs);
        for (const auto& [node, text] : files.gpu) EXPECT_EQ(emit_gpu_csv(parse_gpu_csv(node, text)), text);
    }
}

TEST(Assemble, ResolvesSmallCluster) {
    const auto view = assemble_cluster_view(parse_node_table(kNodes), parse_job_table(kJobs),
                                            {{"c-8-6-1", "0,45,2048,65536\n1,0,0,65536\n"},
                                             {"c-8-6-2", "0,90,1024,65536\n1,80,1024,65536\n"}},
                                            load_user_table("alice\talice@example.org\n"), Instant{}, "tx");
    EXPECT_EQ(view.cluster_name, "tx");
    EXPECT_EQ(view.nodes.size(), 3u);
    EXPECT_EQ(view.jobs.size(), 4u);
    EXPECT_EQ(view.gpu_records.size(), 4u);
    EXPECT_TRUE(view.warnings.empty());
    // jobs ordered by (node, numeric id), pending job (no node) first
    EXPECT_EQ(view.jobs[0].job_id, "1300");
    EXPECT_EQ(view.jobs[2].job_id, "1239");
    ASSERT_NE(view.find_node("c-9-1-1"), nullptr);
    EXPECT_EQ(view.find_node("nope"), nullptr);
}

TEST(Assemble, UnknownNodeIsAnError) {
    const auto jobs = parse_job_table(std::string(kJobTableHeader) + "\n77|zed|ghost-1|batch|1|0|running|x\n");
    try {
        assemble_cluster_view(parse_node_table(kNodes), jobs, {}, {}, Instant{});
        FAIL();
    } catch (const AssemblyError& e) {
        EXPECT_NE(std::string(e.what()).find("77"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("ghost-1"), std::string::npos);
    }
}

TEST(Assemble, DuplicateNodeIsAnError) {
    auto nodes = parse_node_table(kNodes);
    nodes.push_back(nodes.front());
    EXPECT_THROW(assemble_cluster_view(nodes, {}, {}, {}, Instant{}), AssemblyError);
}

TEST(Assemble, MissingGpuTextDegradesWithWarning) {
    const auto view = assemble_cluster_view(parse_node_table(kNodes), parse_job_table(kJobs),
                                            {{"c-8-6-1", "0,45,2048,65536\n1,0,0,65536\n"}}, {}, Instant{});
    EXPECT_EQ(view.stale_gpu_nodes, std::set<std::string>{"c-8-6-2"});
    ASSERT_EQ(view.warnings.size(), 1u);
    const auto usage = collect_usage(view);
    const auto bob = std::find_if(usage.rows.begin(), usage.rows.end(), [](auto& r) { return r.user == "bob"; });
    ASSERT_NE(bob, usage.rows.end());
    EXPECT_EQ(bob->gpu_used, 2);
    EXPECT_FALSE(bob->gpu_load_norm.has_value());
}

TEST(Assemble, OrderInsensitive) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const auto files = ht::random_cluster_files(rng, Instant{});
        auto nodes = parse_node_table(files.nodes);
        auto jobs = parse_job_table(files.jobs);
        const auto users = load_user_table(files.users);
        const auto a = assemble_cluster_view(nodes, jobs, files.gpu, users, Instant{});
        std::shuffle(nodes.begin(), nodes.end(), rng);
        std::shuffle(jobs.begin(), jobs.end(), rng);
        const auto b = assemble_cluster_view(nodes, jobs, files.gpu, users, Instant{});
        EXPECT_EQ(a, b);
    }
}

TEST(Usage, RowsSortedByUserThenNode) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const auto view = assemble_from_files(ht::random_cluster_files(rng, Instant{}));
        const auto rows = collect_usage(view).rows;
        EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return std::tie(a.user, a.node_name) < std::tie(b.user, b.node_name);
        }));
    }
}

TEST(ClusterDir, WriteReadRoundTrip) {
    ht::TempDir tmp;
    std::mt19937_64 rng(3);
    auto files = ht::random_cluster_files(rng, Instant{std::chrono::seconds{1709546400}});
    write_cluster_files(tmp / "c", files);
    EXPECT_TRUE(std::filesystem::exists(tmp / "c" / "nodes.txt"));
    EXPECT_EQ(read_cluster_files(tmp / "c"), files);
    EXPECT_THROW(read_cluster_files(tmp / "missing"), std::runtime_error);
}

TEST(ClusterDir, MetaFallsBackToDirectoryName) {
    ht::TempDir tmp;
    ht::write_text(tmp / "alpha" / "nodes.txt", kNodes);
    ht::write_text(tmp / "alpha" / "jobs.txt", kJobs);
    const auto files = read_cluster_files(tmp / "alpha");
    EXPECT_EQ(files.cluster_name, "alpha");
    ht::write_text(tmp / "alpha" / "cluster.tsv", "cluster\tx\ntimestamp\tyesterday\n");
    EXPECT_THROW(read_cluster_files(tmp / "alpha"), ParseError);
}
