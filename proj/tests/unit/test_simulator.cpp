#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "hpcload/analyzer.hpp"
#include "hpcload/render.hpp"
#include "hpcload/simulator.hpp"
#include "test_support.hpp"

using namespace hpcload;
namespace ht = hpcload::testing;

namespace {

ScenarioConfig config(Preset p, std::uint64_t seed = 1, double hours = 6.0) {
    ScenarioConfig c;
    c.preset = p;
    c.seed = seed;
    c.duration_hours = hours;
    return c;
}

constexpr Preset kPresets[] = {Preset::healthy, Preset::lowgpu, Preset::misalloc, Preset::threadstorm,
                               Preset::mixed};

std::vector<ClusterView> views_of(const std::vector<ClusterFiles>& timeline) {
    std::vector<ClusterView> out;
    for (const auto& f : timeline) out.push_back(assemble_from_files(f));
    return out;
}

}  // namespace

TEST(Simulator, PresetNames) {
    for (auto p : kPresets) EXPECT_EQ(preset_from(to_string(p)), p);
    EXPECT_FALSE(preset_from("chaos").has_value());
}

TEST(Simulator, ConfigValidation) {
    auto c = config(Preset::healthy);
    c.nodes = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = config(Preset::healthy);
    c.duration_hours = 1.1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = config(Preset::misalloc);
    c.nodes = 4;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = config(Preset::lowgpu);
    c.gpus_per_node = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    EXPECT_EQ(config(Preset::healthy, 1, 24).interval_count(), 96u);
}

TEST(Simulator, SameSeedSameBytes) {
    for (auto p : kPresets) {
        EXPECT_EQ(generate_timeline(config(p, 42)), generate_timeline(config(p, 42))) << to_string(p);
        EXPECT_NE(generate_timeline(config(p, 42)), generate_timeline(config(p, 43))) << to_string(p);
    }
}

TEST(Simulator, WrittenTreesAreByteIdentical) {
    ht::TempDir a, b;
    const auto timeline = generate_timeline(config(Preset::mixed, 9, 1.0));
    write_timeline(a.path(), timeline);
    write_timeline(b.path(), generate_timeline(config(Preset::mixed, 9, 1.0)));
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
        if (!e.is_regular_file()) continue;
        ++files;
        const auto rel = std::filesystem::relative(e.path(), a.path());
        EXPECT_EQ(ht::read_text(e.path()), ht::read_text(b.path() / rel)) << rel;
    }
    EXPECT_GT(files, 0u);
    EXPECT_TRUE(std::filesystem::is_directory(a / "2024-03-04T00:00:00Z"));
    EXPECT_TRUE(std::filesystem::is_directory(a / "2024-03-04T00:45:00Z"));
    EXPECT_EQ(read_cluster_files(a / "2024-03-04T00:15:00Z"), timeline[1]);
}

TEST(Simulator, OneFileSetPerIntervalOnTheGrid) {
    const auto c = config(Preset::healthy, 1, 3.0);
    const auto timeline = generate_timeline(c);
    ASSERT_EQ(timeline.size(), 12u);
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        EXPECT_EQ(timeline[i].timestamp, c.start + std::chrono::minutes{15} * static_cast<int>(i));
        EXPECT_EQ(timeline[i].cluster_name, "sim");
    }
}

// Every generated state parses through the collectors, for a spread of shapes.
TEST(Simulator, GrammarTotality) {
    for (auto p : kPresets) {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            for (int nodes : {5, 9, 33}) {
                auto c = config(p, seed, 2.0);
                c.nodes = nodes;
                c.users = 3 + static_cast<int>(seed);
                c.cores_per_node = 16 + 8 * static_cast<int>(seed);
                for (const auto& files : generate_timeline(c)) {
                    ClusterView v;
                    ASSERT_NO_THROW(v = assemble_from_files(files)) << to_string(p);
                    EXPECT_TRUE(v.warnings.empty()) << to_string(p) << ": " << v.warnings.front();
                    EXPECT_EQ(static_cast<int>(v.nodes.size()), nodes);
                    EXPECT_TRUE(load_user_table(files.users).warnings.empty());
                }
            }
        }
    }
}

TEST(Simulator, WholeNodeInvariantOutsideJupyterNodes) {
    for (auto p : kPresets) {
        for (const auto& v : views_of(generate_timeline(config(p, 5)))) {
            std::map<std::string, std::set<std::string>> users_on;
            std::map<std::string, bool> jupyter_only;
            for (const auto& j : v.jobs) {
                if (j.state != JobState::running) continue;
                users_on[j.node_name].insert(j.user);
                auto [it, fresh] = jupyter_only.emplace(j.node_name, true);
                it->second = it->second && j.type == JobType::jupyter;
            }
            for (const auto& [node, users] : users_on) {
                if (!jupyter_only[node]) EXPECT_EQ(users.size(), 1u) << to_string(p) << " " << node;
            }
            // allocation counters agree with the job table
            for (const auto& n : v.nodes) {
                int cores = 0, gpus = 0;
                for (const auto& j : v.jobs) {
                    if (j.node_name == n.name) {
                        cores += j.cores_req;
                        gpus += j.gpus_req;
                    }
                }
                EXPECT_EQ(n.cores_alloc, cores);
                EXPECT_EQ(n.gpus_alloc, gpus);
            }
        }
    }
}

TEST(Simulator, HealthyLoadsStayInEnvelope) {
    for (const auto& v : views_of(generate_timeline(config(Preset::healthy, 3, 24)))) {
        for (const auto& n : v.nodes) {
            const double l = n.load5 / n.cores_total;
            EXPECT_GE(l, 0.70 - 1e-12) << n.name;
            EXPECT_LE(l, 1.00 + 1e-12) << n.name;
        }
        for (const auto& g : v.gpu_records) {
            EXPECT_GE(g.util_percent, 70);
            EXPECT_LE(g.util_percent, 95);
        }
    }
}

TEST(Simulator, LowGpuRowsClassifyLowGpu) {
    const auto s = build_scenario(config(Preset::lowgpu, 4, 24));
    const std::set<std::string> designated(s.designated_nodes.begin(), s.designated_nodes.end());
    std::vector<SnapshotRow> rows;
    for (const auto& v : views_of(generate_timeline(s))) {
        for (const auto& u : collect_usage(v).rows) {
            if (u.user != s.designated_user) continue;
            EXPECT_TRUE(designated.count(u.node_name));
            ASSERT_TRUE(u.gpu_load_norm.has_value());
            EXPECT_GE(*u.gpu_load_norm, 0.23);
            EXPECT_LT(*u.gpu_load_norm, 0.45);
            EXPECT_EQ(u.gpu_used, 1);
            EXPECT_EQ(*u.gpu_mem_used_gb, 2);
            EXPECT_EQ(*u.gpu_mem_total_gb, 64);
            EXPECT_EQ(u.mem_used_gb, 63);
            EXPECT_EQ(u.mem_total_gb, 384);
            EXPECT_TRUE(classify_load(u, Thresholds{}).low_gpu);
            rows.push_back({v.timestamp, v.cluster_name, u});
        }
    }
    ASSERT_FALSE(rows.empty());
    std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return *a.usage.gpu_load_norm < *b.usage.gpu_load_norm; });
    const auto r = recommend_nppn(rows[(rows.size() - 1) / 2].usage, 1);
    EXPECT_GE(r.nppn, 4);
    EXPECT_LE(r.nppn, 8);
}

TEST(Simulator, LowGpuCpuFlagsVanishWithBusierCpuEnvelope) {
    auto c = config(Preset::lowgpu, 4, 12);
    c.designated_cpu_load = Envelope{0.5, 0.9};
    const auto s = build_scenario(c);
    for (const auto& v : views_of(generate_timeline(s))) {
        for (const auto& u : collect_usage(v).rows) {
            if (u.user != s.designated_user) continue;
            const auto f = classify_load(u, Thresholds{});
            EXPECT_FALSE(f.low_cpu);
            EXPECT_FALSE(f.high_cpu);
            EXPECT_TRUE(f.low_gpu);
        }
    }
}

TEST(Simulator, MisallocPhases) {
    const auto s = build_scenario(config(Preset::misalloc, 6, 24));
    ASSERT_EQ(s.phases.size(), 2u);
    const std::size_t switch_at = s.phases[1].first_interval;
    EXPECT_EQ(switch_at, 48u);
    EXPECT_EQ(s.designated_nodes, (std::vector<std::string>{"c-8-6-1", "c-8-6-2", "c-8-6-3", "c-8-6-4", "c-8-6-5"}));

    const auto views = views_of(generate_timeline(s));
    double sum1 = 0, sum2 = 0;
    std::size_t n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < views.size(); ++i) {
        std::map<std::string, int> jobs_on;
        int job_count = 0;
        for (const auto& j : views[i].jobs) {
            if (j.user != s.designated_user) continue;
            ++jobs_on[j.node_name];
            ++job_count;
            EXPECT_EQ(j.gpus_req, 1);
        }
        EXPECT_EQ(job_count, 5);
        for (const auto& u : collect_usage(views[i]).rows) {
            if (u.user != s.designated_user) continue;
            if (i < switch_at) {
                EXPECT_EQ(u.gpu_used, 1);
                EXPECT_EQ(u.gpu_total, 2);
                sum1 += *u.gpu_load_norm;
                ++n1;
            } else {
                sum2 += *u.gpu_load_norm;
                ++n2;
            }
        }
        if (i < switch_at) {
            EXPECT_EQ(jobs_on.size(), 5u);
        } else {
            EXPECT_EQ(jobs_on, (std::map<std::string, int>{{"c-8-6-1", 1}, {"c-8-6-2", 2}, {"c-8-6-3", 2}}));
        }
    }
    ASSERT_GT(n1, 0u);
    ASSERT_GT(n2, 0u);
    EXPECT_GT(sum2 / static_cast<double>(n2), sum1 / static_cast<double>(n1));
}

TEST(Simulator, ThreadstormNodesDominateTop) {
    const auto s = build_scenario(config(Preset::threadstorm, 8, 6));
    const std::set<std::string> designated(s.designated_nodes.begin(), s.designated_nodes.end());
    for (const auto& v : views_of(generate_timeline(s))) {
        for (const auto& n : v.nodes) {
            if (!designated.count(n.name)) continue;
            EXPECT_GE(n.load5, 1.8 * n.cores_total - 1e-9);
            EXPECT_LE(n.load5, 6.0 * n.cores_total + 1e-9);
            int jobs = 0;
            for (const auto& j : v.jobs) jobs += j.node_name == n.name;
            EXPECT_EQ(jobs, 1);
        }
        const auto top = ht::lines_of(render_top_view(v, static_cast<int>(designated.size())));
        for (std::size_t i = 1; i < top.size(); ++i) {
            EXPECT_TRUE(designated.count(top[i].substr(0, top[i].find(' ')))) << top[i];
        }
        for (const auto& u : collect_usage(v).rows) {
            if (u.user == s.designated_user) EXPECT_TRUE(classify_load(u, Thresholds{}).high_cpu);
        }
    }
}

TEST(Simulator, MixedHasSharedJupyterNode) {
    const auto s = build_scenario(config(Preset::mixed, 2, 1));
    const auto v = assemble_from_files(generate_timeline(s).front());
    std::map<std::string, std::set<std::string>> jupyter_users;
    for (const auto& j : v.jobs) {
        if (j.type == JobType::jupyter) jupyter_users[j.node_name].insert(j.user);
    }
    ASSERT_EQ(jupyter_users.size(), 1u);
    EXPECT_GE(jupyter_users.begin()->second.size(), 2u);
    EXPECT_NE(render_all_view(v, false).find("JUPYTER SESSIONS\n  NODE"), std::string::npos);
}

// A complete simulated week stays under the 7 x 24 h per node bound.
TEST(Simulator, WeekNodeHoursBoundedByWallClock) {
    ht::TempDir tmp;
    auto c = config(Preset::mixed, 3, 168);
    c.nodes = 8;
    const SnapshotArchive archive(tmp.path(), c.cluster_name);
    const auto timeline = generate_timeline(c);
    ASSERT_EQ(timeline.size(), 672u);
    std::map<std::string, std::set<std::string>> nodes_of;
    for (const auto& f : timeline) {
        const auto v = assemble_from_files(f);
        for (const auto& u : collect_usage(v).rows) nodes_of[u.user].insert(u.node_name);
        take_snapshot(v, archive);
    }
    const auto run = build_weekly_report(archive, c.start, Thresholds{}, false);
    EXPECT_EQ(run.report.snapshot_count, 672u);
    for (const auto& section : run.report.sections) {
        for (const auto& e : section.entries) {
            EXPECT_LE(e.node_hours, 168.0 * static_cast<double>(nodes_of[e.user].size())) << e.user;
        }
    }
    // users[2] idles on its nodes the whole week: every node-interval counts
    const auto& low_cpu = run.report.section(Category::low_cpu).entries;
    const auto idle = std::find_if(low_cpu.begin(), low_cpu.end(), [](auto& e) { return e.user == "chen"; });
    ASSERT_NE(idle, low_cpu.end());
    EXPECT_EQ(idle->node_hours, 168.0 * static_cast<double>(nodes_of["chen"].size()));
}
