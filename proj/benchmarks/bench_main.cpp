#include <benchmark/benchmark.h>

#include <filesystem>
#include <random>

#include "hpcload/analyzer.hpp"
#include "hpcload/archive.hpp"
#include "hpcload/collectors.hpp"
#include "hpcload/render.hpp"
#include "hpcload/simulator.hpp"

using namespace hpcload;

namespace {

ScenarioConfig cluster_config(int nodes, double hours = 0.25) {
    ScenarioConfig c;
    c.preset = Preset::mixed;
    c.nodes = nodes;
    c.users = std::max(4, nodes / 8);
    c.duration_hours = hours;
    return c;
}

ClusterFiles one_state(int nodes) { return generate_timeline(cluster_config(nodes)).front(); }

}  // namespace

static void BM_ParseAndAssemble(benchmark::State& state) {
    const auto files = one_state(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(assemble_from_files(files));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseAndAssemble)->Arg(64)->Arg(512)->Arg(4096);

static void BM_CollectUsage(benchmark::State& state) {
    const auto view = assemble_from_files(one_state(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(collect_usage(view));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CollectUsage)->Arg(64)->Arg(512)->Arg(4096);

static void BM_RenderAllView(benchmark::State& state) {
    const auto view = assemble_from_files(one_state(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(render_all_view(view, true));
}
BENCHMARK(BM_RenderAllView)->Arg(64)->Arg(512);

static void BM_RenderTop(benchmark::State& state) {
    const auto view = assemble_from_files(one_state(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(render_top_view(view, 10));
}
BENCHMARK(BM_RenderTop)->Arg(512)->Arg(4096);

static void BM_SnapshotTsvRoundTrip(benchmark::State& state) {
    const auto view = assemble_from_files(one_state(static_cast<int>(state.range(0))));
    for (auto _ : state) benchmark::DoNotOptimize(parse_snapshot_tsv(render_tsv(view, std::nullopt, true)));
}
BENCHMARK(BM_SnapshotTsvRoundTrip)->Arg(64)->Arg(512);

static void BM_NodeHoursWeek(benchmark::State& state) {
    const auto config = cluster_config(static_cast<int>(state.range(0)), 168);
    std::vector<Snapshot> snaps;
    for (const auto& files : generate_timeline(config)) {
        const auto view = assemble_from_files(files);
        snaps.push_back({view.timestamp, {}, parse_snapshot_tsv(render_tsv(view, std::nullopt, true))});
    }
    for (auto _ : state) {
        const auto hours = compute_node_hours(snaps, Thresholds{});
        for (auto c : kAllCategories) benchmark::DoNotOptimize(rank_top(hours, c));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(snaps.size()));
}
BENCHMARK(BM_NodeHoursWeek)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_GenerateDay(benchmark::State& state) {
    const auto config = cluster_config(static_cast<int>(state.range(0)), 24);
    for (auto _ : state) benchmark::DoNotOptimize(generate_timeline(config));
}
BENCHMARK(BM_GenerateDay)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_TakeSnapshot(benchmark::State& state) {
    const auto root = std::filesystem::temp_directory_path() / "hpcload-bench-archive";
    auto view = assemble_from_files(one_state(static_cast<int>(state.range(0))));
    const SnapshotArchive archive(root, view.cluster_name);
    for (auto _ : state) {
        view.timestamp += std::chrono::minutes{15};
        benchmark::DoNotOptimize(take_snapshot(view, archive));
    }
    std::filesystem::remove_all(root);
}
BENCHMARK(BM_TakeSnapshot)->Arg(64)->Arg(512);
BENCHMARK_MAIN();
