// hpcload-sim: synthetic cluster directories, one per snapshot interval.

#include <iostream>

#include <CLI11.hpp>

#include "hpcload/cli.hpp"
#include "hpcload/simulator.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate synthetic cluster snapshots"};
    hpcload::ScenarioConfig config;
    std::string preset = "healthy", out_dir, start;

    app.add_option("--preset", preset, "healthy, lowgpu, misalloc, threadstorm or mixed")->required();
    app.add_option("--seed", config.seed, "Random seed")->required();
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--nodes", config.nodes, "Number of nodes");
    app.add_option("--users", config.users, "Number of users");
    app.add_option("--hours", config.duration_hours, "Duration in hours");
    app.add_option("--interval-hours", config.interval_hours, "Snapshot spacing");
    app.add_option("--cores", config.cores_per_node, "Cores per node");
    app.add_option("--gpus", config.gpus_per_node, "GPUs per node");
    app.add_option("--mem-gb", config.mem_gb_per_node, "Memory per node in GB");
    app.add_option("--cluster", config.cluster_name, "Cluster name");
    app.add_option("--start", start, "First snapshot instant (RFC 3339)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return hpcload::exit_code::usage;
    }

    const auto p = hpcload::preset_from(preset);
    if (!p) {
        std::cerr << "error: unknown preset '" << preset << "'\n";
        return hpcload::exit_code::usage;
    }
    config.preset = *p;
    if (!start.empty()) {
        const auto t = hpcload::parse_rfc3339(start);
        if (!t) {
            std::cerr << "error: bad --start '" << start << "'\n";
            return hpcload::exit_code::usage;
        }
        config.start = *t;
    }

    try {
        const auto timeline = hpcload::generate_timeline(config);
        hpcload::write_timeline(out_dir, timeline);
        std::cout << timeline.size() << " snapshots written to " << out_dir << "\n";
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hpcload::exit_code::usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hpcload::exit_code::input;
    }
    return hpcload::exit_code::ok;
}
