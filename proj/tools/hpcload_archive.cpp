// hpcload-archive: take interval snapshots and list the archive.

#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hpcload/archive.hpp"
#include "hpcload/cli.hpp"
#include "hpcload/collectors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Snapshot archive for hpcload"};
    app.require_subcommand(1);

    std::string cluster_dir, root, at, from, to, cluster;
    double interval_hours = 0.25;

    auto* take = app.add_subcommand("take", "Write the all-users GPU TSV snapshot of a cluster directory");
    take->add_option("--cluster-dir", cluster_dir, "Directory with the scheduler tables")->required();
    take->add_option("--archive-root", root, "Archive root directory")->required();
    take->add_option("--at", at, "Snapshot instant (RFC 3339); defaults to the cluster directory's timestamp");
    take->add_option("--interval-hours", interval_hours, "Snapshot grid spacing")->check(CLI::PositiveNumber);

    auto* ls = app.add_subcommand("ls", "List snapshots in [from, to)");
    ls->add_option("--archive-root", root, "Archive root directory")->required();
    ls->add_option("--from", from, "Range start (RFC 3339)")->required();
    ls->add_option("--to", to, "Range end (RFC 3339)")->required();
    ls->add_option("--cluster", cluster, "Only this cluster");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return hpcload::exit_code::usage;
    }

    try {
        if (*take) {
            auto view = hpcload::assemble_from_files(hpcload::read_cluster_files(cluster_dir));
            if (!at.empty()) {
                const auto t = hpcload::parse_rfc3339(at);
                if (!t) {
                    std::cerr << "error: bad --at timestamp '" << at << "'\n";
                    return hpcload::exit_code::usage;
                }
                view.timestamp = *t;
            }
            for (const auto& w : view.warnings) std::cerr << "warning: " << w << "\n";
            const auto result =
                hpcload::take_snapshot(view, hpcload::SnapshotArchive(root, view.cluster_name), interval_hours);
            for (const auto& note : result.notes) std::cerr << "note: " << note << "\n";
            std::cout << result.path.string() << "\n";
            return hpcload::exit_code::ok;
        }

        const auto start = hpcload::parse_rfc3339(from);
        const auto end = hpcload::parse_rfc3339(to);
        if (!start || !end || *end < *start) {
            std::cerr << "error: --from/--to must be RFC 3339 instants with from <= to\n";
            return hpcload::exit_code::usage;
        }
        const auto clusters = cluster.empty() ? hpcload::list_clusters(root) : std::vector<std::string>{cluster};
        for (const auto& name : clusters) {
            const auto range = hpcload::read_range(hpcload::SnapshotArchive(root, name), *start, *end);
            for (const auto& w : range.warnings) std::cerr << "warning: " << w << "\n";
            for (const auto& snap : range.snapshots) {
                std::cout << fmt::format("{}\t{}\t{}\t{}\n", name, hpcload::format_rfc3339(snap.ts), snap.rows.size(),
                                         snap.path.string());
            }
        }
        return hpcload::exit_code::ok;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hpcload::exit_code::input;
    }
}
