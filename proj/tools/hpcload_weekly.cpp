// hpcload-weekly: weekly top-10 node-hour report and notification drafts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hpcload/analyzer.hpp"
#include "hpcload/cli.hpp"
#include "hpcload/collectors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Weekly low/high utilization report from the snapshot archive"};
    std::string root, week_of, out_dir, cluster, users_file;
    hpcload::Thresholds t;
    bool no_anonymize = false, formula_high = false;

    app.add_option("--archive-root", root, "Archive root directory")->required();
    app.add_option("--week-of", week_of, "Any date in the week to analyze (weeks start Monday 00:00 UTC)")
        ->required();
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--cluster", cluster, "Cluster to analyze (needed when the archive holds several)");
    app.add_option("--low", t.low, "Low utilization threshold");
    auto* high = app.add_option("--high", t.high_cpu, "High CPU load threshold");
    app.add_flag("--formula-high", formula_high, "Use 1 + (1 - low) as the high CPU threshold")->excludes(high);
    app.add_option("--interval-hours", t.interval_hours, "Snapshot spacing");
    app.add_option("--users", users_file, "User table (user<TAB>email) for email drafts");
    app.add_flag("--no-anonymize", no_anonymize, "Show real user names in report.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return hpcload::exit_code::usage;
    }

    const auto day = hpcload::parse_rfc3339(week_of);
    if (!day) {
        std::cerr << "error: bad --week-of date '" << week_of << "'\n";
        return hpcload::exit_code::usage;
    }
    if (formula_high) t.high_cpu = 1.0 + (1.0 - t.low);
    try {
        t.validate();
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hpcload::exit_code::usage;
    }

    try {
        if (cluster.empty()) {
            const auto clusters = hpcload::list_clusters(root);
            if (clusters.size() != 1) {
                std::cerr << "error: archive holds " << clusters.size() << " clusters; pick one with --cluster\n";
                return hpcload::exit_code::usage;
            }
            cluster = clusters.front();
        }
        const hpcload::SnapshotArchive archive(root, cluster);
        const auto run = hpcload::build_weekly_report(archive, hpcload::week_start(*day), t, !no_anonymize);
        for (const auto& w : run.data.warnings) std::cerr << "warning: " << w << "\n";

        std::map<std::string, std::string> emails;
        if (!users_file.empty()) {
            std::ifstream in(users_file);
            if (!in) throw std::runtime_error("cannot read " + users_file);
            std::ostringstream ss;
            ss << in.rdbuf();
            const auto table = hpcload::load_user_table(ss.str());
            for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
            emails = table.entries;
        }
        std::vector<std::string> warnings;
        const auto drafts = hpcload::draft_emails(run.report, emails, run.data.snapshots, warnings);
        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
        hpcload::write_weekly_outputs(out_dir, run, drafts);
        std::cout << run.text;
        return hpcload::exit_code::ok;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hpcload::exit_code::input;
    }
}
