// hpcload: per-user CPU/GPU utilization of running jobs.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <pwd.h>
#include <unistd.h>

#include "hpcload/cli.hpp"
#include "hpcload/collectors.hpp"
#include "hpcload/render.hpp"

namespace {

std::string current_user() {
    if (const passwd* pw = ::getpwuid(::getuid()); pw && pw->pw_name) return pw->pw_name;
    if (const char* u = std::getenv("USER")) return u;
    return "unknown";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Show CPU, memory and GPU usage of running jobs, grouped by user"};
    bool gpu = false, all = false, tsv = false;
    int top = 0;
    std::string nodelist;
    std::string cluster_dir = std::getenv("HPCLOAD_CLUSTER_DIR") ? std::getenv("HPCLOAD_CLUSTER_DIR") : ".";
    std::string as_user;

    app.add_flag("-g,--gpu", gpu, "Add GPU utilization and GPU memory columns");
    auto* all_opt = app.add_flag("--all", all, "All users' jobs (privileged users only)");
    app.add_flag("--tsv", tsv, "Tab-separated output");
    auto* top_opt = app.add_option("-t,--top", top, "The N nodes with the highest normalized CPU load")
                        ->check(CLI::PositiveNumber);
    auto* nodes_opt = app.add_option("-n,--nodes", nodelist, "Details for a node list, e.g. c-8-6-[1-3]");
    app.add_option("--cluster-dir", cluster_dir, "Directory with the scheduler tables")
        ->envname("HPCLOAD_CLUSTER_DIR");
    app.add_option("--as-user", as_user, "Run as if invoked by this user");
    top_opt->excludes(nodes_opt);
    top_opt->excludes(all_opt);
    nodes_opt->excludes(all_opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return hpcload::exit_code::usage;
    }
    if (tsv && (top_opt->count() || nodes_opt->count())) {
        std::cerr << "error: --tsv applies to the user and --all views only\n";
        return hpcload::exit_code::usage;
    }

    hpcload::CliRequest request;
    request.invoking_user = as_user.empty() ? current_user() : as_user;
    request.gpu = gpu;
    request.tsv = tsv;
    if (top_opt->count()) {
        request.mode = hpcload::CliMode::top;
        request.top_n = top;
    } else if (nodes_opt->count()) {
        request.mode = hpcload::CliMode::nodes;
        try {
            request.nodelist = hpcload::expand_nodelist(nodelist);
        } catch (const std::invalid_argument& e) {
            std::cerr << "error: " << e.what() << "\n";
            return hpcload::exit_code::usage;
        }
    } else if (all) {
        request.mode = hpcload::CliMode::all;
    }

    hpcload::ClusterView view;
    hpcload::PrivilegeConfig privileges;
    try {
        const auto files = hpcload::read_cluster_files(cluster_dir);
        view = hpcload::assemble_from_files(files);
        privileges = hpcload::load_privileges(files.privileges);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return hpcload::exit_code::input;
    }

    const auto result = hpcload::run(request, view, privileges);
    std::cout << result.out;
    std::cerr << result.err;
    return result.exit_code;
}
