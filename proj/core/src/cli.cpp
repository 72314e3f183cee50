#include "hpcload/cli.hpp"

#include <fmt/format.h>

#include "hpcload/render.hpp"

namespace hpcload {

PrivilegeConfig load_privileges(std::string_view text) {
    PrivilegeConfig cfg;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = line.substr(0, line.find('\t'));
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        if (!line.empty()) cfg.privileged_users.emplace(line);
    }
    return cfg;
}

CliResult run(const CliRequest& request, const ClusterView& view, const PrivilegeConfig& privileges) {
    CliResult result;
    const bool privileged = privileges.allows(request.invoking_user);
    if (privileged) {
        for (const auto& w : view.warnings) result.err += "warning: " + w + "\n";
    }

    switch (request.mode) {
        case CliMode::top:
            if (request.top_n < 1) {
                result.err += "error: -t needs a positive node count\n";
                result.exit_code = exit_code::usage;
                return result;
            }
            result.out = render_top_view(view, request.top_n);
            return result;

        case CliMode::nodes: {
            if (request.nodelist.empty()) {
                result.err += "error: -n needs at least one node name\n";
                result.exit_code = exit_code::usage;
                return result;
            }
            const auto nodes = render_nodes_view(
                view, request.nodelist, request.gpu,
                privileged ? std::nullopt : std::optional<std::string>(request.invoking_user));
            result.out = nodes.text;
            if (nodes.unknown == request.nodelist.size()) result.exit_code = exit_code::input;
            return result;
        }

        case CliMode::all:
            if (privileged) {
                for (const auto& w : collect_usage(view).warnings) result.err += "warning: " + w + "\n";
                result.out = request.tsv ? render_tsv(view, std::nullopt, request.gpu)
                                         : render_all_view(view, request.gpu);
                return result;
            }
            [[fallthrough]];

        case CliMode::user:
            result.out = request.tsv ? render_tsv(view, request.invoking_user, request.gpu)
                                     : render_user_view(view, request.invoking_user, request.gpu);
            return result;
    }
    return result;
}

}  // namespace hpcload
