#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hpcload/collectors.hpp"

namespace hpcload {

enum class CliMode { user, all, top, nodes };

struct CliRequest {
    std::string invoking_user;
    CliMode mode = CliMode::user;
    bool gpu = false;
    bool tsv = false;
    int top_n = 0;
    std::vector<std::string> nodelist;
};

/// Users allowed to see every user's jobs with --all.
struct PrivilegeConfig {
    std::set<std::string> privileged_users;

    bool allows(std::string_view user) const { return privileged_users.count(std::string(user)) > 0; }
};

/// One user name per line (first tab-separated field); '#' starts a comment.
PrivilegeConfig load_privileges(std::string_view text);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int input = 3;
}  // namespace exit_code

struct CliResult {
    std::string out;
    std::string err;
    int exit_code = exit_code::ok;
};

/// Renders the requested view. An unprivileged --all silently falls back to
/// the caller's own jobs.
CliResult run(const CliRequest& request, const ClusterView& view, const PrivilegeConfig& privileges);

}  // namespace hpcload
