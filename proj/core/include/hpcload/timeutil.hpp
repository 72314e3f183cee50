#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace hpcload {

using Instant = std::chrono::sys_seconds;

/// "2024-03-04T10:00:00Z"
std::string format_rfc3339(Instant t);

/// Accepts "YYYY-MM-DDTHH:MM:SSZ", "YYYY-MM-DDTHH:MM:SS+00:00" and, for
/// convenience on the command line, a bare "YYYY-MM-DD" (midnight UTC).
/// Non-UTC offsets are applied. Returns nullopt on malformed input.
std::optional<Instant> parse_rfc3339(std::string_view text);

/// Floors t onto the grid of `interval` anchored at the Unix epoch.
Instant floor_to_interval(Instant t, std::chrono::seconds interval);

/// Monday 00:00 UTC of the ISO week containing t.
Instant week_start(Instant t);

std::chrono::seconds interval_from_hours(double hours);

}  // namespace hpcload
