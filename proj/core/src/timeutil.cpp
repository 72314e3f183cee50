#include "hpcload/timeutil.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace hpcload {

namespace chr = std::chrono;

std::string format_rfc3339(Instant t) {
    const auto day = chr::floor<chr::days>(t);
    const chr::year_month_day ymd{day};
    const chr::hh_mm_ss<chr::seconds> hms{t - day};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z",
                       static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()), hms.hours().count(),
                       hms.minutes().count(), hms.seconds().count());
}

namespace {

bool read_fixed(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) return false;
    const char* first = text.data() + pos;
    const char* last = first + len;
    for (const char* p = first; p != last; ++p) {
        if (*p < '0' || *p > '9') return false;
    }
    return std::from_chars(first, last, out).ec == std::errc{};
}

bool expect(std::string_view text, std::size_t pos, char c) {
    return pos < text.size() && text[pos] == c;
}

}  // namespace

std::optional<Instant> parse_rfc3339(std::string_view text) {
    int y = 0, mo = 0, d = 0;
    if (!read_fixed(text, 0, 4, y) || !expect(text, 4, '-') || !read_fixed(text, 5, 2, mo) ||
        !expect(text, 7, '-') || !read_fixed(text, 8, 2, d)) {
        return std::nullopt;
    }
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
                                  chr::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    const Instant midnight{chr::sys_days{ymd}};
    if (text.size() == 10) return midnight;

    int h = 0, mi = 0, s = 0;
    if (!(expect(text, 10, 'T') || expect(text, 10, 't') || expect(text, 10, ' ')) ||
        !read_fixed(text, 11, 2, h) || !expect(text, 13, ':') || !read_fixed(text, 14, 2, mi) ||
        !expect(text, 16, ':') || !read_fixed(text, 17, 2, s)) {
        return std::nullopt;
    }
    if (h > 23 || mi > 59 || s > 60) return std::nullopt;
    Instant t = midnight + chr::hours{h} + chr::minutes{mi} + chr::seconds{s};

    std::string_view zone = text.substr(19);
    if (zone == "Z" || zone == "z") return t;
    if (zone.size() != 6 || (zone[0] != '+' && zone[0] != '-') || zone[3] != ':') {
        return std::nullopt;
    }
    int oh = 0, om = 0;
    if (!read_fixed(zone, 1, 2, oh) || !read_fixed(zone, 4, 2, om)) return std::nullopt;
    const chr::seconds offset = chr::hours{oh} + chr::minutes{om};
    return zone[0] == '+' ? t - offset : t + offset;
}

Instant floor_to_interval(Instant t, chr::seconds interval) {
    if (interval.count() <= 0) throw std::invalid_argument("snapshot interval must be positive");
    const auto since = t.time_since_epoch();
    return Instant{chr::floor<chr::seconds>(since) - (since % interval + interval) % interval};
}

Instant week_start(Instant t) {
    const auto day = chr::floor<chr::days>(t);
    const chr::weekday wd{day};
    return Instant{day - chr::days{wd.iso_encoding() - 1}};
}

chr::seconds interval_from_hours(double hours) {
    if (!(hours > 0.0)) throw std::invalid_argument("snapshot interval must be positive");
    return chr::seconds{static_cast<long long>(std::llround(hours * 3600.0))};
}

}  // namespace hpcload
