#include "loadpin/timestamp.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace loadpin {

namespace {

int parse_int(std::string_view s, std::size_t pos, std::size_t len, std::string_view whole) {
    int v = 0;
    if (pos + len > s.size()) throw std::invalid_argument("bad timestamp '" + std::string(whole) + "'");
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc{} || ptr != s.data() + pos + len)
        throw std::invalid_argument("bad timestamp '" + std::string(whole) + "'");
    return v;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
    std::string_view s = text;
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() != 16 && s.size() != 19) throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
        throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
    const int y = parse_int(s, 0, 4, text), mo = parse_int(s, 5, 2, text), d = parse_int(s, 8, 2, text);
    const int h = parse_int(s, 11, 2, text), mi = parse_int(s, 14, 2, text);
    if (s.size() == 19) {
        if (s[16] != ':' || parse_int(s, 17, 2, text) != 0)
            throw std::invalid_argument("timestamp '" + std::string(text) + "' is not on a whole minute");
    }
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59) throw std::invalid_argument("bad timestamp '" + std::string(text) + "'");
    return time_point_cast<minutes>(sys_days{ymd}) + hours{h} + minutes{mi};
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const auto mins = (t - day_start).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:00", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(mins / 60),
                  static_cast<int>(mins % 60));
    return buf;
}

int month_of(Timestamp t) {
    using namespace std::chrono;
    return static_cast<int>(static_cast<unsigned>(year_month_day{floor<days>(t)}.month()));
}

int minute_of_day(Timestamp t) {
    using namespace std::chrono;
    return static_cast<int>((t - floor<days>(t)).count());
}

Season season_of(Timestamp t) {
    switch (month_of(t)) {
        case 12:
        case 1:
        case 2: return Season::winter;
        case 3:
        case 4:
        case 5: return Season::spring;
        case 6:
        case 7:
        case 8: return Season::summer;
        default: return Season::fall;
    }
}

std::string to_string(Season s) {
    switch (s) {
        case Season::winter: return "winter";
        case Season::spring: return "spring";
        case Season::summer: return "summer";
        case Season::fall: return "fall";
    }
    return "?";
}

Season parse_season(std::string_view s) {
    for (auto v : {Season::winter, Season::spring, Season::summer, Season::fall})
        if (to_string(v) == s) return v;
    throw std::invalid_argument("unknown season '" + std::string(s) + "'");
}

}  // namespace loadpin
