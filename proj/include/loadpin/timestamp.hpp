#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace loadpin {

/// Minute-resolution wall-clock time (no time-zone handling).
using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

/// Accepts `YYYY-MM-DD[T| ]HH:MM[:SS][Z]`; seconds must be zero.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

int month_of(Timestamp t);
int minute_of_day(Timestamp t);

enum class Season { winter, spring, summer, fall };

/// Meteorological quarters: DJF, MAM, JJA, SON.
Season season_of(Timestamp t);
std::string to_string(Season s);
Season parse_season(std::string_view s);

}  // namespace loadpin
