#ifndef PRB_TIME_UTIL_HPP
#define PRB_TIME_UTIL_HPP

#include <cstdint>
#include <string>

namespace prb {

constexpr std::int64_t kSecondsPerHour = 3600;
constexpr std::int64_t kHoursPerDay = 24;
constexpr std::int64_t kHoursPerWeek = 168;

/// Formats UTC epoch seconds as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_iso8601(std::int64_t epoch_seconds);

/// Parses "YYYY-MM-DDTHH:MM:SSZ". Throws std::invalid_argument on malformed input.
std::int64_t parse_iso8601(const std::string& text);

/// Hour of day in [0, 24) for a UTC epoch timestamp.
int hour_of_day(std::int64_t epoch_seconds);

/// Day of week in [0, 7), 0 = Sunday.
int day_of_week(std::int64_t epoch_seconds);

} // namespace prb

#endif // PRB_TIME_UTIL_HPP
