#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace clb {

using Timestamp = std::chrono::sys_seconds;

// Parses "YYYY-MM-DDTHH:MM:SSZ" (a trailing "Z" or "+00:00" is accepted).
Timestamp parse_timestamp(std::string_view text);

// Formats as "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp ts);

inline Timestamp from_unix(long long seconds) {
  return Timestamp{std::chrono::seconds{seconds}};
}

inline long long to_unix(Timestamp ts) { return ts.time_since_epoch().count(); }

}  // namespace clb
