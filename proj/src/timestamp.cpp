#include "clb/timestamp.hpp"

#include <charconv>
#include <cstdio>

#include "clb/error.hpp"

namespace clb {
namespace {

int read_int(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  auto first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) {
    throw ParseError("bad timestamp '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  // 2020-01-31T12:34:56Z
  if (text.size() < 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    throw ParseError("bad timestamp '" + std::string(text) + "'");
  }
  auto rest = text.substr(19);
  if (!(rest.empty() || rest == "Z" || rest == "+00:00")) {
    throw ParseError("timestamp must be UTC: '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{read_int(text, 0, 4)},
                           month{static_cast<unsigned>(read_int(text, 5, 2))},
                           day{static_cast<unsigned>(read_int(text, 8, 2))}};
  if (!ymd.ok()) throw ParseError("bad calendar date '" + std::string(text) + "'");
  const int hh = read_int(text, 11, 2);
  const int mm = read_int(text, 14, 2);
  const int ss = read_int(text, 17, 2);
  if (hh > 23 || mm > 59 || ss > 60) {
    throw ParseError("bad time of day '" + std::string(text) + "'");
  }
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto days = floor<std::chrono::days>(ts);
  const year_month_day ymd{days};
  const hh_mm_ss<seconds> tod{ts - days};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02lldZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long>(tod.hours().count()),
                static_cast<long>(tod.minutes().count()),
                static_cast<long long>(tod.seconds().count()));
  return buf;
}

}  // namespace clb
