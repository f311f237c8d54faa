#include "odflow/timestamp.hpp"

#include <cctype>
#include <chrono>

#include <fmt/format.h>

namespace odflow {
namespace {

constexpr std::int64_t kMinutesPerDay = 24 * 60;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a / b - ((a % b != 0) && ((a < 0) != (b < 0)));
}

bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

int Timestamp::hour() const {
  const auto m = minutes - floor_div(minutes, kMinutesPerDay) * kMinutesPerDay;
  return static_cast<int>(m / 60);
}

int Timestamp::minute() const {
  const auto m = minutes - floor_div(minutes, kMinutesPerDay) * kMinutesPerDay;
  return static_cast<int>(m % 60);
}

std::string Timestamp::hhmm() const { return fmt::format("{:02}:{:02}", hour(), minute()); }

std::string Timestamp::iso() const {
  using namespace std::chrono;
  const sys_days date{days{floor_div(minutes, kMinutesPerDay)}};
  const year_month_day ymd{date};
  return fmt::format("{:04}-{:02}-{:02}T{}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hhmm());
}

Timestamp Timestamp::from_civil(int y, unsigned mo, unsigned d, int h, int mi) {
  using namespace std::chrono;
  const sys_days date{year{y} / month{mo} / day{d}};
  return {static_cast<std::int64_t>(date.time_since_epoch().count()) * kMinutesPerDay + h * 60 + mi};
}

std::optional<Timestamp> parse_timestamp(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);

  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!read_digits(s, 0, 4, y) || s.size() < 16 || s[4] != '-' || !read_digits(s, 5, 2, mo) ||
      s[7] != '-' || !read_digits(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') ||
      !read_digits(s, 11, 2, h) || s[13] != ':' || !read_digits(s, 14, 2, mi)) {
    return std::nullopt;
  }
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (!read_digits(s, pos + 1, 2, sec)) return std::nullopt;
    pos += 3;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      const auto start = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos == start) return std::nullopt;
    }
  }
  if (pos < s.size()) {
    const auto zone = s.substr(pos);
    int zh = 0, zm = 0;
    const bool utc = zone == "Z";
    const bool offset = zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') &&
                        read_digits(zone, 1, 2, zh) && zone[3] == ':' && read_digits(zone, 4, 2, zm);
    if (!utc && !offset) return std::nullopt;
  }
  if (mo < 1 || mo > 12 || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Timestamp::from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi);
}

}  // namespace odflow
