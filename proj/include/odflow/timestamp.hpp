#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace odflow {

/// Wall-clock instant at minute resolution, minutes since 1970-01-01T00:00.
/// Times are local to the city; no zone conversion is applied.
struct Timestamp {
  std::int64_t minutes = 0;

  int hour() const;
  int minute() const;
  /// 24-hour "HH:MM".
  std::string hhmm() const;
  /// "YYYY-MM-DDTHH:MM".
  std::string iso() const;

  static Timestamp from_civil(int year, unsigned month, unsigned day, int hour, int minute);

  constexpr auto operator<=>(const Timestamp&) const = default;
};

/// Parses ISO-8601 date-times: `YYYY-MM-DD[T| ]HH:MM[:SS[.fff]][Z|±HH:MM]`.
/// Seconds are truncated; a zone suffix is accepted and ignored.
std::optional<Timestamp> parse_timestamp(std::string_view text);

}  // namespace odflow
