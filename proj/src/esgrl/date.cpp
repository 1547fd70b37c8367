#include "esgrl/date.hpp"

#include <cstdio>

#include "esgrl/error.hpp"

namespace esgrl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kNotFound: return "not found";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kState: return "state error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kConvergence: return "convergence error";
  }
  return "error";
}

Date::Date(int year, unsigned month, unsigned day) {
  std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                  std::chrono::day{day}};
  require(ymd.ok(), ErrorKind::kInvalidArgument, "invalid calendar date");
  day_ = std::chrono::sys_days{ymd};
}

std::optional<Date> Date::try_parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto digits = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') return std::nullopt;
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
  if (!y || !m || !d) return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{*y},
                                  std::chrono::month{static_cast<unsigned>(*m)},
                                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date(std::chrono::sys_days{ymd});
}

Date Date::parse(std::string_view text) {
  auto d = try_parse(text);
  if (!d) fail(ErrorKind::kParse, "invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  return *d;
}

std::string Date::to_string() const {
  std::chrono::year_month_day ymd{day_};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

bool Date::is_weekend() const {
  std::chrono::weekday wd{day_};
  return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

unsigned Date::month() const { return unsigned(std::chrono::year_month_day{day_}.month()); }
int Date::year() const { return int(std::chrono::year_month_day{day_}.year()); }

}  // namespace esgrl
