#ifndef ESGRL_DATE_HPP_
#define ESGRL_DATE_HPP_

#include <chrono>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace esgrl {

// Calendar day, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days day) : day_(day) {}
  Date(int year, unsigned month, unsigned day);

  // Strict ISO-8601 `YYYY-MM-DD`.
  static std::optional<Date> try_parse(std::string_view text);
  static Date parse(std::string_view text);

  std::string to_string() const;
  long days_since_epoch() const { return day_.time_since_epoch().count(); }
  std::chrono::sys_days sys_days() const { return day_; }

  Date plus_days(long n) const { return Date(day_ + std::chrono::days{n}); }
  bool is_weekend() const;
  unsigned month() const;
  int year() const;

  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days day_{};
};

}  // namespace esgrl

#endif  // ESGRL_DATE_HPP_
