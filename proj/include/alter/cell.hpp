#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace alter {

/// A parsed numeric cell. `decimals` remembers how many fractional digits the
/// raw text carried so the value re-renders to the same text.
struct Number {
  double value = 0.0;
  int decimals = 0;

  friend bool operator==(const Number&, const Number&) = default;
};

/// Proleptic Gregorian calendar date.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  friend auto operator<=>(const Date&, const Date&) = default;

  std::string iso() const;
  std::int64_t days_since_epoch() const;
  static Date from_days(std::int64_t days);
};

using ParsedValue = std::variant<Number, Date, std::string>;

struct CellValue {
  std::string raw;
  /// Absent for empty cells; otherwise number, date, or plain text.
  std::optional<ParsedValue> parsed;

  bool empty() const { return !parsed.has_value(); }
  const Number* number() const;
  const Date* date() const;
};

/// Accepts `[+-]?` digits with optional `,` thousands grouping and an optional
/// fractional part. Leading zeros and more than 15 significant digits are
/// rejected so the value always re-renders to its source text.
std::optional<Number> parse_number(std::string_view text);

/// Accepts `YYYY-MM-DD`, `Month D, YYYY` and `D Month YYYY` (full or
/// three-letter month names, case-insensitive).
std::optional<Date> parse_date(std::string_view text);

std::string render_number(const Number& number);

/// Shortest round-trip text for a double; integral values print without a
/// fractional part.
std::string format_real(double value);

CellValue make_cell(std::string raw);

std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace alter
