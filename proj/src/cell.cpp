#include "alter/cell.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <vector>

#include <fmt/format.h>

namespace alter {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

constexpr std::array<std::string_view, 12> kMonths = {
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

std::optional<int> month_from_name(std::string_view name) {
  std::string lower = to_lower(name);
  if (!lower.empty() && lower.back() == '.') lower.pop_back();
  for (std::size_t i = 0; i < kMonths.size(); ++i) {
    if (lower == kMonths[i]) return static_cast<int>(i + 1);
    if (lower.size() == 3 && kMonths[i].substr(0, 3) == lower) return static_cast<int>(i + 1);
    if (lower == "sept" && i == 8) return 9;
  }
  return std::nullopt;
}

std::optional<int> parse_int(std::string_view text, std::size_t min_len, std::size_t max_len) {
  if (text.size() < min_len || text.size() > max_len) return std::nullopt;
  int value = 0;
  for (char c : text) {
    if (!is_digit(c)) return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

std::optional<Date> make_date(int year, int month, int day) {
  namespace chr = std::chrono;
  chr::year_month_day ymd{chr::year{year}, chr::month{static_cast<unsigned>(month)},
                          chr::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{year, month, day};
}

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
    if (i > start) parts.push_back(text.substr(start, i - start));
  }
  return parts;
}

}  // namespace

std::string_view trim(std::string_view text) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (!text.empty() && is_space(text.front())) text.remove_prefix(1);
  while (!text.empty() && is_space(text.back())) text.remove_suffix(1);
  return text;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string Date::iso() const { return fmt::format("{:04d}-{:02d}-{:02d}", year, month, day); }

std::int64_t Date::days_since_epoch() const {
  namespace chr = std::chrono;
  chr::sys_days days{chr::year{year} / chr::month{static_cast<unsigned>(month)} /
                     chr::day{static_cast<unsigned>(day)}};
  return days.time_since_epoch().count();
}

Date Date::from_days(std::int64_t days) {
  namespace chr = std::chrono;
  chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
  return Date{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
              static_cast<int>(static_cast<unsigned>(ymd.day()))};
}

const Number* CellValue::number() const {
  return parsed ? std::get_if<Number>(&*parsed) : nullptr;
}

const Date* CellValue::date() const { return parsed ? std::get_if<Date>(&*parsed) : nullptr; }

std::optional<Number> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::string cleaned;
  std::size_t i = 0;
  if (text[0] == '+' || text[0] == '-') {
    if (text[0] == '-') cleaned.push_back('-');
    ++i;
  }
  const std::size_t int_start = i;
  while (i < text.size() && (is_digit(text[i]) || text[i] == ',')) ++i;
  std::string_view int_part = text.substr(int_start, i - int_start);
  if (int_part.empty()) return std::nullopt;
  if (int_part.find(',') != std::string_view::npos) {
    // Grouped form: 1-3 leading digits, then groups of exactly three.
    std::size_t first = int_part.find(',');
    if (first == 0 || first > 3) return std::nullopt;
    for (std::size_t pos = first; pos < int_part.size(); pos += 4) {
      if (int_part[pos] != ',' || pos + 4 > int_part.size()) return std::nullopt;
      for (std::size_t k = 1; k <= 3; ++k) {
        if (!is_digit(int_part[pos + k])) return std::nullopt;
      }
    }
  }
  std::size_t digits = 0;
  for (char c : int_part) {
    if (c != ',') {
      cleaned.push_back(c);
      ++digits;
    }
  }
  if (digits > 1 && int_part[0] == '0') return std::nullopt;
  int decimals = 0;
  if (i < text.size() && text[i] == '.') {
    ++i;
    const std::size_t frac_start = i;
    while (i < text.size() && is_digit(text[i])) ++i;
    decimals = static_cast<int>(i - frac_start);
    if (decimals == 0) return std::nullopt;
    cleaned.push_back('.');
    cleaned.append(text.substr(frac_start, i - frac_start));
    digits += static_cast<std::size_t>(decimals);
  }
  if (i != text.size() || digits > 15) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cleaned.data(), cleaned.data() + cleaned.size(), value);
  if (ec != std::errc{} || ptr != cleaned.data() + cleaned.size()) return std::nullopt;
  return Number{value, decimals};
}

std::optional<Date> parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() == 10 && text[4] == '-' && text[7] == '-') {
    auto y = parse_int(text.substr(0, 4), 4, 4);
    auto m = parse_int(text.substr(5, 2), 2, 2);
    auto d = parse_int(text.substr(8, 2), 2, 2);
    if (y && m && d) return make_date(*y, *m, *d);
    return std::nullopt;
  }
  auto parts = split_ws(text);
  if (parts.size() != 3) return std::nullopt;
  // Month D, YYYY
  if (auto month = month_from_name(parts[0])) {
    std::string_view day_part = parts[1];
    if (!day_part.empty() && day_part.back() == ',') day_part.remove_suffix(1);
    auto d = parse_int(day_part, 1, 2);
    auto y = parse_int(parts[2], 4, 4);
    if (d && y) return make_date(*y, *month, *d);
    return std::nullopt;
  }
  // D Month YYYY
  if (auto d = parse_int(parts[0], 1, 2)) {
    auto month = month_from_name(parts[1]);
    auto y = parse_int(parts[2], 4, 4);
    if (month && y) return make_date(*y, *month, *d);
  }
  return std::nullopt;
}

std::string render_number(const Number& number) {
  return fmt::format("{:.{}f}", number.value, number.decimals);
}

std::string format_real(double value) {
  if (std::isfinite(value) && value == std::trunc(value) && std::fabs(value) < 1e15) {
    return fmt::format("{}", static_cast<long long>(value));
  }
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ec == std::errc{} ? ptr : buf.data());
}

CellValue make_cell(std::string raw) {
  CellValue cell{std::move(raw), std::nullopt};
  std::string_view text = trim(cell.raw);
  if (text.empty()) return cell;
  if (auto number = parse_number(text)) {
    cell.parsed = *number;
  } else if (auto date = parse_date(text)) {
    cell.parsed = *date;
  } else {
    cell.parsed = std::string(text);
  }
  return cell;
}

}  // namespace alter
