#include "gridtopo/timeutil.hpp"

#include <cctype>
#include <cstdio>

namespace gridtopo {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp + (mp < 10 ? 3 : -9);
  y = static_cast<int>(yy + (m <= 2));
}

bool read_digits(const std::string& s, std::size_t pos, int count, int& out) {
  if (pos + static_cast<std::size_t>(count) > s.size()) return false;
  int value = 0;
  for (int i = 0; i < count; ++i) {
    const char c = s[pos + static_cast<std::size_t>(i)];
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

}  // namespace

std::optional<std::int64_t> parse_rfc3339(const std::string& text) {
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  std::size_t p = 0;
  if (!read_digits(text, p, 4, year)) return std::nullopt;
  p += 4;
  if (p >= text.size() || text[p] != '-') return std::nullopt;
  ++p;
  if (!read_digits(text, p, 2, month)) return std::nullopt;
  p += 2;
  if (p >= text.size() || text[p] != '-') return std::nullopt;
  ++p;
  if (!read_digits(text, p, 2, day)) return std::nullopt;
  p += 2;
  if (p >= text.size() || (text[p] != 'T' && text[p] != 't' && text[p] != ' ')) return std::nullopt;
  ++p;
  if (!read_digits(text, p, 2, hour)) return std::nullopt;
  p += 2;
  if (p >= text.size() || text[p] != ':') return std::nullopt;
  ++p;
  if (!read_digits(text, p, 2, minute)) return std::nullopt;
  p += 2;
  if (p >= text.size() || text[p] != ':') return std::nullopt;
  ++p;
  if (!read_digits(text, p, 2, second)) return std::nullopt;
  p += 2;

  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    return std::nullopt;

  if (p < text.size() && text[p] == '.') {
    ++p;
    while (p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]))) ++p;
  }

  std::int64_t offset = 0;
  if (p >= text.size()) return std::nullopt;
  if (text[p] == 'Z' || text[p] == 'z') {
    ++p;
  } else if (text[p] == '+' || text[p] == '-') {
    const int sign = text[p] == '+' ? 1 : -1;
    ++p;
    int oh = 0, om = 0;
    if (!read_digits(text, p, 2, oh)) return std::nullopt;
    p += 2;
    if (p >= text.size() || text[p] != ':') return std::nullopt;
    ++p;
    if (!read_digits(text, p, 2, om)) return std::nullopt;
    p += 2;
    offset = sign * (oh * 3600 + om * 60);
  } else {
    return std::nullopt;
  }
  if (p != text.size()) return std::nullopt;

  const std::int64_t days = days_from_civil(year, month, day);
  return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

std::string format_rfc3339(std::int64_t unix_seconds) {
  std::int64_t days = unix_seconds / 86400;
  std::int64_t rem = unix_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  int y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lldZ", y, m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>((rem % 3600) / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

}  // namespace gridtopo
