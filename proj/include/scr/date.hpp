#pragma once

#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "scr/error.hpp"

namespace scr {

/// Proleptic Gregorian calendar date. All corpus analytics are indexed by
/// days_since_epoch (days relative to 1970-01-01), which both directions of
/// the civil<->serial conversion below implement exactly for any year.
struct Date {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31

    friend constexpr auto operator<=>(const Date&, const Date&) = default;
};

constexpr bool is_leap_year(int y) {
    return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0);
}

constexpr int days_in_month(int y, int m) {
    constexpr int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m == 2 && is_leap_year(y)) return 29;
    return lengths[m - 1];
}

constexpr bool is_valid(const Date& d) {
    return d.month >= 1 && d.month <= 12 && d.day >= 1 &&
           d.day <= days_in_month(d.year, d.month);
}

constexpr std::int64_t days_since_epoch(const Date& d) {
    int y = d.year;
    const int m = d.month;
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy =
        (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
        static_cast<unsigned>(d.day) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return static_cast<std::int64_t>(era) * 146097 +
           static_cast<std::int64_t>(doe) - 719468;
}

constexpr Date date_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m),
                static_cast<int>(d)};
}

/// Serial month index (months since year 0, January = 0). Calendar-aligned
/// time bins are defined on this axis.
constexpr std::int64_t month_index(const Date& d) {
    return static_cast<std::int64_t>(d.year) * 12 + (d.month - 1);
}

constexpr Date first_day_of_month_index(std::int64_t idx) {
    const std::int64_t y = idx >= 0 ? idx / 12 : (idx - 11) / 12;
    const int m = static_cast<int>(idx - y * 12) + 1;
    return Date{static_cast<int>(y), m, 1};
}

inline std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

/// Strict ISO "YYYY-MM-DD" parser; anything else throws.
inline Date parse_date(std::string_view s) {
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        fail("invalid date '", std::string(s), "' (expected YYYY-MM-DD)");
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (!digit(s[i]))
            fail("invalid date '", std::string(s), "' (expected YYYY-MM-DD)");
    Date d;
    d.year = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
    d.month = (s[5] - '0') * 10 + (s[6] - '0');
    d.day = (s[8] - '0') * 10 + (s[9] - '0');
    if (!is_valid(d))
        fail("invalid calendar date '", std::string(s), "'");
    return d;
}

}  // namespace scr
