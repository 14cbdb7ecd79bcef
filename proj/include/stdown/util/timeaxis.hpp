#pragma once

#include <cstdint>

namespace stdown::util {

struct CivilDate {
    int year;
    unsigned month;  // 1..12
    unsigned day;    // 1..31
};

// Days since 1970-01-01 -> civil date (proleptic Gregorian).
CivilDate civil_from_days(std::int64_t z);

// Civil date -> days since 1970-01-01.
std::int64_t days_from_civil(int y, unsigned m, unsigned d);

// Epoch seconds of Jan 1 00:00 UTC of the year containing t.
std::int64_t year_start_epoch(std::int64_t t);

// Hours elapsed since the start of t's UTC year (fractional).
double hour_of_year(std::int64_t t);

// Hour of day in UTC, 0..23 (floor of the 3-hour grid stamp).
int hour_of_day(std::int64_t t);

// Month/day window test, wrapping over new year when begin > end.
bool in_day_window(std::int64_t t, unsigned begin_month, unsigned begin_day,
                   unsigned end_month, unsigned end_day);

}  // namespace stdown::util
