#include "stdown/util/timeaxis.hpp"

namespace stdown::util {

// Howard Hinnant's civil calendar algorithms.
CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::int64_t year_start_epoch(std::int64_t t) {
    std::int64_t days = t / 86400;
    if (t < 0 && t % 86400 != 0) --days;
    const CivilDate cd = civil_from_days(days);
    return days_from_civil(cd.year, 1, 1) * 86400;
}

double hour_of_year(std::int64_t t) {
    return static_cast<double>(t - year_start_epoch(t)) / 3600.0;
}

int hour_of_day(std::int64_t t) {
    std::int64_t s = t % 86400;
    if (s < 0) s += 86400;
    return static_cast<int>(s / 3600);
}

bool in_day_window(std::int64_t t, unsigned begin_month, unsigned begin_day,
                   unsigned end_month, unsigned end_day) {
    std::int64_t days = t / 86400;
    if (t < 0 && t % 86400 != 0) --days;
    const CivilDate cd = civil_from_days(days);
    const unsigned key = cd.month * 100 + cd.day;
    const unsigned b = begin_month * 100 + begin_day;
    const unsigned e = end_month * 100 + end_day;
    if (b <= e) return key >= b && key < e;
    return key >= b || key < e;
}

}  // namespace stdown::util
