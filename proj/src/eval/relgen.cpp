#include "stdown/eval/relgen.hpp"

#include <stdexcept>

namespace stdown::eval {

RETable relgen(const std::map<int, MetricsReport>& by_hour) {
    const auto at6 = by_hour.find(6);
    const auto at18 = by_hour.find(18);
    if (at6 == by_hour.end() || at18 == by_hour.end())
        throw std::invalid_argument("relgen needs baseline metrics at 06:00 and 18:00");

    RETable out;
    if (at6->second.r && at18->second.r) out.baseline_r = 0.5 * (*at6->second.r + *at18->second.r);
    if (at6->second.ubrmse && at18->second.ubrmse)
        out.baseline_ubrmse = 0.5 * (*at6->second.ubrmse + *at18->second.ubrmse);

    bool all_r = true, all_ub = true;
    double sum_r = 0.0, sum_ub = 0.0;
    for (std::size_t k = 0; k < RETable::kHours.size(); ++k) {
        const auto it = by_hour.find(RETable::kHours[k]);
        if (it != by_hour.end() && it->second.r && out.baseline_r && *out.baseline_r != 0.0)
            out.re_r[k] = (*it->second.r - *out.baseline_r) / *out.baseline_r;
        if (it != by_hour.end() && it->second.ubrmse && out.baseline_ubrmse &&
            *out.baseline_ubrmse != 0.0)
            out.re_ubrmse[k] = (*out.baseline_ubrmse - *it->second.ubrmse) / *out.baseline_ubrmse;
        if (out.re_r[k])
            sum_r += *out.re_r[k];
        else
            all_r = false;
        if (out.re_ubrmse[k])
            sum_ub += *out.re_ubrmse[k];
        else
            all_ub = false;
    }
    if (all_r) out.mean_re_r = sum_r / static_cast<double>(RETable::kHours.size());
    if (all_ub) out.mean_re_ubrmse = sum_ub / static_cast<double>(RETable::kHours.size());
    return out;
}

}  // namespace stdown::eval
