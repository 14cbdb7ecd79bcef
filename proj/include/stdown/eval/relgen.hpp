#pragma once

#include <array>
#include <map>
#include <optional>

#include "stdown/eval/metrics.hpp"

namespace stdown::eval {

// Temporal generalization relative to the 06:00/18:00 training-time
// baseline: Xbar = (X6 + X18)/2, RE_R(j) = (Xj - Xbar)/Xbar,
// RE_ubRMSE(j) = (Xbar - Xj)/Xbar over the six non-training hours
// {0, 3, 9, 12, 15, 21}; positive = better than baseline. The mean RE
// averages the six entries and is absent when any is undefined.
struct RETable {
    static constexpr std::array<int, 6> kHours = {0, 3, 9, 12, 15, 21};
    std::optional<double> baseline_r;
    std::optional<double> baseline_ubrmse;
    std::array<std::optional<double>, 6> re_r;
    std::array<std::optional<double>, 6> re_ubrmse;
    std::optional<double> mean_re_r;
    std::optional<double> mean_re_ubrmse;
};

RETable relgen(const std::map<int, MetricsReport>& by_hour);

}  // namespace stdown::eval
