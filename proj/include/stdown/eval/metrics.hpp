#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace stdown::eval {

// Pooled series statistics. x is the observed series, y the prediction;
// bias = mean(x - y). Metrics below their minimum sample count are
// reported absent, not zero. The identity rmse^2 = ubrmse^2 + bias^2
// holds whenever all three are present.
struct MetricsReport {
    std::int64_t n = 0;
    std::optional<double> r;       // needs n >= 2 and nonzero variances
    std::optional<double> bias;    // needs n >= 1
    std::optional<double> rmse;    // needs n >= 1
    std::optional<double> ubrmse;  // needs n >= 2
};

MetricsReport metrics(const std::vector<double>& x, const std::vector<double>& y);

// Pairs with either side masked are excluded.
MetricsReport metrics_masked(const std::vector<double>& x, const std::vector<std::uint8_t>& xmask,
                             const std::vector<double>& y, const std::vector<std::uint8_t>& ymask);

}  // namespace stdown::eval
