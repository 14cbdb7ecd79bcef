#include "stdown/eval/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace stdown::eval {

MetricsReport metrics(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("metrics: series lengths differ");
    MetricsReport rep;
    rep.n = static_cast<std::int64_t>(x.size());
    const auto n = x.size();
    if (n == 0) return rep;
    const double inv = 1.0 / static_cast<double>(n);

    double mx = 0.0, my = 0.0, md = 0.0, msd = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
        const double d = x[i] - y[i];
        md += d;
        msd += d * d;
    }
    mx *= inv;
    my *= inv;
    md *= inv;
    msd *= inv;
    rep.bias = md;
    rep.rmse = std::sqrt(msd);
    if (n < 2) return rep;

    double sxx = 0.0, syy = 0.0, sxy = 0.0, ub = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
        ub += (dx - dy) * (dx - dy);
    }
    rep.ubrmse = std::sqrt(ub * inv);
    if (sxx > 0.0 && syy > 0.0) rep.r = sxy / std::sqrt(sxx * syy);
    return rep;
}

MetricsReport metrics_masked(const std::vector<double>& x, const std::vector<std::uint8_t>& xmask,
                             const std::vector<double>& y, const std::vector<std::uint8_t>& ymask) {
    if (x.size() != y.size() || x.size() != xmask.size() || y.size() != ymask.size())
        throw std::invalid_argument("metrics_masked: lengths differ");
    std::vector<double> xs, ys;
    xs.reserve(x.size());
    ys.reserve(y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        if (xmask[i] && ymask[i]) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    return metrics(xs, ys);
}

}  // namespace stdown::eval
