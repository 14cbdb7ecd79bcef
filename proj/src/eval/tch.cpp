#include "stdown/eval/tch.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "stdown/util/parallel.hpp"

namespace stdown::eval {

namespace {

double variance(const std::vector<double>& v) {
    const double inv = 1.0 / static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m *= inv;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss * inv;
}

double cov(const std::vector<double>& a, const std::vector<double>& b) {
    const double inv = 1.0 / static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma *= inv;
    mb *= inv;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s * inv;
}

std::vector<double> diff(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return d;
}

}  // namespace

TchResult tch(const std::vector<std::vector<double>>& series) {
    const std::size_t n = series.size();
    if (n < 3) throw std::invalid_argument("TCH needs at least 3 products");
    const std::size_t len = series[0].size();
    for (const auto& s : series)
        if (s.size() != len) throw std::invalid_argument("TCH series must be co-located (equal length)");
    if (len < 2) throw std::invalid_argument("TCH needs at least 2 shared samples");

    TchResult out;
    out.variance.assign(n, 0.0);
    out.clamped.assign(n, false);

    if (n == 3) {
        out.closed_form = true;
        const double v01 = variance(diff(series[0], series[1]));
        const double v02 = variance(diff(series[0], series[2]));
        const double v12 = variance(diff(series[1], series[2]));
        const double raw[3] = {0.5 * (v01 + v02 - v12), 0.5 * (v01 + v12 - v02),
                               0.5 * (v02 + v12 - v01)};
        for (std::size_t i = 0; i < 3; ++i) {
            if (raw[i] < 0.0) {
                out.clamped[i] = true;
                out.variance[i] = 0.0;
            } else {
                out.variance[i] = raw[i];
            }
        }
        return out;
    }

    // reference-difference formulation, product n-1 as reference:
    // S_ij = Cov(s_i - s_ref, s_j - s_ref) = r_ii delta_ij + r_ref
    const std::size_t m = n - 1;
    std::vector<std::vector<double>> d(m);
    for (std::size_t i = 0; i < m; ++i) d[i] = diff(series[i], series[m]);
    double offdiag = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            offdiag += cov(d[i], d[j]);
            ++pairs;
        }
    const double r_ref = offdiag / static_cast<double>(pairs);
    for (std::size_t i = 0; i < m; ++i) {
        const double raw = variance(d[i]) - r_ref;
        out.variance[i] = std::max(raw, 0.0);
        out.clamped[i] = raw < 0.0;
    }
    out.variance[m] = std::max(r_ref, 0.0);
    out.clamped[m] = r_ref < 0.0;
    return out;
}

std::vector<geo::Field2D> tch_maps(const std::vector<geo::TargetField>& products,
                                   std::int64_t min_samples, bool daily_mean) {
    const std::size_t n = products.size();
    if (n < 3) throw std::invalid_argument("TCH needs at least 3 products");
    for (const auto& p : products) {
        if (!(p.grid == products[0].grid)) throw std::invalid_argument("TCH products must share a grid");
        if (p.times != products[0].times)
            throw std::invalid_argument("TCH products must share a time axis");
    }
    const std::int64_t P = products[0].H() * products[0].W();
    const std::int64_t T = products[0].T();

    std::vector<geo::Field2D> maps(n, geo::Field2D(products[0].H(), products[0].W()));
    util::parallel_for(static_cast<std::size_t>(P), [&](std::size_t p) {
        std::vector<std::vector<double>> series(n);
        if (daily_mean) {
            // UTC-day bins over shared-valid samples
            std::int64_t day = std::numeric_limits<std::int64_t>::min();
            std::vector<double> acc(n, 0.0);
            std::int64_t cnt = 0;
            auto flush = [&]() {
                if (cnt > 0)
                    for (std::size_t k = 0; k < n; ++k)
                        series[k].push_back(acc[k] / static_cast<double>(cnt));
                std::fill(acc.begin(), acc.end(), 0.0);
                cnt = 0;
            };
            for (std::int64_t t = 0; t < T; ++t) {
                const std::int64_t this_day = products[0].times[static_cast<std::size_t>(t)] / 86400;
                if (this_day != day) {
                    flush();
                    day = this_day;
                }
                const auto idx = static_cast<std::size_t>(t * P + static_cast<std::int64_t>(p));
                bool all_valid = true;
                for (const auto& prod : products) all_valid &= prod.mask[idx] != 0;
                if (!all_valid) continue;
                for (std::size_t k = 0; k < n; ++k) acc[k] += products[k].values[idx];
                ++cnt;
            }
            flush();
        } else {
            for (std::int64_t t = 0; t < T; ++t) {
                const auto idx = static_cast<std::size_t>(t * P + static_cast<std::int64_t>(p));
                bool all_valid = true;
                for (const auto& prod : products) all_valid &= prod.mask[idx] != 0;
                if (!all_valid) continue;
                for (std::size_t k = 0; k < n; ++k) series[k].push_back(products[k].values[idx]);
            }
        }
        if (static_cast<std::int64_t>(series[0].size()) < min_samples) {
            for (std::size_t k = 0; k < n; ++k) maps[k].mask[p] = 0;
            return;
        }
        const TchResult res = tch(series);
        for (std::size_t k = 0; k < n; ++k) maps[k].values[p] = res.variance[k];
    });
    return maps;
}

}  // namespace stdown::eval
