#pragma once

#include <cstdint>
#include <vector>

#include "stdown/geo/cube.hpp"

namespace stdown::eval {

// Three-cornered-hat error variances from >= 3 co-located series. With
// exactly 3 products the closed form
//   sigma_i^2 = (Var(d_ij) + Var(d_ik) - Var(d_jk)) / 2
// is used; beyond 3, the reference-difference least-squares form under
// uncorrelated errors (the reference variance is the mean off-diagonal
// element of the difference covariance). Negative estimates clamp to 0
// and are flagged.
struct TchResult {
    std::vector<double> variance;
    std::vector<bool> clamped;
    bool closed_form = false;
};

TchResult tch(const std::vector<std::vector<double>>& series);

// Per-cell variance maps over co-located products. Only timestamps where
// every product is valid at the cell contribute; cells with fewer than
// min_samples shared samples are masked. daily_mean first averages the
// shared samples into UTC-day bins before estimating, for comparing
// 3-hourly against daily sampling.
std::vector<geo::Field2D> tch_maps(const std::vector<geo::TargetField>& products,
                                   std::int64_t min_samples = 30, bool daily_mean = false);

}  // namespace stdown::eval
