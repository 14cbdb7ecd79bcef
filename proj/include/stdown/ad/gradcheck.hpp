#pragma once

#include <functional>
#include <vector>

#include "stdown/ad/ops.hpp"
#include "stdown/util/rng.hpp"

namespace stdown::ad {

// f builds a scalar loss from leaf values constructed over the given
// tensors. Central differences (f(x+h e) - f(x-h e)) / 2h are compared
// elementwise to the reverse-mode gradient; the relative error uses a
// max(|a|,|b|,1e-8) denominator. Returns the maximum relative error.
//
// signal_floor: coordinates where both sides are below this magnitude
// count as agreeing. Central differences at h=1e-5 on an O(1) loss carry
// ~1e-12 absolute noise, so gradients under ~1e-7 cannot be resolved;
// whole-model checks set the floor there, per-op checks leave it at 0.
using GradFn = std::function<Value(const std::vector<Value>&)>;

double grad_check(const GradFn& f, std::vector<Tensor> inputs, double h = 1e-5,
                  double signal_floor = 0.0);

// Same check restricted to n_coords randomly sampled coordinates per
// input tensor; used where the full elementwise sweep is too expensive
// (e.g. whole-model checks).
double grad_check_sampled(const GradFn& f, std::vector<Tensor> inputs, double h,
                          int n_coords, util::Rng& rng, double signal_floor = 0.0);

}  // namespace stdown::ad
