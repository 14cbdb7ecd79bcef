#include "stdown/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace stdown::ad {

namespace {

double eval_scalar(const GradFn& f, const std::vector<Tensor>& inputs) {
    NoGradGuard guard;
    std::vector<Value> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(constant(t));
    return f(leaves)->value.item();
}

double rel_err(double a, double b) {
    const double den = std::max({std::fabs(a), std::fabs(b), 1e-8});
    return std::fabs(a - b) / den;
}

double check_coords(const GradFn& f, std::vector<Tensor>& inputs, double h,
                    const std::vector<std::vector<std::int64_t>>& coords, double signal_floor) {
    // analytic gradients
    std::vector<Value> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(param(t));
    Value loss = f(leaves);
    backward(loss);

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor& t = inputs[k];
        const Tensor& g = leaves[k]->grad;
        for (std::int64_t idx : coords[k]) {
            const double keep = t[idx];
            t[idx] = keep + h;
            const double fp = eval_scalar(f, inputs);
            t[idx] = keep - h;
            const double fm = eval_scalar(f, inputs);
            t[idx] = keep;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = g.empty() ? 0.0 : g[idx];
            if (std::fabs(fd) < signal_floor && std::fabs(an) < signal_floor) continue;
            worst = std::max(worst, rel_err(fd, an));
        }
    }
    return worst;
}

}  // namespace

double grad_check(const GradFn& f, std::vector<Tensor> inputs, double h, double signal_floor) {
    std::vector<std::vector<std::int64_t>> coords(inputs.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        coords[k].resize(static_cast<std::size_t>(inputs[k].size()));
        for (std::int64_t i = 0; i < inputs[k].size(); ++i) coords[k][static_cast<std::size_t>(i)] = i;
    }
    return check_coords(f, inputs, h, coords, signal_floor);
}

double grad_check_sampled(const GradFn& f, std::vector<Tensor> inputs, double h,
                          int n_coords, util::Rng& rng, double signal_floor) {
    std::vector<std::vector<std::int64_t>> coords(inputs.size());
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const std::int64_t n = inputs[k].size();
        const std::int64_t take = std::min<std::int64_t>(n, n_coords);
        for (std::int64_t i = 0; i < take; ++i)
            coords[k].push_back(static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(n))));
    }
    return check_coords(f, inputs, h, coords, signal_floor);
}

}  // namespace stdown::ad
