#include "stdown/loss/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace stdown::loss {

using namespace stdown::ad;

void LossConfig::validate() const {
    if (ratio < 1.0) throw std::invalid_argument("edge-weight ratio must be >= 1");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0, 1]");
    if (dynamic_range <= 0.0) throw std::invalid_argument("dynamic range must be positive");
}

Tensor edge_weight_kernel(std::int64_t H, std::int64_t W, double ratio) {
    if (H < 1 || W < 1) throw std::invalid_argument("edge_weight_kernel needs H, W >= 1");
    if (ratio < 1.0) throw std::invalid_argument("edge-weight ratio must be >= 1");
    Tensor w({H, W});
    const double ci = static_cast<double>(H - 1) / 2.0;
    const double cj = static_cast<double>(W - 1) / 2.0;
    const double diag = std::sqrt(static_cast<double>(H * H + W * W));
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            const double r = std::sqrt((static_cast<double>(i) - ci) * (static_cast<double>(i) - ci) +
                                       (static_cast<double>(j) - cj) * (static_cast<double>(j) - cj));
            w[i * W + j] = 1.0 + (ratio - 1.0) * 2.0 * r / diag;
        }
    return w;
}

std::int64_t count_valid(const std::vector<std::uint8_t>& mask) {
    std::int64_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
}

namespace {

void check_sizes(const Value& pred, const std::vector<double>& target,
                 const std::vector<std::uint8_t>& mask) {
    const auto n = static_cast<std::size_t>(pred->value.size());
    if (target.size() != n || mask.size() != n)
        throw std::invalid_argument("loss inputs disagree: pred " + std::to_string(n) +
                                    ", target " + std::to_string(target.size()) + ", mask " +
                                    std::to_string(mask.size()));
}

}  // namespace

Value loss_rmse(const Value& pred, const std::vector<double>& target,
                const std::vector<std::uint8_t>& mask, const Tensor& weights) {
    check_sizes(pred, target, mask);
    const std::int64_t n = pred->value.size();
    if (weights.size() != n) throw std::invalid_argument("edge-weight kernel does not match patch");
    if (count_valid(mask) < 1) throw std::invalid_argument("loss_rmse: no valid pixels");

    Tensor wm({n});
    Tensor tv({n});
    double wsum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        wm[i] = mask[static_cast<std::size_t>(i)] ? weights[i] : 0.0;
        tv[i] = target[static_cast<std::size_t>(i)];
        wsum += wm[i];
    }
    Value d = sub(reshape(pred, {n}), constant(tv));
    Value num = reduce_sum(mul(mul(d, d), constant(wm)));
    return sqrt_eps(scale(num, 1.0 / wsum));
}

Value loss_ssim(const Value& pred, const std::vector<double>& target,
                const std::vector<std::uint8_t>& mask, const LossConfig& config) {
    check_sizes(pred, target, mask);
    config.validate();
    const std::int64_t n = pred->value.size();
    const std::int64_t nv = count_valid(mask);
    if (nv < 2) throw std::invalid_argument("loss_ssim needs >= 2 valid pixels");
    const double inv = 1.0 / static_cast<double>(nv);

    // reference statistics are constants
    double mu_y = 0.0;
    for (std::int64_t i = 0; i < n; ++i)
        if (mask[static_cast<std::size_t>(i)]) mu_y += target[static_cast<std::size_t>(i)];
    mu_y *= inv;
    double var_y = 0.0;
    Tensor dy_m({n});  // (y - mu_y) on valid pixels, 0 elsewhere
    Tensor m({n});
    for (std::int64_t i = 0; i < n; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const double d = target[static_cast<std::size_t>(i)] - mu_y;
        dy_m[i] = d;
        m[i] = 1.0;
        var_y += d * d;
    }
    var_y *= inv;

    Value x = reshape(pred, {n});
    Value xm = mul(x, constant(m));
    Value mu_x = scale(reduce_sum(xm), inv);
    Value dx = mul(sub(x, broadcast_to(mu_x, {n})), constant(m));
    Value var_x = scale(reduce_sum(mul(dx, dx)), inv);
    Value cov = scale(reduce_sum(mul(dx, constant(dy_m))), inv);

    const double c1 = config.c1(), c2 = config.c2();
    Value num = mul(add_scalar(scale(mu_x, 2.0 * mu_y), c1), add_scalar(scale(cov, 2.0), c2));
    Value den = mul(add_scalar(mul(mu_x, mu_x), mu_y * mu_y + c1), add_scalar(var_x, var_y + c2));
    Value ssim = div(num, den);
    return add_scalar(scale(ssim, -1.0), 1.0);
}

Value loss_full(const Value& pred, const std::vector<double>& target,
                const std::vector<std::uint8_t>& mask, const Tensor& weights,
                const LossConfig& config) {
    config.validate();
    Value rmse = loss_rmse(pred, target, mask, weights);
    if (count_valid(mask) < 2 || config.alpha == 1.0) return rmse;
    Value ssim = loss_ssim(pred, target, mask, config);
    if (config.alpha == 0.0) return ssim;
    return add(scale(rmse, config.alpha), scale(ssim, 1.0 - config.alpha));
}

}  // namespace stdown::loss
