#pragma once

#include <cstdint>
#include <vector>

#include "stdown/ad/ops.hpp"

namespace stdown::loss {

// Blend and stabilizer settings for the training loss. C1/C2 follow the
// conventional (0.01 L)^2 / (0.03 L)^2 with dynamic range L = 1 in
// normalized units.
struct LossConfig {
    double ratio = 2.0;  // edge-weight coefficient, >= 1
    double alpha = 0.8;  // RMSE/SSIM blend, in [0, 1]
    double dynamic_range = 1.0;
    double c1() const { return 0.01 * dynamic_range * 0.01 * dynamic_range; }
    double c2() const { return 0.03 * dynamic_range * 0.03 * dynamic_range; }
    void validate() const;
};

// Radial edge-weighting kernel:
//   W_e(i,j) = 1 + (ratio-1) * 2*sqrt((i-(H-1)/2)^2 + (j-(W-1)/2)^2)
//                            / sqrt(H^2 + W^2)
ad::Tensor edge_weight_kernel(std::int64_t H, std::int64_t W, double ratio);

// Edge-weighted masked RMSE: sqrt( sum_valid We*(pred-y)^2 / sum_valid We ),
// differentiable through sqrt_eps. pred, target, mask and weights share
// one flattened length.
ad::Value loss_rmse(const ad::Value& pred, const std::vector<double>& target,
                    const std::vector<std::uint8_t>& mask, const ad::Tensor& weights);

// Whole-patch SSIM loss (1 - SSIM) over valid-pixel statistics with the
// population convention. Requires >= 2 valid pixels.
ad::Value loss_ssim(const ad::Value& pred, const std::vector<double>& target,
                    const std::vector<std::uint8_t>& mask, const LossConfig& config);

// alpha * L_RMSE + (1-alpha) * L_SSIM; the SSIM term is skipped (pure
// L_RMSE) when fewer than 2 pixels are valid.
ad::Value loss_full(const ad::Value& pred, const std::vector<double>& target,
                    const std::vector<std::uint8_t>& mask, const ad::Tensor& weights,
                    const LossConfig& config);

std::int64_t count_valid(const std::vector<std::uint8_t>& mask);

}  // namespace stdown::loss
