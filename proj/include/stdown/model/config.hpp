#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stdown::model {

// Normalization range for the longitude/latitude context channels,
// shared between the coarse training domain and the fine inference
// domain so both grids get the same encoding.
struct DomainBounds {
    double lat_min = 0.0;
    double lat_max = 1.0;
    double lon_min = 0.0;
    double lon_max = 1.0;
};

// One temporal distillation step: a padding=none convolution of the
// given kernel length and dilation. The plan is a pure function of
// (t_len, distill_kernel, dilations); when the remaining length is
// shorter than the effective kernel, a single kernel of that length
// collapses the axis to 1.
struct DistillStep {
    std::int64_t kernel_len;
    int dilation;
};

struct ModelConfig {
    std::int64_t in_channels = 0;  // raw channels + 3 context, fixed at training time
    std::int64_t base_channels = 64;
    int tcn_kernel = 3;
    std::vector<int> tcn_dilations = {1, 2, 4};  // one entry per TCN level
    int distill_kernel = 3;
    std::int64_t num_stages = 4;
    int stage_kernel = 3;
    std::vector<int> stage_dilations = {1, 2, 1, 2};
    std::int64_t se_reduction = 8;
    std::int64_t ffn_expansion = 4;
    std::int64_t t_len = 5;

    void validate() const;
    std::vector<DistillStep> distill_plan() const;

    // Spatial receptive radius of the stage stack per axis (the SE gate
    // pools globally and sits outside this bound).
    std::int64_t receptive_radius() const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

}  // namespace stdown::model
