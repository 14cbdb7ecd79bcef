#include "stdown/model/config.hpp"

#include <stdexcept>

#include "json.hpp"

namespace stdown::model {

using nlohmann::json;

void ModelConfig::validate() const {
    if (in_channels < 4) throw std::invalid_argument("in_channels must cover data + 3 context channels");
    if (base_channels < 1 || num_stages < 1 || t_len < 1)
        throw std::invalid_argument("model counts must be >= 1");
    if (tcn_kernel < 1 || distill_kernel < 1) throw std::invalid_argument("kernel sizes must be >= 1");
    if (tcn_dilations.empty()) throw std::invalid_argument("need at least one TCN level");
    for (int d : tcn_dilations)
        if (d < 1) throw std::invalid_argument("TCN dilations must be >= 1");
    if (static_cast<std::int64_t>(stage_dilations.size()) != num_stages)
        throw std::invalid_argument("stage_dilations must list one dilation per stage");
    for (int d : stage_dilations)
        if (d < 1) throw std::invalid_argument("stage dilations must be >= 1");
    if (stage_kernel % 2 == 0) throw std::invalid_argument("stage kernel must be odd");
    if (se_reduction < 1 || base_channels % se_reduction != 0)
        throw std::invalid_argument("se_reduction must divide base_channels");
    if (ffn_expansion < 1) throw std::invalid_argument("ffn_expansion must be >= 1");
}

std::vector<DistillStep> ModelConfig::distill_plan() const {
    std::vector<DistillStep> plan;
    std::int64_t len = t_len;
    for (int d : tcn_dilations) {
        const std::int64_t eff = static_cast<std::int64_t>(d) * (distill_kernel - 1) + 1;
        if (len >= eff) {
            plan.push_back({distill_kernel, d});
            len -= static_cast<std::int64_t>(d) * (distill_kernel - 1);
        } else {
            plan.push_back({len, 1});
            len = 1;
        }
        if (len == 1) return plan;
    }
    if (len > 1) plan.push_back({len, 1});
    return plan;
}

std::int64_t ModelConfig::receptive_radius() const {
    std::int64_t r = 0;
    for (int d : stage_dilations) r += static_cast<std::int64_t>(d) * (stage_kernel - 1) / 2;
    return r;
}

std::string ModelConfig::to_json() const {
    json j = {{"in_channels", in_channels},
              {"base_channels", base_channels},
              {"tcn_kernel", tcn_kernel},
              {"tcn_dilations", tcn_dilations},
              {"distill_kernel", distill_kernel},
              {"num_stages", num_stages},
              {"stage_kernel", stage_kernel},
              {"stage_dilations", stage_dilations},
              {"se_reduction", se_reduction},
              {"ffn_expansion", ffn_expansion},
              {"t_len", t_len}};
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    ModelConfig c;
    c.in_channels = j.value("in_channels", c.in_channels);
    c.base_channels = j.value("base_channels", c.base_channels);
    c.tcn_kernel = j.value("tcn_kernel", c.tcn_kernel);
    c.tcn_dilations = j.value("tcn_dilations", c.tcn_dilations);
    c.distill_kernel = j.value("distill_kernel", c.distill_kernel);
    c.num_stages = j.value("num_stages", c.num_stages);
    c.stage_kernel = j.value("stage_kernel", c.stage_kernel);
    c.stage_dilations = j.value("stage_dilations", c.stage_dilations);
    c.se_reduction = j.value("se_reduction", c.se_reduction);
    c.ffn_expansion = j.value("ffn_expansion", c.ffn_expansion);
    c.t_len = j.value("t_len", c.t_len);
    return c;
}

}  // namespace stdown::model
