#include "stdown/model/pscnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "stdown/ad/ops.hpp"
#include "stdown/util/parallel.hpp"
#include "stdown/util/timeaxis.hpp"

namespace stdown::model {

using namespace stdown::ad;
using geo::DataCube;
using geo::TargetField;

DomainBounds bounds_from_grid(const geo::GeoGrid& grid) {
    return {grid.lat0, grid.lat_max(), grid.lon0, grid.lon_max()};
}

namespace {

double norm_coord(double v, double lo, double hi) {
    const double span = std::max(hi - lo, 1e-12);
    return (v - lo) / span;
}

}  // namespace

DataCube positional_encode(const DataCube& cube, const DomainBounds& bounds) {
    if (cube.schema.has_context())
        throw std::invalid_argument("cube already carries context channels");
    DataCube out;
    out.grid = cube.grid;
    out.times = cube.times;
    out.schema = cube.schema;
    out.schema.vars.push_back({"HOY", geo::VarKind::context, "fraction"});
    out.schema.vars.push_back({"longitude", geo::VarKind::context, "fraction"});
    out.schema.vars.push_back({"latitude", geo::VarKind::context, "fraction"});
    out.allocate();

    const std::int64_t T = cube.T(), H = cube.H(), W = cube.W(), C = cube.C();
    const std::int64_t Co = C + 3;
    for (std::int64_t t = 0; t < T; ++t) {
        const double hoy = util::hour_of_year(cube.times[static_cast<std::size_t>(t)]) / 8784.0;
        for (std::int64_t i = 0; i < H; ++i) {
            const double latn = norm_coord(cube.grid.lat(i), bounds.lat_min, bounds.lat_max);
            for (std::int64_t j = 0; j < W; ++j) {
                const double lonn = norm_coord(cube.grid.lon(j), bounds.lon_min, bounds.lon_max);
                const auto src = static_cast<std::size_t>(cube.idx(t, i, j, 0));
                const auto dst = static_cast<std::size_t>(((t * H + i) * W + j) * Co);
                for (std::int64_t c = 0; c < C; ++c) {
                    out.values[dst + static_cast<std::size_t>(c)] = cube.values[src + static_cast<std::size_t>(c)];
                    out.mask[dst + static_cast<std::size_t>(c)] = cube.mask[src + static_cast<std::size_t>(c)];
                }
                out.values[dst + static_cast<std::size_t>(C)] = hoy;
                out.values[dst + static_cast<std::size_t>(C) + 1] = lonn;
                out.values[dst + static_cast<std::size_t>(C) + 2] = latn;
            }
        }
    }
    return out;
}

Value mftf_forward(const Value& window, const ModelParams& params, const ModelConfig& config) {
    const Tensor& wv = window->value;
    if (wv.rank() != 4)
        throw std::invalid_argument("mftf_forward expects T x H x W x C, got " + shape_str(wv.shape()));
    const std::int64_t T = wv.dim(0), H = wv.dim(1), W = wv.dim(2), C = wv.dim(3);
    if (C != config.in_channels)
        throw std::invalid_argument("window has " + std::to_string(C) + " channels, config expects " +
                                    std::to_string(config.in_channels));
    if (T != config.t_len)
        throw std::invalid_argument("window length " + std::to_string(T) +
                                    " does not match configured t_len " + std::to_string(config.t_len));
    const std::int64_t Cb = config.base_channels;

    // per-pixel temporal pipeline: fold space into a batch axis
    Value x = reshape(window, {T, H * W, C});
    for (std::size_t l = 0; l < config.tcn_dilations.size(); ++l) {
        const std::string base = "mftf.tcn" + std::to_string(l);
        Value h = conv1d_time(x, params.get(base + ".conv.w"), params.get(base + ".conv.b"),
                              config.tcn_dilations[l], Pad1d::causal);
        h = gelu(h);
        h = add(h, gelu(pointwise_linear(h, params.get(base + ".enrich.w"),
                                         params.get(base + ".enrich.b"))));
        Value res = x;
        if (l == 0 && C != Cb)
            res = pointwise_linear(x, params.get(base + ".proj.w"), params.get(base + ".proj.b"));
        x = add(h, res);
    }

    const auto plan = config.distill_plan();
    for (std::size_t j = 0; j < plan.size(); ++j) {
        const std::string base = "mftf.distill" + std::to_string(j);
        x = gelu(conv1d_time(x, params.get(base + ".w"), params.get(base + ".b"), plan[j].dilation,
                             Pad1d::none));
    }
    if (x->value.dim(0) != 1)
        throw std::logic_error("distillation did not reduce the temporal axis to 1");
    return reshape(x, {H, W, Cb});
}

Value se_forward(const Value& x, const Value& w1, const Value& b1, const Value& w2,
                 const Value& b2) {
    Value s = sigmoid(pointwise_linear(gelu(pointwise_linear(global_avg_pool(x), w1, b1)), w2, b2));
    return mul_channels(x, s);
}

Value stage_forward(const Value& x, std::int64_t stage_index, const ModelParams& params,
                    const ModelConfig& config) {
    const std::string base = "stage" + std::to_string(stage_index);
    const int d = config.stage_dilations[static_cast<std::size_t>(stage_index)];

    Value u = conv2d(x, params.get(base + ".row.w"), params.get(base + ".row.b"), d, 1, Pad2d::same);
    u = conv2d(u, params.get(base + ".col.w"), params.get(base + ".col.b"), 1, d, Pad2d::same);
    u = gelu(u);
    u = se_forward(u, params.get(base + ".se.w1"), params.get(base + ".se.b1"),
                   params.get(base + ".se.w2"), params.get(base + ".se.b2"));
    Value y = add(x, u);

    Value v = pointwise_linear(y, params.get(base + ".ffn.w1"), params.get(base + ".ffn.b1"));
    v = gelu(v);
    v = pointwise_linear(v, params.get(base + ".ffn.w2"), params.get(base + ".ffn.b2"));
    return add(y, v);
}

Value model_forward(const Value& window, const ModelParams& params, const ModelConfig& config) {
    Value x = mftf_forward(window, params, config);
    for (std::int64_t s = 0; s < config.num_stages; ++s) x = stage_forward(x, s, params, config);
    Value y = pointwise_linear(x, params.get("head.w"), params.get("head.b"));
    return reshape(y, {y->value.dim(0), y->value.dim(1)});
}

Tensor window_at(const DataCube& encoded, std::int64_t t_end, std::int64_t t_len) {
    const std::int64_t H = encoded.H(), W = encoded.W(), C = encoded.C();
    if (t_end < t_len - 1 || t_end >= encoded.T())
        throw std::invalid_argument("window does not fit before t_end");
    Tensor w({t_len, H, W, C});
    double* wd = w.data();
    const std::int64_t plane = H * W * C;
    for (std::int64_t dt = 0; dt < t_len; ++dt) {
        const std::int64_t t = t_end - (t_len - 1) + dt;
        const auto base = static_cast<std::size_t>(t * plane);
        for (std::int64_t k = 0; k < plane; ++k)
            wd[dt * plane + k] = encoded.mask[base + static_cast<std::size_t>(k)]
                                     ? encoded.values[base + static_cast<std::size_t>(k)]
                                     : 0.0;
    }
    return w;
}

namespace {

// valid(i,j) = all channels valid at (t,i,j) for every window step,
// then eroded by the stage receptive radius (separable box minimum).
std::vector<std::uint8_t> window_valid_mask(const DataCube& cube, std::int64_t t_end,
                                            std::int64_t t_len, std::int64_t radius) {
    const std::int64_t H = cube.H(), W = cube.W(), C = cube.C();
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(H * W), 1);
    for (std::int64_t dt = 0; dt < t_len; ++dt) {
        const std::int64_t t = t_end - (t_len - 1) + dt;
        for (std::int64_t p = 0; p < H * W; ++p) {
            if (!valid[static_cast<std::size_t>(p)]) continue;
            const auto base = static_cast<std::size_t>((t * H * W + p) * C);
            for (std::int64_t c = 0; c < C; ++c)
                if (!cube.mask[base + static_cast<std::size_t>(c)]) {
                    valid[static_cast<std::size_t>(p)] = 0;
                    break;
                }
        }
    }
    if (radius <= 0) return valid;
    std::vector<std::uint8_t> rows(valid.size(), 1);
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            std::uint8_t m = 1;
            for (std::int64_t k = std::max<std::int64_t>(0, j - radius);
                 k <= std::min(W - 1, j + radius); ++k)
                m &= valid[static_cast<std::size_t>(i * W + k)];
            rows[static_cast<std::size_t>(i * W + j)] = m;
        }
    std::vector<std::uint8_t> out(valid.size(), 1);
    for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j) {
            std::uint8_t m = 1;
            for (std::int64_t k = std::max<std::int64_t>(0, i - radius);
                 k <= std::min(H - 1, i + radius); ++k)
                m &= rows[static_cast<std::size_t>(k * W + j)];
            out[static_cast<std::size_t>(i * W + j)] = m;
        }
    return out;
}

}  // namespace

TargetField infer_full(const DataCube& cube_raw, const ModelParams& params,
                       const ModelConfig& config, const geo::NormStats& stats,
                       const geo::ChannelStats& target_stats, const DomainBounds& bounds) {
    config.validate();
    const DataCube normalized = geo::zscore_apply(cube_raw, stats);
    const DataCube encoded = positional_encode(normalized, bounds);
    if (encoded.C() != config.in_channels)
        throw std::invalid_argument("cube channels (+context) = " + std::to_string(encoded.C()) +
                                    " do not match model in_channels = " +
                                    std::to_string(config.in_channels));

    const std::int64_t t_len = config.t_len;
    const std::int64_t H = encoded.H(), W = encoded.W();
    const std::int64_t n_out = encoded.T() - (t_len - 1);
    if (n_out <= 0) throw std::invalid_argument("cube has fewer timestamps than the window length");

    TargetField out;
    out.grid = encoded.grid;
    out.times.assign(encoded.times.begin() + (t_len - 1), encoded.times.end());
    out.allocate();

    const std::int64_t radius = config.receptive_radius();
    util::parallel_for(static_cast<std::size_t>(n_out), [&](std::size_t k) {
        NoGradGuard guard;
        const std::int64_t t_end = static_cast<std::int64_t>(k) + t_len - 1;
        Tensor win = window_at(encoded, t_end, t_len);
        Value pred = model_forward(constant(std::move(win)), params, config);
        const auto valid = window_valid_mask(encoded, t_end, t_len, radius);
        const auto base = static_cast<std::size_t>(static_cast<std::int64_t>(k) * H * W);
        for (std::int64_t p = 0; p < H * W; ++p) {
            if (!valid[static_cast<std::size_t>(p)]) {
                out.mask[base + static_cast<std::size_t>(p)] = 0;
                continue;
            }
            const double sm = pred->value[p] * target_stats.stddev + target_stats.mean;
            out.values[base + static_cast<std::size_t>(p)] = std::clamp(sm, 0.0, 1.0);
        }
    });
    return out;
}

}  // namespace stdown::model
