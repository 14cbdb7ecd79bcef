#pragma once

#include "stdown/geo/cube.hpp"
#include "stdown/model/params.hpp"

namespace stdown::model {

// Appends the three context channels {HOY, longitude, latitude} to a
// cube. HOY is hour-of-year / 8784 (leap-safe divisor); longitude and
// latitude are normalized by the domain bounds. Rejected if the cube
// already carries context channels.
geo::DataCube positional_encode(const geo::DataCube& cube, const DomainBounds& bounds);

DomainBounds bounds_from_grid(const geo::GeoGrid& grid);

// Temporal encoder: causal TCN levels with pointwise feature enrichment,
// then no-padding distillation convolutions that collapse the time axis
// to a single contextual map. window: T x H x W x C' -> H x W x Cb.
ad::Value mftf_forward(const ad::Value& window, const ModelParams& params,
                       const ModelConfig& config);

// Channel gate from globally pooled statistics through a bottleneck:
// x * sigmoid(W2 gelu(W1 gap(x))).
ad::Value se_forward(const ad::Value& x, const ad::Value& w1, const ad::Value& b1,
                     const ad::Value& w2, const ad::Value& b2);

// One stage: factorized dilated SE-conv residual branch plus an
// inverted-residual FFN branch. Spatial shape is preserved.
ad::Value stage_forward(const ad::Value& x, std::int64_t stage_index, const ModelParams& params,
                        const ModelConfig& config);

// Full model: MFTF -> stages -> pointwise head. window must already be
// normalized and context-encoded. Returns an H x W map in normalized
// units.
ad::Value model_forward(const ad::Value& window, const ModelParams& params,
                        const ModelConfig& config);

// Builds the T x H x W x C' window tensor ending at cube time index
// t_end from a normalized, context-encoded cube. Masked cells carry 0
// (the channel mean in normalized units).
ad::Tensor window_at(const geo::DataCube& encoded, std::int64_t t_end, std::int64_t t_len);

// Full-image inference over every timestamp with a complete window:
// forward, denormalize with the target's training stats, clamp to
// [0, 1] m3/m3. Output cells are masked where any input channel is
// invalid within the receptive field (box erosion over the window).
geo::TargetField infer_full(const geo::DataCube& cube_raw, const ModelParams& params,
                            const ModelConfig& config, const geo::NormStats& stats,
                            const geo::ChannelStats& target_stats, const DomainBounds& bounds);

}  // namespace stdown::model
