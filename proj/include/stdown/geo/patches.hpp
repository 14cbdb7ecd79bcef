#pragma once

#include <cstdint>
#include <vector>

#include "stdown/ad/tensor.hpp"
#include "stdown/geo/cube.hpp"

namespace stdown::geo {

enum class AugOp { flip_h, flip_v, transpose };

// One training sample: a t_len window of the cube ending at a
// target-observation timestamp, with the label map at that timestamp.
// The window is materialized on demand; augmentation ops queue up and
// apply to window, label and mask alike.
struct Patch {
    std::int64_t id = 0;         // stable id for the leakage audit
    std::int64_t cube_t_end = 0;  // cube time index of the window's last step
    std::int64_t target_t = 0;    // target time index of the label
    std::int64_t i0 = 0, j0 = 0;  // spatial anchor (row, col)
    std::int64_t size = 0;
    std::int64_t t_len = 0;
    std::vector<double> label;        // size*size
    std::vector<std::uint8_t> label_mask;
    std::vector<AugOp> aug;
};

std::vector<Patch> extract_patches(const DataCube& cube, const TargetField& target,
                                   std::int64_t size = 32, std::int64_t t_len = 5,
                                   std::int64_t stride = 10);

// Applies op to the patch: label and mask eagerly, window lazily.
Patch augment(const Patch& p, AugOp op);

// In-memory spatial transform used for patch windows and in tests.
// data layout: size x size x C (C may be 1).
void apply_aug(AugOp op, std::int64_t size, std::int64_t channels, std::vector<double>& data);
void apply_aug(AugOp op, std::int64_t size, std::int64_t channels, std::vector<std::uint8_t>& data);

// The t_len x size x size x C window for a patch. Channels are the cube's
// channels; masked cells carry 0 (callers normalize the cube first, so 0
// is the channel mean). Augmentation ops are applied in queue order.
ad::Tensor patch_window(const DataCube& cube, const Patch& p);

struct PatchSplit {
    std::vector<Patch> train;  // augmented: original + flip_h + flip_v + transpose
    std::vector<Patch> val;
    std::vector<Patch> test;
    std::size_t train_base = 0;  // pre-augmentation count
};

// Deterministic 70/15/15 split (floor allocation, remainder to train);
// flip/transpose/mirror augmentation is applied to the train split only.
PatchSplit split_patches(const std::vector<Patch>& patches, std::uint64_t seed);

}  // namespace stdown::geo
