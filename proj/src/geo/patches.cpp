#include "stdown/geo/patches.hpp"

#include <algorithm>
#include <stdexcept>

#include "stdown/util/rng.hpp"

namespace stdown::geo {

std::vector<Patch> extract_patches(const DataCube& cube, const TargetField& target,
                                   std::int64_t size, std::int64_t t_len, std::int64_t stride) {
    if (cube.H() < size || cube.W() < size)
        throw std::invalid_argument("cube " + std::to_string(cube.H()) + "x" +
                                    std::to_string(cube.W()) + " is smaller than patch size " +
                                    std::to_string(size));
    if (t_len < 1 || t_len > cube.T())
        throw std::invalid_argument("window length must be in [1, T]");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (!(cube.grid == target.grid))
        throw std::invalid_argument("cube and target grids differ");

    std::vector<Patch> out;
    std::int64_t next_id = 0;
    for (std::int64_t tt = 0; tt < target.T(); ++tt) {
        const auto it = [&]() -> std::int64_t {
            for (std::size_t k = 0; k < cube.times.size(); ++k)
                if (cube.times[k] == target.times[static_cast<std::size_t>(tt)])
                    return static_cast<std::int64_t>(k);
            return -1;
        }();
        if (it < t_len - 1) continue;  // window must fit before the anchor
        for (std::int64_t i0 = 0; i0 + size <= cube.H(); i0 += stride) {
            for (std::int64_t j0 = 0; j0 + size <= cube.W(); j0 += stride) {
                Patch p;
                p.cube_t_end = it;
                p.target_t = tt;
                p.i0 = i0;
                p.j0 = j0;
                p.size = size;
                p.t_len = t_len;
                p.label.resize(static_cast<std::size_t>(size * size));
                p.label_mask.resize(static_cast<std::size_t>(size * size));
                bool any_valid = false;
                for (std::int64_t i = 0; i < size; ++i)
                    for (std::int64_t j = 0; j < size; ++j) {
                        const auto src = static_cast<std::size_t>(target.idx(tt, i0 + i, j0 + j));
                        const auto dst = static_cast<std::size_t>(i * size + j);
                        p.label[dst] = target.values[src];
                        p.label_mask[dst] = target.mask[src];
                        any_valid |= target.mask[src] != 0;
                    }
                if (!any_valid) continue;
                p.id = next_id++;
                out.push_back(std::move(p));
            }
        }
    }
    return out;
}

namespace {

template <typename T>
void aug_copy(AugOp op, std::int64_t n, std::int64_t C, const std::vector<T>& src,
              std::vector<T>& dst) {
    dst.resize(src.size());
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            std::int64_t si = i, sj = j;
            switch (op) {
                case AugOp::flip_h: sj = n - 1 - j; break;
                case AugOp::flip_v: si = n - 1 - i; break;
                case AugOp::transpose: si = j; sj = i; break;
            }
            for (std::int64_t c = 0; c < C; ++c)
                dst[static_cast<std::size_t>((i * n + j) * C + c)] =
                    src[static_cast<std::size_t>((si * n + sj) * C + c)];
        }
}

}  // namespace

void apply_aug(AugOp op, std::int64_t size, std::int64_t channels, std::vector<double>& data) {
    std::vector<double> tmp;
    aug_copy(op, size, channels, data, tmp);
    data.swap(tmp);
}

void apply_aug(AugOp op, std::int64_t size, std::int64_t channels, std::vector<std::uint8_t>& data) {
    std::vector<std::uint8_t> tmp;
    aug_copy(op, size, channels, data, tmp);
    data.swap(tmp);
}

Patch augment(const Patch& p, AugOp op) {
    Patch q = p;
    apply_aug(op, q.size, 1, q.label);
    apply_aug(op, q.size, 1, q.label_mask);
    q.aug.push_back(op);
    return q;
}

ad::Tensor patch_window(const DataCube& cube, const Patch& p) {
    const std::int64_t C = cube.C();
    const std::int64_t n = p.size;
    ad::Tensor w({p.t_len, n, n, C});
    double* wd = w.data();
    for (std::int64_t dt = 0; dt < p.t_len; ++dt) {
        const std::int64_t t = p.cube_t_end - (p.t_len - 1) + dt;
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j)
                for (std::int64_t c = 0; c < C; ++c) {
                    const auto src = static_cast<std::size_t>(cube.idx(t, p.i0 + i, p.j0 + j, c));
                    wd[((dt * n + i) * n + j) * C + c] =
                        cube.mask[src] ? cube.values[src] : 0.0;
                }
    }
    if (!p.aug.empty()) {
        // each timestep transforms identically; context channels ride along
        std::vector<double> plane(static_cast<std::size_t>(n * n * C));
        for (std::int64_t dt = 0; dt < p.t_len; ++dt) {
            double* base = wd + dt * n * n * C;
            std::copy_n(base, plane.size(), plane.begin());
            for (AugOp op : p.aug) apply_aug(op, n, C, plane);
            std::copy_n(plane.begin(), plane.size(), base);
        }
    }
    return w;
}

PatchSplit split_patches(const std::vector<Patch>& patches, std::uint64_t seed) {
    if (patches.size() < 10)
        throw std::invalid_argument("need at least 10 patches to split, got " +
                                    std::to_string(patches.size()));
    std::vector<std::size_t> order(patches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    util::Rng rng(seed);
    rng.shuffle(order);

    const std::size_t n = patches.size();
    const std::size_t n_val = n * 15 / 100;  // floor allocation, remainder to train
    const std::size_t n_test = n_val;
    const std::size_t n_train = n - n_val - n_test;

    PatchSplit split;
    split.train_base = n_train;
    for (std::size_t k = 0; k < n; ++k) {
        const Patch& p = patches[order[k]];
        if (k < n_train) {
            split.train.push_back(p);
            split.train.push_back(augment(p, AugOp::flip_h));
            split.train.push_back(augment(p, AugOp::flip_v));
            split.train.push_back(augment(p, AugOp::transpose));
        } else if (k < n_train + n_val) {
            split.val.push_back(p);
        } else {
            split.test.push_back(p);
        }
    }
    return split;
}

}  // namespace stdown::geo
