#include <cmath>

#include "doctest.h"
#include "stdown/ad/gradcheck.hpp"
#include "stdown/loss/loss.hpp"
#include "stdown/util/rng.hpp"

using namespace stdown;
using namespace stdown::ad;
using namespace stdown::loss;

TEST_CASE("edge weight kernel: center, degenerate ratio, corner hand value") {
    auto w = edge_weight_kernel(33, 33, 2.0);
    CHECK(w[16 * 33 + 16] == 1.0);  // zero radius at the center pixel

    auto flat = edge_weight_kernel(32, 32, 1.0);
    for (std::int64_t i = 0; i < flat.size(); ++i) CHECK(flat[i] == 1.0);

    auto w32 = edge_weight_kernel(32, 32, 2.0);
    CHECK(std::fabs(w32[0] - 1.96875) < 1e-12);

    // radially non-decreasing, maximal at corners
    double corner = w32[0];
    for (std::int64_t i = 0; i < w32.size(); ++i) CHECK(w32[i] <= corner + 1e-15);
    for (std::int64_t j = 0; j < 15; ++j) CHECK(w32[j] >= w32[j + 1] - 1e-15);

    CHECK_THROWS_AS(edge_weight_kernel(32, 32, 0.5), std::invalid_argument);
}

TEST_CASE("loss_rmse: exact zero, hand value, single-pixel reduction") {
    std::vector<double> target = {0.1, 0.2, 0.3, 0.4};
    std::vector<std::uint8_t> mask = {1, 1, 1, 1};
    auto we = edge_weight_kernel(2, 2, 1.0);

    Tensor p({4});
    for (int i = 0; i < 4; ++i) p[i] = target[static_cast<std::size_t>(i)];
    auto zero = loss_rmse(constant(p), target, mask, we);
    CHECK(zero->value.item() < 2e-6);  // sqrt_eps floor

    // diffs [3,4] over 2 valid pixels, uniform weights
    std::vector<double> t2 = {0.0, 0.0, 5.0, 5.0};
    std::vector<std::uint8_t> m2 = {1, 1, 0, 0};
    Tensor p2({4});
    p2[0] = 3.0;
    p2[1] = 4.0;
    p2[2] = 1.0;
    p2[3] = 1.0;
    auto hand = loss_rmse(constant(p2), t2, m2, we);
    CHECK(hand->value.item() == doctest::Approx(3.5355339059327378).epsilon(1e-9));

    // one valid pixel with error e reduces to |e| for any weights
    std::vector<std::uint8_t> m1 = {0, 1, 0, 0};
    auto we2 = edge_weight_kernel(2, 2, 3.0);
    Tensor p3({4});
    p3[1] = 0.2 - 0.07;
    std::vector<double> t3 = {9.0, 0.2, 9.0, 9.0};
    auto single = loss_rmse(constant(p3), t3, m1, we2);
    CHECK(single->value.item() == doctest::Approx(0.07).epsilon(1e-6));

    std::vector<std::uint8_t> none = {0, 0, 0, 0};
    CHECK_THROWS_AS(loss_rmse(constant(p), target, none, we), std::invalid_argument);
}

TEST_CASE("loss_ssim: identity, constant-zero stabilizer case, hand value, symmetry") {
    LossConfig cfg;
    util::Rng rng(21);
    std::vector<double> target(16);
    for (auto& v : target) v = rng.uniform(0.0, 1.0);
    std::vector<std::uint8_t> mask(16, 1);

    Tensor p({16});
    for (int i = 0; i < 16; ++i) p[i] = target[static_cast<std::size_t>(i)];
    CHECK(loss_ssim(constant(p), target, mask, cfg)->value.item() == doctest::Approx(0.0).epsilon(1e-12));

    // both patches constant zero: SSIM = C1*C2/(C1*C2) = 1
    std::vector<double> zt(16, 0.0);
    Tensor zp({16});
    CHECK(loss_ssim(constant(zp), zt, mask, cfg)->value.item() == doctest::Approx(0.0).epsilon(1e-12));

    // constant patches 0.2 vs 0.4 with the default stabilizers
    std::vector<double> ct(16, 0.4);
    Tensor cp = Tensor::full({16}, 0.2);
    const double got = loss_ssim(constant(cp), ct, mask, cfg)->value.item();
    CHECK(std::fabs(got - 0.19990004997501254) < 1e-4);

    // symmetry in (pred, target)
    std::vector<double> a(16), b(16);
    for (auto& v : a) v = rng.uniform(0.0, 1.0);
    for (auto& v : b) v = rng.uniform(0.0, 1.0);
    Tensor ta({16}), tb({16});
    for (int i = 0; i < 16; ++i) {
        ta[i] = a[static_cast<std::size_t>(i)];
        tb[i] = b[static_cast<std::size_t>(i)];
    }
    const double ab = loss_ssim(constant(ta), b, mask, cfg)->value.item();
    const double ba = loss_ssim(constant(tb), a, mask, cfg)->value.item();
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));

    // bounded in [0, 2]
    CHECK(ab >= 0.0);
    CHECK(ab <= 2.0);

    std::vector<std::uint8_t> one(16, 0);
    one[3] = 1;
    CHECK_THROWS_AS(loss_ssim(constant(ta), b, one, cfg), std::invalid_argument);
}

TEST_CASE("loss_full blend endpoints and arithmetic") {
    util::Rng rng(22);
    std::vector<double> target(9);
    for (auto& v : target) v = rng.uniform(0.0, 1.0);
    std::vector<std::uint8_t> mask(9, 1);
    auto we = edge_weight_kernel(3, 3, 2.0);
    Tensor p({9});
    for (int i = 0; i < 9; ++i) p[i] = rng.uniform(0.0, 1.0);

    LossConfig cfg;
    cfg.alpha = 1.0;
    CHECK(loss_full(constant(p), target, mask, we, cfg)->value.item() ==
          loss_rmse(constant(p), target, mask, we)->value.item());
    cfg.alpha = 0.0;
    CHECK(loss_full(constant(p), target, mask, we, cfg)->value.item() ==
          loss_ssim(constant(p), target, mask, cfg)->value.item());
    cfg.alpha = 0.5;
    const double r = loss_rmse(constant(p), target, mask, we)->value.item();
    const double s = loss_ssim(constant(p), target, mask, cfg)->value.item();
    CHECK(loss_full(constant(p), target, mask, we, cfg)->value.item() ==
          doctest::Approx(0.5 * r + 0.5 * s).epsilon(1e-15));

    // single valid pixel: SSIM skipped, pure RMSE at any alpha
    std::vector<std::uint8_t> one(9, 0);
    one[4] = 1;
    CHECK(loss_full(constant(p), target, one, we, cfg)->value.item() ==
          loss_rmse(constant(p), target, one, we)->value.item());
}

TEST_CASE("loss_full gradient matches finite differences on masked 8x8 patches") {
    util::Rng rng(23);
    for (int it = 0; it < 5; ++it) {
        std::vector<double> target(64);
        for (auto& v : target) v = rng.uniform(0.0, 1.0);
        std::vector<std::uint8_t> mask(64, 1);
        for (auto& m : mask) m = rng.next_double() < 0.75 ? 1 : 0;
        if (count_valid(mask) < 2) mask[0] = mask[1] = 1;
        auto we = edge_weight_kernel(8, 8, 2.0);
        LossConfig cfg;
        Tensor p({64});
        for (int i = 0; i < 64; ++i) p[i] = rng.uniform(0.0, 1.0);
        auto f = [&](const std::vector<Value>& v) { return loss_full(v[0], target, mask, we, cfg); };
        CHECK(grad_check(f, {p}) < 1e-4);
    }
}
