#include <cmath>
#include <numbers>

#include "doctest.h"
#include "stdown/ad/gradcheck.hpp"
#include "stdown/ad/ops.hpp"
#include "stdown/util/rng.hpp"

using namespace stdown;
using namespace stdown::ad;

namespace {

Tensor random_tensor(Shape shape, util::Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("conv2d identity kernel reproduces input") {
    util::Rng rng(1);
    Tensor x = random_tensor({5, 7, 1}, rng);
    Tensor k({3, 3, 1, 1});
    k[4] = 1.0;  // center tap
    auto y = conv2d(constant(x), constant(k), Value{}, 1, 1, Pad2d::same);
    REQUIRE(y->value.shape() == Shape{5, 7, 1});
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y->value[i] == doctest::Approx(x[i]).epsilon(1e-15));
}

TEST_CASE("conv2d all-ones 3x3 on constant field gives 9c with padding=none") {
    Tensor x = Tensor::full({6, 6, 1}, 0.37);
    Tensor k = Tensor::full({3, 3, 1, 1}, 1.0);
    auto y = conv2d(constant(x), constant(k), Value{}, 1, 1, Pad2d::none);
    REQUIRE(y->value.shape() == Shape{4, 4, 1});
    for (std::int64_t i = 0; i < y->value.size(); ++i)
        CHECK(y->value[i] == doctest::Approx(9.0 * 0.37).epsilon(1e-14));
}

TEST_CASE("conv2d k=3 d=2 shrinks 8x8 to 4x4 with padding=none") {
    Tensor x({8, 8, 2});
    Tensor k({3, 3, 2, 5});
    auto y = conv2d(constant(x), constant(k), Value{}, 2, 2, Pad2d::none);
    CHECK(y->value.shape() == Shape{4, 4, 5});
    Tensor small({4, 4, 2});
    CHECK_THROWS_AS(conv2d(constant(small), constant(k), Value{}, 2, 2, Pad2d::none),
                    std::invalid_argument);
}

TEST_CASE("conv2d linearity") {
    util::Rng rng(2);
    Tensor k = random_tensor({3, 3, 2, 3}, rng);
    Tensor a = random_tensor({6, 6, 2}, rng);
    Tensor b = random_tensor({6, 6, 2}, rng);
    const double al = 0.7, be = -1.3;
    Tensor mix({6, 6, 2});
    for (std::int64_t i = 0; i < mix.size(); ++i) mix[i] = al * a[i] + be * b[i];
    auto ya = conv2d(constant(a), constant(k), Value{}, 1, 1, Pad2d::same);
    auto yb = conv2d(constant(b), constant(k), Value{}, 1, 1, Pad2d::same);
    auto ym = conv2d(constant(mix), constant(k), Value{}, 1, 1, Pad2d::same);
    for (std::int64_t i = 0; i < ym->value.size(); ++i)
        CHECK(std::fabs(ym->value[i] - (al * ya->value[i] + be * yb->value[i])) < 1e-10);
}

TEST_CASE("conv1d_time k=1 identity map on channels") {
    util::Rng rng(3);
    Tensor x = random_tensor({5, 3}, rng);
    Tensor k({1, 3, 3});
    for (int c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
    auto y = conv1d_time(constant(x), constant(k), Value{}, 1, Pad1d::causal);
    REQUIRE(y->value.shape() == x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y->value[i] == doctest::Approx(x[i]));
}

TEST_CASE("conv1d_time causal two-tap sum gives [a, a+b, b+c]") {
    Tensor x({3, 1});
    x[0] = 2.0;
    x[1] = 3.0;
    x[2] = 5.0;
    Tensor k = Tensor::full({2, 1, 1}, 1.0);
    auto y = conv1d_time(constant(x), constant(k), Value{}, 1, Pad1d::causal);
    REQUIRE(y->value.shape() == Shape{3, 1});
    CHECK(y->value[0] == doctest::Approx(2.0));
    CHECK(y->value[1] == doctest::Approx(5.0));
    CHECK(y->value[2] == doctest::Approx(8.0));
}

TEST_CASE("conv1d_time padding=none shortens T=5 to 3 with k=3") {
    Tensor x({5, 2});
    Tensor k({3, 2, 4});
    auto y = conv1d_time(constant(x), constant(k), Value{}, 1, Pad1d::none);
    CHECK(y->value.shape() == Shape{3, 4});
    Tensor tiny({2, 2});
    CHECK_THROWS_AS(conv1d_time(constant(tiny), constant(k), Value{}, 1, Pad1d::none),
                    std::invalid_argument);
}

TEST_CASE("conv1d_time causality: perturbation at t only affects outputs >= t") {
    util::Rng rng(4);
    Tensor x = random_tensor({8, 2, 3}, rng);
    Tensor k = random_tensor({3, 3, 3}, rng);
    // project channels 3->3 over T x P x C
    auto base = conv1d_time(constant(x), constant(k), Value{}, 2, Pad1d::causal);
    const int tp = 4;
    Tensor xp = x.clone();
    xp[tp * 2 * 3 + 1] += 0.5;
    auto pert = conv1d_time(constant(xp), constant(k), Value{}, 2, Pad1d::causal);
    for (std::int64_t t = 0; t < 8; ++t) {
        bool changed = false;
        for (std::int64_t i = t * 6; i < (t + 1) * 6; ++i)
            if (base->value[i] != pert->value[i]) changed = true;
        if (t < tp) CHECK_FALSE(changed);
    }
}

TEST_CASE("gelu values") {
    CHECK(gelu_scalar(0.0) == 0.0);
    CHECK(gelu_scalar(1.0) == doctest::Approx(0.8411919906082768).epsilon(1e-12));
    Tensor x({1});
    x[0] = 1.0;
    auto y = gelu(constant(x));
    CHECK(y->value[0] == doctest::Approx(0.84119).epsilon(1e-4));
}

TEST_CASE("global_avg_pool of constant field is the constant per channel") {
    Tensor x({4, 5, 2});
    for (std::int64_t i = 0; i < 20; ++i) {
        x[i * 2] = 3.25;
        x[i * 2 + 1] = -1.5;
    }
    auto y = global_avg_pool(constant(x));
    REQUIRE(y->value.shape() == Shape{2});
    CHECK(y->value[0] == doctest::Approx(3.25));
    CHECK(y->value[1] == doctest::Approx(-1.5));
}

TEST_CASE("backward of mean gives 1/N everywhere") {
    Tensor x({6});
    auto p = param(x);
    auto loss = reduce_mean(p);
    backward(loss);
    for (std::int64_t i = 0; i < 6; ++i) CHECK(p->grad[i] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("backward of sum of squares gives 2x") {
    Tensor x({2});
    x[0] = 1.0;
    x[1] = -2.0;
    auto p = param(x);
    auto loss = reduce_sum(mul(p, p));
    backward(loss);
    CHECK(p->grad[0] == doctest::Approx(2.0));
    CHECK(p->grad[1] == doctest::Approx(-4.0));
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor x({3});
    auto p = param(x);
    CHECK_THROWS_AS(backward(add(p, p)), std::invalid_argument);
}

TEST_CASE("two backward passes over the same graph are bit-identical") {
    util::Rng rng(5);
    Tensor x = random_tensor({4, 4, 2}, rng);
    Tensor k = random_tensor({3, 3, 2, 2}, rng);
    auto px = param(x), pk = param(k);
    auto loss = reduce_mean(gelu(conv2d(px, pk, Value{}, 1, 1, Pad2d::same)));
    backward(loss);
    Tensor g1 = px->grad.clone(), g2 = pk->grad.clone();
    backward(loss);
    for (std::int64_t i = 0; i < g1.size(); ++i) CHECK(px->grad[i] == g1[i]);
    for (std::int64_t i = 0; i < g2.size(); ++i) CHECK(pk->grad[i] == g2[i]);
}

TEST_CASE("gradient accumulates across fan-out") {
    Tensor x = Tensor::scalar(3.0);
    auto p = param(x);
    auto y = add(p, p);  // dy/dp = 2
    backward(reduce_sum(y));
    CHECK(p->grad[0] == doctest::Approx(2.0));
}

TEST_CASE("grad_check: linear functions are near-exact") {
    util::Rng rng(6);
    double err = grad_check([](const std::vector<Value>& v) { return reduce_sum(v[0]); },
                            {random_tensor({7}, rng)});
    CHECK(err < 1e-10);
}

TEST_CASE("grad_check: gelu-sum below 1e-6") {
    util::Rng rng(7);
    double err = grad_check([](const std::vector<Value>& v) { return reduce_sum(gelu(v[0])); },
                            {random_tensor({9}, rng)});
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check: conv2d + sigmoid chain below 1e-4") {
    util::Rng rng(8);
    auto f = [](const std::vector<Value>& v) {
        return reduce_mean(sigmoid(conv2d(v[0], v[1], v[2], 1, 1, Pad2d::same)));
    };
    double err = grad_check(f, {random_tensor({5, 5, 2}, rng), random_tensor({3, 3, 2, 3}, rng),
                                random_tensor({3}, rng)});
    CHECK(err < 1e-4);
}

TEST_CASE("grad_check across the operator set, 20 random instances each") {
    util::Rng rng(9);
    for (int it = 0; it < 20; ++it) {
        // conv2d dilated, padding=none
        {
            auto f = [](const std::vector<Value>& v) {
                return reduce_mean(conv2d(v[0], v[1], v[2], 2, 2, Pad2d::none));
            };
            CHECK(grad_check(f, {random_tensor({6, 6, 2}, rng), random_tensor({3, 3, 2, 2}, rng),
                                 random_tensor({2}, rng)}) < 1e-4);
        }
        // conv1d_time causal dilated over T x P x C
        {
            auto f = [](const std::vector<Value>& v) {
                return reduce_mean(conv1d_time(v[0], v[1], v[2], 2, Pad1d::causal));
            };
            CHECK(grad_check(f, {random_tensor({5, 3, 2}, rng), random_tensor({3, 2, 2}, rng),
                                 random_tensor({2}, rng)}) < 1e-4);
        }
        // pointwise_linear
        {
            auto f = [](const std::vector<Value>& v) {
                return reduce_mean(pointwise_linear(v[0], v[1], v[2]));
            };
            CHECK(grad_check(f, {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng),
                                 random_tensor({5}, rng)}) < 1e-4);
        }
        // SE-style chain: pool, two linears, sigmoid, channel gate
        {
            auto f = [](const std::vector<Value>& v) {
                auto s = sigmoid(pointwise_linear(global_avg_pool(v[0]), v[1], Value{}));
                return reduce_mean(mul_channels(v[0], s));
            };
            CHECK(grad_check(f, {random_tensor({4, 4, 3}, rng), random_tensor({3, 3}, rng)}) < 1e-4);
        }
        // elementwise algebra incl. div and sqrt_eps
        {
            auto f = [](const std::vector<Value>& v) {
                auto q = div(add(mul(v[0], v[1]), v[0]), add_scalar(mul(v[1], v[1]), 2.0));
                return sqrt_eps(reduce_mean(mul(q, q)));
            };
            CHECK(grad_check(f, {random_tensor({6}, rng), random_tensor({6}, rng)}) < 1e-4);
        }
    }
}

TEST_CASE("non-finite debug guard") {
    set_finite_checks(true);
    Tensor a = Tensor::scalar(1.0), b = Tensor::scalar(0.0);
    CHECK_THROWS_AS(div(constant(a), constant(b)), std::runtime_error);
    set_finite_checks(false);
}

TEST_CASE("reshape round-trips and shares values") {
    util::Rng rng(10);
    Tensor x = random_tensor({2, 3, 4}, rng);
    auto p = param(x);
    auto flat = reshape(p, {24});
    auto loss = reduce_sum(mul(flat, flat));
    backward(loss);
    for (std::int64_t i = 0; i < 24; ++i) CHECK(p->grad[i] == doctest::Approx(2.0 * x[i]));
}
