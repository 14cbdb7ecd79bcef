#include "stdown/ad/gradsuite.hpp"

#include <chrono>
#include <cmath>

#include "stdown/ad/gradcheck.hpp"
#include "stdown/loss/loss.hpp"
#include "stdown/model/pscnet.hpp"
#include "stdown/util/rng.hpp"

namespace stdown::ad {

namespace {

Tensor rnd(Shape shape, util::Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

constexpr double kTol = 1e-4;

}  // namespace

GradSuiteResult run_gradient_suite(int instances_per_op, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    util::Rng rng(seed);
    GradSuiteResult result;

    auto run = [](const GradFn& f, std::vector<Tensor> inputs) {
        return grad_check(f, std::move(inputs), 1e-5);
    };

    struct OpCase {
        std::string name;
        std::function<double(util::Rng&)> once;
    };
    std::vector<OpCase> cases;

    cases.push_back({"conv2d_same", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             return reduce_mean(conv2d(v[0], v[1], v[2], 1, 1, Pad2d::same));
                         };
                         return run(f, {rnd({5, 6, 2}, r), rnd({3, 3, 2, 3}, r), rnd({3}, r)});
                     }});
    cases.push_back({"conv2d_dilated_none", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             return reduce_mean(conv2d(v[0], v[1], v[2], 2, 2, Pad2d::none));
                         };
                         return run(f, {rnd({7, 7, 2}, r), rnd({3, 3, 2, 2}, r), rnd({2}, r)});
                     }});
    cases.push_back({"conv2d_factorized", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             auto a = conv2d(v[0], v[1], Value{}, 2, 1, Pad2d::same);
                             return reduce_mean(conv2d(a, v[2], Value{}, 1, 2, Pad2d::same));
                         };
                         return run(f, {rnd({6, 6, 2}, r), rnd({3, 1, 2, 2}, r),
                                            rnd({1, 3, 2, 2}, r)});
                     }});
    cases.push_back({"conv1d_causal", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             return reduce_mean(conv1d_time(v[0], v[1], v[2], 2, Pad1d::causal));
                         };
                         return run(f, {rnd({5, 3, 2}, r), rnd({3, 2, 4}, r), rnd({4}, r)});
                     }});
    cases.push_back({"conv1d_none", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             return reduce_mean(conv1d_time(v[0], v[1], v[2], 1, Pad1d::none));
                         };
                         return run(f, {rnd({5, 2, 3}, r), rnd({3, 3, 2}, r), rnd({2}, r)});
                     }});
    cases.push_back({"pointwise_linear", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             return reduce_mean(pointwise_linear(v[0], v[1], v[2]));
                         };
                         return run(f, {rnd({4, 5}, r), rnd({5, 3}, r), rnd({3}, r)});
                     }});
    cases.push_back({"gelu", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) { return reduce_sum(gelu(v[0])); };
                         return run(f, {rnd({11}, r, -2.0, 2.0)});
                     }});
    cases.push_back({"sigmoid", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             return reduce_sum(sigmoid(v[0]));
                         };
                         return run(f, {rnd({11}, r, -3.0, 3.0)});
                     }});
    cases.push_back({"se_gate", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             auto s = sigmoid(pointwise_linear(
                                 gelu(pointwise_linear(global_avg_pool(v[0]), v[1], Value{})), v[2],
                                 Value{}));
                             return reduce_mean(mul_channels(v[0], s));
                         };
                         return run(f,
                                    {rnd({4, 4, 4}, r), rnd({4, 2}, r), rnd({2, 4}, r)});
                     }});
    cases.push_back({"elementwise_algebra", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             auto q = div(add(mul(v[0], v[1]), sub(v[0], v[1])),
                                          add_scalar(mul(v[1], v[1]), 2.0));
                             return sqrt_eps(reduce_mean(mul(q, scale(q, 1.5))));
                         };
                         return run(f, {rnd({9}, r), rnd({9}, r)});
                     }});
    cases.push_back({"reductions_broadcast", [&](util::Rng& r) {
                         auto f = [](const std::vector<Value>& v) {
                             auto m = reduce_mean(v[0]);
                             auto centered = sub(v[0], broadcast_to(m, v[0]->value.shape()));
                             return add(reduce_sum(mul(centered, centered)), reduce_mean(v[0]));
                         };
                         return run(f, {rnd({8}, r)});
                     }});
    cases.push_back({"loss_rmse", [&](util::Rng& r) {
                         std::vector<double> target(16);
                         std::vector<std::uint8_t> mask(16, 1);
                         for (auto& v : target) v = r.uniform(0.0, 0.6);
                         for (auto& m : mask) m = r.next_double() < 0.8 ? 1 : 0;
                         mask[0] = 1;
                         auto we = loss::edge_weight_kernel(4, 4, 2.0);
                         auto f = [=](const std::vector<Value>& v) {
                             return loss::loss_rmse(v[0], target, mask, we);
                         };
                         return run(f, {rnd({16}, r, 0.0, 0.6)});
                     }});
    cases.push_back({"loss_ssim", [&](util::Rng& r) {
                         std::vector<double> target(16);
                         std::vector<std::uint8_t> mask(16, 1);
                         for (auto& v : target) v = r.uniform(0.0, 0.6);
                         loss::LossConfig lc;
                         auto f = [=](const std::vector<Value>& v) {
                             return loss::loss_ssim(v[0], target, mask, lc);
                         };
                         return run(f, {rnd({16}, r, 0.0, 0.6)});
                     }});
    cases.push_back({"loss_full", [&](util::Rng& r) {
                         std::vector<double> target(16);
                         std::vector<std::uint8_t> mask(16, 1);
                         for (auto& v : target) v = r.uniform(0.0, 0.6);
                         for (auto& m : mask) m = r.next_double() < 0.85 ? 1 : 0;
                         mask[2] = mask[9] = 1;
                         auto we = loss::edge_weight_kernel(4, 4, 2.0);
                         loss::LossConfig lc;
                         auto f = [=](const std::vector<Value>& v) {
                             return loss::loss_full(v[0], target, mask, we, lc);
                         };
                         return run(f, {rnd({16}, r, 0.0, 0.6)});
                     }});

    for (const auto& c : cases) {
        double worst = 0.0;
        for (int it = 0; it < instances_per_op; ++it) worst = std::max(worst, c.once(rng));
        result.entries.push_back({c.name, worst, worst < kTol});
    }

    // composed L_FULL over model_forward on a small random-init model;
    // parameter coordinates sampled, sub-resolution entries skipped
    {
        model::ModelConfig mc;
        mc.in_channels = 5;
        mc.base_channels = 4;
        mc.tcn_kernel = 3;
        mc.tcn_dilations = {1, 2};
        mc.distill_kernel = 3;
        mc.num_stages = 1;
        mc.stage_kernel = 3;
        mc.stage_dilations = {1};
        mc.se_reduction = 2;
        mc.ffn_expansion = 2;
        mc.t_len = 3;

        double worst = 0.0;
        for (int it = 0; it < instances_per_op; ++it) {
            auto params = model::ModelParams::init(mc, seed + static_cast<std::uint64_t>(it),
                                                   model::InitMode::random);
            Tensor w = rnd({mc.t_len, 6, 6, mc.in_channels}, rng);
            std::vector<double> target(36);
            std::vector<std::uint8_t> mask(36, 1);
            for (auto& v : target) v = rng.uniform(-0.5, 0.5);
            for (auto& m : mask) m = rng.next_double() < 0.9 ? 1 : 0;
            mask[5] = mask[22] = 1;
            auto we = loss::edge_weight_kernel(6, 6, 2.0);
            loss::LossConfig lc;

            std::vector<Tensor> inputs;
            std::vector<std::string> names;
            for (const auto& [name, v] : params.entries()) {
                inputs.push_back(v->value);
                names.push_back(name);
            }
            auto f = [&](const std::vector<Value>& leaves) {
                model::ModelParams q;
                for (std::size_t i = 0; i < leaves.size(); ++i)
                    q.entries().emplace_back(names[i], leaves[i]);
                auto out = model::model_forward(constant(w), q, mc);
                return loss::loss_full(out, target, mask, we, lc);
            };
            worst = std::max(worst, grad_check_sampled(f, inputs, 1e-5, 4, rng, 1e-7));
        }
        result.entries.push_back({"loss_full(model_forward)", worst, worst < kTol});
    }

    for (const auto& e : result.entries) result.pass &= e.pass;
    result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace stdown::ad
