#include "stdown/model/params.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "stdown/util/rng.hpp"

namespace stdown::model {

using ad::Shape;
using ad::Tensor;
using ad::Value;

namespace {

std::int64_t fan_in(const Shape& shape) {
    // last axis is the output channel for every weight here
    std::int64_t f = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) f *= shape[i];
    return f;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, std::uint64_t seed, InitMode mode) {
    config.validate();
    util::Rng rng(seed);
    ModelParams p;

    auto weight = [&](const std::string& name, Shape shape) {
        Tensor t(shape);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(shape)));
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
        p.entries_.emplace_back(name, ad::param(std::move(t)));
    };
    auto zeros = [&](const std::string& name, Shape shape) {
        p.entries_.emplace_back(name, ad::param(Tensor(shape)));
    };

    const std::int64_t Cb = config.base_channels;
    const std::int64_t Cin = config.in_channels;

    for (std::size_t l = 0; l < config.tcn_dilations.size(); ++l) {
        const std::int64_t ci = (l == 0) ? Cin : Cb;
        const std::string base = "mftf.tcn" + std::to_string(l);
        weight(base + ".conv.w", {config.tcn_kernel, ci, Cb});
        zeros(base + ".conv.b", {Cb});
        weight(base + ".enrich.w", {Cb, Cb});
        zeros(base + ".enrich.b", {Cb});
        if (l == 0 && Cin != Cb) {
            weight(base + ".proj.w", {Cin, Cb});
            zeros(base + ".proj.b", {Cb});
        }
    }
    const auto plan = config.distill_plan();
    for (std::size_t j = 0; j < plan.size(); ++j) {
        const std::string base = "mftf.distill" + std::to_string(j);
        weight(base + ".w", {plan[j].kernel_len, Cb, Cb});
        zeros(base + ".b", {Cb});
    }

    const std::int64_t Cr = Cb / config.se_reduction;
    const std::int64_t Ce = Cb * config.ffn_expansion;
    for (std::int64_t s = 0; s < config.num_stages; ++s) {
        const std::string base = "stage" + std::to_string(s);
        weight(base + ".row.w", {config.stage_kernel, 1, Cb, Cb});
        zeros(base + ".row.b", {Cb});
        weight(base + ".col.w", {1, config.stage_kernel, Cb, Cb});
        zeros(base + ".col.b", {Cb});
        weight(base + ".se.w1", {Cb, Cr});
        zeros(base + ".se.b1", {Cr});
        weight(base + ".se.w2", {Cr, Cb});
        zeros(base + ".se.b2", {Cb});
        weight(base + ".ffn.w1", {Cb, Ce});
        zeros(base + ".ffn.b1", {Ce});
        weight(base + ".ffn.w2", {Ce, Cb});
        zeros(base + ".ffn.b2", {Cb});
    }

    if (mode == InitMode::random)
        weight("head.w", {Cb, 1});
    else
        zeros("head.w", {Cb, 1});  // identity-leaning start for the residual stack
    zeros("head.b", {1});
    return p;
}

const Value& ModelParams::get(const std::string& name) const {
    for (const auto& [n, v] : entries_)
        if (n == name) return v;
    throw std::invalid_argument("unknown parameter '" + name + "'");
}

std::int64_t ModelParams::total_size() const {
    std::int64_t n = 0;
    for (const auto& [name, v] : entries_) n += v->value.size();
    return n;
}

void ModelParams::save_bin(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& [name, v] : entries_) {
        std::vector<float> buf(static_cast<std::size_t>(v->value.size()));
        for (std::int64_t i = 0; i < v->value.size(); ++i) buf[static_cast<std::size_t>(i)] =
            static_cast<float>(v->value[i]);
        f.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
}

void ModelParams::load_bin(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    for (auto& [name, v] : entries_) {
        std::vector<float> buf(static_cast<std::size_t>(v->value.size()));
        f.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (static_cast<std::size_t>(f.gcount()) != buf.size() * sizeof(float))
            throw std::runtime_error(path + " is shorter than the parameter inventory");
        for (std::size_t i = 0; i < buf.size(); ++i) v->value[static_cast<std::int64_t>(i)] =
            static_cast<double>(buf[i]);
    }
}

void ModelParams::save_f64(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& [name, v] : entries_)
        f.write(reinterpret_cast<const char*>(v->value.data()),
                static_cast<std::streamsize>(v->value.size() * sizeof(double)));
}

void ModelParams::load_f64(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    for (auto& [name, v] : entries_) {
        f.read(reinterpret_cast<char*>(v->value.data()),
               static_cast<std::streamsize>(v->value.size() * sizeof(double)));
        if (static_cast<std::size_t>(f.gcount()) !=
            static_cast<std::size_t>(v->value.size()) * sizeof(double))
            throw std::runtime_error(path + " is shorter than the parameter inventory");
    }
}

std::string ModelParams::listing_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& [name, v] : entries_)
        j.push_back({{"name", name}, {"shape", v->value.shape()}});
    return j.dump(2);
}

}  // namespace stdown::model
