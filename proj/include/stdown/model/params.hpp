#pragma once

#include <string>
#include <vector>

#include "stdown/ad/graph.hpp"
#include "stdown/model/config.hpp"

namespace stdown::model {

enum class InitMode {
    standard,  // fan-in uniform convolutions, zero biases, zero head
    random,    // every weight fan-in uniform (head included)
};

// Named learnable tensors in declaration order; the order defines the
// params.bin layout. Names prefixed "mftf." form theta_temp, the rest
// ("stage.", "head.") theta_spat.
class ModelParams {
public:
    static ModelParams init(const ModelConfig& config, std::uint64_t seed,
                            InitMode mode = InitMode::standard);

    const ad::Value& get(const std::string& name) const;
    const std::vector<std::pair<std::string, ad::Value>>& entries() const { return entries_; }
    std::vector<std::pair<std::string, ad::Value>>& entries() { return entries_; }

    std::int64_t total_size() const;

    // IEEE-754 32-bit little-endian, concatenated in declaration order.
    void save_bin(const std::string& path) const;
    void load_bin(const std::string& path);

    // 64-bit image of every tensor, for exact training resume.
    void save_f64(const std::string& path) const;
    void load_f64(const std::string& path);

    // name+shape listing for config.json
    std::string listing_json() const;

private:
    std::vector<std::pair<std::string, ad::Value>> entries_;
};

}  // namespace stdown::model
