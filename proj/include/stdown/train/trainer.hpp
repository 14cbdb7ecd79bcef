#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stdown/geo/patches.hpp"
#include "stdown/geo/stc_io.hpp"
#include "stdown/loss/loss.hpp"
#include "stdown/model/pscnet.hpp"

namespace stdown::train {

struct TrainConfig {
    std::int64_t epochs = 60;
    std::int64_t batch_size = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 7;
    double mask_p0 = 0.5;          // progressive-masking start fraction
    std::int64_t mask_epochs = 30; // linear decay horizon (E_mask)
    std::int64_t patience = 8;     // early-stop patience in epochs
    std::int64_t patch_size = 0;   // 0 = min(32, grid)
    std::int64_t stride = 10;

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

// Linear curriculum decay: p = p0 * max(0, 1 - epoch/E_mask).
double mask_schedule(std::int64_t epoch, double p0, std::int64_t e_mask);

// Adam over the model parameters in declaration order.
class Adam {
public:
    Adam(model::ModelParams& params, const TrainConfig& config);

    void apply(const std::vector<ad::Tensor>& grads);  // one tensor per entry
    std::int64_t steps() const { return t_; }

    void save(std::ostream& os) const;
    void load(std::istream& is);

private:
    model::ModelParams& params_;
    double lr_, b1_, b2_, eps_;
    std::int64_t t_ = 0;
    std::vector<ad::Tensor> m_, v_;
};

struct StepResult {
    double loss = 0.0;
    std::int64_t hidden_pixels = 0;  // curriculum bookkeeping
};

struct EpochRecord {
    std::int64_t epoch;
    double train_loss;
    double val_loss;
    std::int64_t hidden_px;  // curriculum pixels hidden this epoch
};

struct FitReport {
    std::vector<EpochRecord> history;
    std::int64_t best_epoch = -1;
    double best_val_loss = 0.0;
    bool aborted = false;          // divergence abort, best checkpoint kept
    double test_loss = 0.0;        // L_FULL on the held-out test split
    double test_r = 0.0;           // pooled metrics on the test split
    double test_ubrmse = 0.0;      // (physical units)
};

// Owns the training state for one (cube, target) pair: normalization,
// context encoding, patch extraction and split, the parameter set, and
// the optimizer.
class Trainer {
public:
    Trainer(const geo::DataCube& cube_raw, const geo::TargetField& target,
            model::ModelConfig model_config, loss::LossConfig loss_config, TrainConfig train_config);

    FitReport fit();

    // One optimizer step on an explicit batch (exposed for the overfit
    // capacity check and the step-level tests). p hides a seeded fraction
    // of the valid label pixels from any input pathway; the loss still
    // covers all originally-valid pixels.
    StepResult train_step(const std::vector<geo::Patch>& batch, double p, std::uint64_t step_key);

    double eval_loss(const std::vector<geo::Patch>& patches) const;
    ad::Tensor predict_patch(const geo::Patch& patch) const;  // normalized units

    const geo::PatchSplit& split() const { return split_; }
    model::ModelParams& params() { return params_; }
    const model::ModelConfig& model_config() const { return model_config_; }
    const geo::NormStats& stats() const { return stats_; }
    const geo::VarSchema& raw_schema() const { return raw_schema_; }
    const geo::ChannelStats& target_stats() const { return target_stats_; }
    const model::DomainBounds& bounds() const { return bounds_; }

    void save_checkpoint(const std::string& dir, const FitReport& report) const;
    void load_state(const std::string& dir);  // resume from state.bin
    void use_best_params();                   // swap the best checkpoint in
    std::int64_t resume_epoch() const { return resume_epoch_; }

private:
    std::vector<geo::Patch> batch_at(const std::vector<std::size_t>& order, std::size_t begin,
                                     std::size_t count) const;

    model::ModelConfig model_config_;
    loss::LossConfig loss_config_;
    TrainConfig train_config_;
    geo::VarSchema raw_schema_;
    geo::NormStats stats_;
    geo::ChannelStats target_stats_;
    model::DomainBounds bounds_;
    geo::DataCube encoded_;  // normalized + context channels
    geo::PatchSplit split_;
    model::ModelParams params_;
    model::ModelParams best_params_;
    model::ModelParams last_params_;  // end of the last trained epoch, for resume
    std::optional<Adam> opt_;
    std::int64_t resume_epoch_ = 0;
    std::vector<std::int64_t> test_ids_;  // leakage audit
};

// Checkpoint contents needed for inference.
struct Checkpoint {
    model::ModelConfig model;
    loss::LossConfig loss_config;
    model::ModelParams params;  // from params.bin (f32 storage precision)
    geo::NormStats stats;
    geo::ChannelStats target_stats;
    model::DomainBounds bounds;
    geo::VarSchema schema;      // training-time raw channel schema
    std::uint64_t schema_hash = 0;
};

std::uint64_t schema_hash(const geo::VarSchema& schema);

Checkpoint load_checkpoint(const std::string& dir);

// Cross-scale driver: full-image inference over every timestamp of the
// fine cube, producing the 3-hourly fine-grid product.
geo::TargetField downscale(const Checkpoint& checkpoint, const geo::DataCube& cube_fine);

}  // namespace stdown::train
