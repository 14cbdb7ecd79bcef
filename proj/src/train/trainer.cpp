#include "stdown/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "stdown/eval/metrics.hpp"
#include "stdown/util/parallel.hpp"
#include "stdown/util/rng.hpp"

namespace stdown::train {

namespace fs = std::filesystem;
using ad::Tensor;
using ad::Value;
using nlohmann::json;

std::uint64_t schema_hash(const geo::VarSchema& schema) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& v : schema.vars) {
        const std::string row = v.name + ":" + geo::to_string(v.kind) + ":" + v.units + ";";
        h = util::fnv1a(row.data(), row.size(), h);
    }
    return h;
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) throw std::invalid_argument("epochs and batch size must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning rate must be positive");
    if (mask_p0 < 0.0 || mask_p0 > 1.0) throw std::invalid_argument("mask p0 must be in [0, 1]");
    if (mask_epochs > epochs) throw std::invalid_argument("mask_epochs must be <= epochs");
    if (patience < 0) throw std::invalid_argument("patience must be >= 0");
}

std::string TrainConfig::to_json() const {
    json j = {{"epochs", epochs},
              {"batch_size", batch_size},
              {"learning_rate", learning_rate},
              {"beta1", beta1},
              {"beta2", beta2},
              {"adam_eps", adam_eps},
              {"seed", seed},
              {"mask_p0", mask_p0},
              {"mask_epochs", mask_epochs},
              {"patience", patience},
              {"patch_size", patch_size},
              {"stride", stride}};
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    const json j = json::parse(text);
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.seed = j.value("seed", c.seed);
    c.mask_p0 = j.value("mask_p0", c.mask_p0);
    c.mask_epochs = j.value("mask_epochs", c.mask_epochs);
    c.patience = j.value("patience", c.patience);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.stride = j.value("stride", c.stride);
    return c;
}

double mask_schedule(std::int64_t epoch, double p0, std::int64_t e_mask) {
    if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
    if (e_mask <= 0) return 0.0;
    const double f = 1.0 - static_cast<double>(epoch) / static_cast<double>(e_mask);
    return p0 * std::max(0.0, f);
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(model::ModelParams& params, const TrainConfig& config)
    : params_(params), lr_(config.learning_rate), b1_(config.beta1), b2_(config.beta2),
      eps_(config.adam_eps) {
    for (const auto& [name, v] : params.entries()) {
        m_.push_back(Tensor(v->value.shape()));
        v_.push_back(Tensor(v->value.shape()));
    }
}

void Adam::apply(const std::vector<Tensor>& grads) {
    if (grads.size() != m_.size()) throw std::invalid_argument("gradient list does not match parameters");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < m_.size(); ++k) {
        Tensor& p = params_.entries()[k].second->value;
        const Tensor& g = grads[k];
        for (std::int64_t i = 0; i < p.size(); ++i) {
            const double gi = g.empty() ? 0.0 : g[i];
            m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * gi;
            v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * gi * gi;
            const double mh = m_[k][i] / c1;
            const double vh = v_[k][i] / c2;
            p[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

void Adam::save(std::ostream& os) const {
    os.write(reinterpret_cast<const char*>(&t_), sizeof(t_));
    for (const auto& t : m_)
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
    for (const auto& t : v_)
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void Adam::load(std::istream& is) {
    is.read(reinterpret_cast<char*>(&t_), sizeof(t_));
    for (auto& t : m_)
        is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    for (auto& t : v_)
        is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!is) throw std::runtime_error("optimizer state is truncated");
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

geo::TargetField normalize_target(const geo::TargetField& target, const geo::ChannelStats& st) {
    geo::TargetField out = target;
    for (auto& v : out.values) v = (v - st.mean) / st.stddev;
    return out;
}

}  // namespace

Trainer::Trainer(const geo::DataCube& cube_raw, const geo::TargetField& target,
                 model::ModelConfig model_config, loss::LossConfig loss_config,
                 TrainConfig train_config)
    : model_config_(model_config), loss_config_(loss_config), train_config_(train_config) {
    train_config_.validate();
    loss_config_.validate();

    raw_schema_ = cube_raw.schema;
    stats_ = geo::zscore_fit(cube_raw);
    target_stats_ = geo::fit_target_stats(target);
    bounds_ = model::bounds_from_grid(cube_raw.grid);
    encoded_ = model::positional_encode(geo::zscore_apply(cube_raw, stats_), bounds_);

    if (model_config_.in_channels == 0) model_config_.in_channels = encoded_.C();
    if (model_config_.in_channels != encoded_.C())
        throw std::invalid_argument("model in_channels does not match data channels + context");
    model_config_.validate();

    std::int64_t size = train_config_.patch_size;
    if (size == 0) size = std::min<std::int64_t>({32, cube_raw.H(), cube_raw.W()});
    const geo::TargetField norm_target = normalize_target(target, target_stats_);
    auto patches = geo::extract_patches(encoded_, norm_target, size, model_config_.t_len,
                                        train_config_.stride);
    split_ = geo::split_patches(patches, train_config_.seed);
    for (const auto& p : split_.test) test_ids_.push_back(p.id);

    params_ = model::ModelParams::init(model_config_, train_config_.seed);
    best_params_ = model::ModelParams::init(model_config_, train_config_.seed);
    last_params_ = model::ModelParams::init(model_config_, train_config_.seed);
    opt_.emplace(params_, train_config_);
}

namespace {

void copy_param_values(const model::ModelParams& from, model::ModelParams& to) {
    for (std::size_t k = 0; k < from.entries().size(); ++k) {
        const Tensor& src = from.entries()[k].second->value;
        Tensor& dst = to.entries()[k].second->value;
        for (std::int64_t i = 0; i < src.size(); ++i) dst[i] = src[i];
    }
}

}  // namespace

void Trainer::use_best_params() { copy_param_values(best_params_, params_); }

ad::Tensor Trainer::predict_patch(const geo::Patch& patch) const {
    ad::NoGradGuard guard;
    Value out = model::model_forward(ad::constant(geo::patch_window(encoded_, patch)), params_,
                                     model_config_);
    return out->value;
}

double Trainer::eval_loss(const std::vector<geo::Patch>& patches) const {
    if (patches.empty()) throw std::invalid_argument("cannot evaluate an empty split");
    std::vector<double> losses(patches.size());
    const auto we = loss::edge_weight_kernel(patches[0].size, patches[0].size, loss_config_.ratio);
    util::parallel_for(patches.size(), [&](std::size_t k) {
        ad::NoGradGuard guard;
        const geo::Patch& p = patches[k];
        Value out = model::model_forward(ad::constant(geo::patch_window(encoded_, p)), params_,
                                         model_config_);
        Value l = loss::loss_full(out, p.label, p.label_mask, we, loss_config_);
        losses[k] = l->value.item();
    });
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(losses.size());
}

StepResult Trainer::train_step(const std::vector<geo::Patch>& batch, double p,
                               std::uint64_t step_key) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("curriculum fraction must be in [0, 1]");
    std::unordered_set<std::int64_t> test_ids(test_ids_.begin(), test_ids_.end());
    for (const auto& item : batch)
        if (test_ids.count(item.id))
            throw std::logic_error("test-split patch " + std::to_string(item.id) +
                                   " reached a gradient step");

    const auto we = loss::edge_weight_kernel(batch[0].size, batch[0].size, loss_config_.ratio);
    const std::size_t B = batch.size();
    std::vector<double> losses(B);
    std::vector<std::int64_t> hidden(B, 0);
    std::vector<std::unordered_map<ad::Node*, Tensor>> grads(B);

    util::parallel_for(B, [&](std::size_t k) {
        const geo::Patch& item = batch[k];

        // curriculum: hide a seeded fraction of the input-visible label
        // pixels from any input pathway (none exists in this
        // architecture), keep them in the loss
        std::vector<std::uint8_t> hidden_mask(item.label_mask.size(), 0);
        if (p > 0.0) {
            std::vector<std::size_t> visible;
            for (std::size_t i = 0; i < item.label_mask.size(); ++i)
                if (item.label_mask[i]) visible.push_back(i);
            util::Rng rng(util::substream(train_config_.seed ^ step_key, k));
            rng.shuffle(visible);
            const auto n_hide = static_cast<std::size_t>(p * static_cast<double>(visible.size()));
            for (std::size_t i = 0; i < n_hide; ++i) hidden_mask[visible[i]] = 1;
            hidden[k] = static_cast<std::int64_t>(n_hide);
        }

        // loss over originally-valid pixels: visible plus curriculum-hidden
        Value out = model::model_forward(ad::constant(geo::patch_window(encoded_, item)), params_,
                                         model_config_);
        Value l = loss::loss_full(out, item.label, item.label_mask, we, loss_config_);
        losses[k] = l->value.item();
        if (!std::isfinite(losses[k])) return;  // reported below
        grads[k] = ad::backward_collect(l);
    });

    double loss_sum = 0.0;
    std::int64_t hidden_sum = 0;
    for (std::size_t k = 0; k < B; ++k) {
        if (!std::isfinite(losses[k]))
            throw std::runtime_error("non-finite loss on batch item " + std::to_string(batch[k].id) +
                                     "; step aborted");
        loss_sum += losses[k];
        hidden_sum += hidden[k];
    }

    // deterministic reduction: items in order, entries in declaration order
    const double inv_b = 1.0 / static_cast<double>(B);
    std::vector<Tensor> total;
    total.reserve(params_.entries().size());
    for (const auto& [name, v] : params_.entries()) total.push_back(Tensor(v->value.shape()));
    for (std::size_t k = 0; k < B; ++k)
        for (std::size_t e = 0; e < params_.entries().size(); ++e) {
            auto it = grads[k].find(params_.entries()[e].second.get());
            if (it == grads[k].end()) continue;
            for (std::int64_t i = 0; i < total[e].size(); ++i) total[e][i] += it->second[i];
        }
    for (auto& t : total)
        for (std::int64_t i = 0; i < t.size(); ++i) t[i] *= inv_b;

    opt_->apply(total);
    return {loss_sum * inv_b, hidden_sum};
}

FitReport Trainer::fit() {
    FitReport report;
    if (split_.train.empty() || split_.val.empty())
        throw std::invalid_argument("training requires non-empty train and validation splits");

    double best = std::numeric_limits<double>::infinity();
    std::int64_t since_best = 0;
    bool have_best = false;

    for (std::int64_t epoch = resume_epoch_; epoch < train_config_.epochs; ++epoch) {
        std::vector<std::size_t> order(split_.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        util::Rng shuffle_rng(util::substream(train_config_.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        const double p = mask_schedule(epoch, train_config_.mask_p0, train_config_.mask_epochs);
        double train_loss = 0.0;
        std::int64_t epoch_hidden = 0;
        std::size_t steps = 0;
        bool aborted_step = false;
        for (std::size_t b = 0; b + 1 <= order.size(); b += static_cast<std::size_t>(train_config_.batch_size)) {
            const std::size_t count =
                std::min<std::size_t>(static_cast<std::size_t>(train_config_.batch_size),
                                      order.size() - b);
            auto batch = batch_at(order, b, count);
            const std::uint64_t step_key =
                util::substream(train_config_.seed, static_cast<std::uint64_t>(epoch) + 1,
                                static_cast<std::uint64_t>(steps) + 1);
            try {
                const auto sr = train_step(batch, p, step_key);
                train_loss += sr.loss;
                epoch_hidden += sr.hidden_pixels;
            } catch (const std::runtime_error&) {
                aborted_step = true;
                break;
            }
            ++steps;
        }
        if (steps > 0) train_loss /= static_cast<double>(steps);

        const double val_loss = eval_loss(split_.val);
        report.history.push_back({epoch, train_loss, val_loss, epoch_hidden});

        if (aborted_step || !std::isfinite(val_loss)) {
            report.aborted = true;  // keep the last good checkpoint
            break;
        }
        if (val_loss < best) {
            best = val_loss;
            report.best_epoch = epoch;
            copy_param_values(params_, best_params_);
            have_best = true;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best > train_config_.patience) break;
        }
    }

    copy_param_values(params_, last_params_);
    if (have_best) copy_param_values(best_params_, params_);  // products use the best checkpoint
    report.best_val_loss = best;

    // held-out test metrics, once, in physical units
    if (!split_.test.empty()) {
        report.test_loss = eval_loss(split_.test);
        std::vector<double> pred, truth;
        for (const auto& patch : split_.test) {
            Tensor out = predict_patch(patch);
            for (std::int64_t i = 0; i < out.size(); ++i) {
                if (!patch.label_mask[static_cast<std::size_t>(i)]) continue;
                pred.push_back(out[i] * target_stats_.stddev + target_stats_.mean);
                truth.push_back(patch.label[static_cast<std::size_t>(i)] * target_stats_.stddev +
                                target_stats_.mean);
            }
        }
        const auto m = eval::metrics(truth, pred);
        report.test_r = m.r.value_or(0.0);
        report.test_ubrmse = m.ubrmse.value_or(0.0);
    }
    return report;
}

std::vector<geo::Patch> Trainer::batch_at(const std::vector<std::size_t>& order, std::size_t begin,
                                          std::size_t count) const {
    std::vector<geo::Patch> batch;
    batch.reserve(count);
    for (std::size_t i = 0; i < count; ++i) batch.push_back(split_.train[order[begin + i]]);
    return batch;
}

void Trainer::save_checkpoint(const std::string& dir, const FitReport& report) const {
    fs::create_directories(dir);
    params_.save_bin((fs::path(dir) / "params.bin").string());
    geo::save_norm_stats(stats_, target_stats_, (fs::path(dir) / "norm_stats.json").string());

    json schema = json::array();
    for (const auto& v : raw_schema_.vars)
        schema.push_back({{"name", v.name}, {"kind", geo::to_string(v.kind)}, {"units", v.units}});
    json j = json::parse(model_config_.to_json());
    json cfg = {{"model", j},
                {"schema", schema},
                {"schema_hash", schema_hash(raw_schema_)},
                {"norm_stats", "norm_stats.json"},
                {"loss", {{"ratio", loss_config_.ratio}, {"alpha", loss_config_.alpha},
                          {"dynamic_range", loss_config_.dynamic_range}}},
                {"train", json::parse(train_config_.to_json())},
                {"bounds", {{"lat_min", bounds_.lat_min}, {"lat_max", bounds_.lat_max},
                            {"lon_min", bounds_.lon_min}, {"lon_max", bounds_.lon_max}}},
                {"best_epoch", report.best_epoch},
                {"best_val_loss", report.best_val_loss},
                {"params", json::parse(params_.listing_json())}};
    std::ofstream cf(fs::path(dir) / "config.json", std::ios::binary);
    cf << cfg.dump(2) << "\n";

    std::ofstream hf(fs::path(dir) / "history.csv", std::ios::binary);
    hf << "epoch,train_loss,val_loss,hidden_px\n";
    char buf[160];
    for (const auto& e : report.history) {
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%lld\n", static_cast<long long>(e.epoch),
                      e.train_loss, e.val_loss, static_cast<long long>(e.hidden_px));
        hf << buf;
    }

    // full-precision state for exact resume: the last-epoch parameters
    // continue training, the best ones serve the product
    std::ofstream sf(fs::path(dir) / "state.bin", std::ios::binary);
    const std::int64_t next_epoch = report.history.empty() ? 0 : report.history.back().epoch + 1;
    sf.write(reinterpret_cast<const char*>(&next_epoch), sizeof(next_epoch));
    for (const auto& [name, v] : last_params_.entries())
        sf.write(reinterpret_cast<const char*>(v->value.data()),
                 static_cast<std::streamsize>(v->value.size() * sizeof(double)));
    for (const auto& [name, v] : best_params_.entries())
        sf.write(reinterpret_cast<const char*>(v->value.data()),
                 static_cast<std::streamsize>(v->value.size() * sizeof(double)));
    opt_->save(sf);
}

void Trainer::load_state(const std::string& dir) {
    std::ifstream sf(fs::path(dir) / "state.bin", std::ios::binary);
    if (!sf) throw std::runtime_error("cannot read state.bin under " + dir);
    sf.read(reinterpret_cast<char*>(&resume_epoch_), sizeof(resume_epoch_));
    for (auto& [name, v] : params_.entries())
        sf.read(reinterpret_cast<char*>(v->value.data()),
                static_cast<std::streamsize>(v->value.size() * sizeof(double)));
    for (auto& [name, v] : best_params_.entries())
        sf.read(reinterpret_cast<char*>(v->value.data()),
                static_cast<std::streamsize>(v->value.size() * sizeof(double)));
    opt_->load(sf);
}

Checkpoint load_checkpoint(const std::string& dir) {
    std::ifstream cf(fs::path(dir) / "config.json", std::ios::binary);
    if (!cf) throw std::runtime_error("cannot read config.json under " + dir);
    std::stringstream ss;
    ss << cf.rdbuf();
    const json j = json::parse(ss.str());

    Checkpoint ck;
    ck.model = model::ModelConfig::from_json(j.at("model").dump());
    ck.loss_config.ratio = j.at("loss").at("ratio").get<double>();
    ck.loss_config.alpha = j.at("loss").at("alpha").get<double>();
    ck.loss_config.dynamic_range = j.at("loss").at("dynamic_range").get<double>();
    ck.bounds.lat_min = j.at("bounds").at("lat_min").get<double>();
    ck.bounds.lat_max = j.at("bounds").at("lat_max").get<double>();
    ck.bounds.lon_min = j.at("bounds").at("lon_min").get<double>();
    ck.bounds.lon_max = j.at("bounds").at("lon_max").get<double>();
    ck.params = model::ModelParams::init(ck.model, 0);
    ck.params.load_bin((fs::path(dir) / "params.bin").string());
    const std::string stats_file = j.value("norm_stats", std::string("norm_stats.json"));
    geo::load_norm_stats((fs::path(dir) / stats_file).string(), ck.stats, ck.target_stats);
    if (j.contains("schema"))
        for (const auto& v : j.at("schema"))
            ck.schema.vars.push_back({v.at("name").get<std::string>(),
                                      geo::var_kind_from_string(v.at("kind").get<std::string>()),
                                      v.at("units").get<std::string>()});
    ck.schema_hash = j.value("schema_hash", std::uint64_t{0});
    return ck;
}

geo::TargetField downscale(const Checkpoint& checkpoint, const geo::DataCube& cube_fine) {
    if (checkpoint.schema_hash != 0 && schema_hash(cube_fine.schema) != checkpoint.schema_hash)
        throw std::invalid_argument(
            "fine cube channel schema does not match the training schema of the checkpoint");
    return model::infer_full(cube_fine, checkpoint.params, checkpoint.model, checkpoint.stats,
                             checkpoint.target_stats, checkpoint.bounds);
}

}  // namespace stdown::train
