// stdown: train, transfer and validate spatio-temporal soil-moisture
// downscaling models on STC cubes.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stdown/ad/gradsuite.hpp"
#include "stdown/eval/evalsuite.hpp"
#include "stdown/eval/relgen.hpp"
#include "stdown/eval/tch.hpp"
#include "stdown/geo/stc_io.hpp"
#include "stdown/synth/scene.hpp"
#include "stdown/train/trainer.hpp"
#include "stdown/util/parallel.hpp"
#include "stdown/util/pgm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stdown;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// reproducibility record: resolved arguments + tool version, no clocks
void write_run_manifest(const std::string& out_dir, const std::string& subcommand,
                        const json& args) {
    fs::create_directories(out_dir);
    json j = {{"tool", "stdown"}, {"version", kVersion}, {"subcommand", subcommand}, {"args", args}};
    write_text_file(fs::path(out_dir) / "run_manifest.json", j.dump(2) + "\n");
}

void write_metrics_csv(const fs::path& path,
                       const std::vector<std::pair<std::string, eval::MetricsReport>>& rows) {
    std::ostringstream os;
    os << "key,n,R,bias,RMSE,ubRMSE\n";
    for (const auto& [key, m] : rows)
        os << key << "," << m.n << "," << fmt_opt(m.r) << "," << fmt_opt(m.bias) << ","
           << fmt_opt(m.rmse) << "," << fmt_opt(m.ubrmse) << "\n";
    write_text_file(path, os.str());
}

void write_by_hour_csv(const fs::path& path, const std::map<int, eval::MetricsReport>& by_hour) {
    std::ostringstream os;
    os << "hour,n,R,bias,RMSE,ubRMSE\n";
    for (const auto& [hour, m] : by_hour)
        os << hour << "," << m.n << "," << fmt_opt(m.r) << "," << fmt_opt(m.bias) << ","
           << fmt_opt(m.rmse) << "," << fmt_opt(m.ubrmse) << "\n";
    write_text_file(path, os.str());
}

std::map<int, eval::MetricsReport> read_by_hour_csv(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path.string() + " is empty");
    std::map<int, eval::MetricsReport> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string hour, n, r, bias, rmse, ub;
        std::getline(ss, hour, ',');
        std::getline(ss, n, ',');
        std::getline(ss, r, ',');
        std::getline(ss, bias, ',');
        std::getline(ss, rmse, ',');
        std::getline(ss, ub);
        eval::MetricsReport m;
        m.n = n.empty() ? 0 : std::stoll(n);
        if (!r.empty()) m.r = std::stod(r);
        if (!bias.empty()) m.bias = std::stod(bias);
        if (!rmse.empty()) m.rmse = std::stod(rmse);
        if (!ub.empty()) m.ubrmse = std::stod(ub);
        out[std::stoi(hour)] = m;
    }
    return out;
}

json metrics_to_json(const eval::MetricsReport& m) {
    json j;
    j["n"] = m.n;
    if (m.r) j["R"] = *m.r;
    if (m.bias) j["bias"] = *m.bias;
    if (m.rmse) j["RMSE"] = *m.rmse;
    if (m.ubrmse) j["ubRMSE"] = *m.ubrmse;
    return j;
}

geo::Field2D product_frame(const geo::TargetField& t, std::int64_t idx) { return t.slice(idx); }

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::int64_t seed_override) {
    synth::SceneSpec spec;
    if (!spec_path.empty()) spec = synth::parse_manifest(read_text_file(spec_path));
    if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
    write_run_manifest(out_dir, "synth",
                       {{"spec", spec_path}, {"out", out_dir}, {"seed", spec.seed}});
    const auto scene = synth::gen_scene(spec);
    synth::save_scene(scene, spec, out_dir);
    std::printf("scene written to %s (fine %lldx%lld, coarse %lldx%lld, %lld steps)\n",
                out_dir.c_str(), static_cast<long long>(spec.fine.nlat),
                static_cast<long long>(spec.fine.nlon), static_cast<long long>(spec.coarse.nlat),
                static_cast<long long>(spec.coarse.nlon), static_cast<long long>(spec.n_steps));
    return 0;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& out_dir, std::int64_t seed_override) {
    model::ModelConfig mc;
    loss::LossConfig lc;
    train::TrainConfig tc;
    if (!config_path.empty()) {
        const json cfg = json::parse(read_text_file(config_path));
        if (cfg.contains("model")) mc = model::ModelConfig::from_json(cfg["model"].dump());
        if (cfg.contains("loss")) {
            lc.ratio = cfg["loss"].value("ratio", lc.ratio);
            lc.alpha = cfg["loss"].value("alpha", lc.alpha);
            lc.dynamic_range = cfg["loss"].value("dynamic_range", lc.dynamic_range);
        }
        if (cfg.contains("train")) tc = train::TrainConfig::from_json(cfg["train"].dump());
    }
    if (seed_override >= 0) tc.seed = static_cast<std::uint64_t>(seed_override);
    write_run_manifest(out_dir, "train",
                       {{"data", data_dir}, {"config", config_path}, {"out", out_dir},
                        {"seed", tc.seed}});

    const auto cube = geo::load_cube((fs::path(data_dir) / "cube_coarse").string());
    const auto target = geo::load_target((fs::path(data_dir) / "target_coarse").string());
    train::Trainer trainer(cube, target, mc, lc, tc);
    std::printf("patches: train %zu (base %zu) / val %zu / test %zu\n", trainer.split().train.size(),
                trainer.split().train_base, trainer.split().val.size(), trainer.split().test.size());
    const auto report = trainer.fit();
    trainer.save_checkpoint(out_dir, report);

    json rj = {{"epochs_run", report.history.size()},
               {"best_epoch", report.best_epoch},
               {"best_val_loss", report.best_val_loss},
               {"aborted", report.aborted},
               {"test_loss", report.test_loss},
               {"test_R", report.test_r},
               {"test_ubRMSE", report.test_ubrmse}};
    write_text_file(fs::path(out_dir) / "report.json", rj.dump(2) + "\n");
    std::printf("best epoch %lld, val %.6f, test L_FULL %.6f R %.4f ubRMSE %.4f\n",
                static_cast<long long>(report.best_epoch), report.best_val_loss, report.test_loss,
                report.test_r, report.test_ubrmse);
    return report.aborted ? 1 : 0;
}

int cmd_infer(const std::string& checkpoint_dir, const std::string& fine_dir,
              const std::string& out_dir) {
    write_run_manifest(out_dir, "infer",
                       {{"checkpoint", checkpoint_dir}, {"fine", fine_dir}, {"out", out_dir}});
    const auto ck = train::load_checkpoint(checkpoint_dir);
    const auto cube = geo::load_cube(fine_dir);
    auto product = train::downscale(ck, cube);
    for (auto& v : product.values) v = geo::f32_round(v);
    geo::save_target(product, (fs::path(out_dir) / "product").string());
    util::write_pgm((fs::path(out_dir) / "product_first.pgm").string(), product_frame(product, 0));
    util::write_pgm((fs::path(out_dir) / "product_last.pgm").string(),
                    product_frame(product, product.T() - 1));
    std::printf("product: %lld maps of %lldx%lld written to %s\n",
                static_cast<long long>(product.T()), static_cast<long long>(product.H()),
                static_cast<long long>(product.W()), out_dir.c_str());
    return 0;
}

int cmd_eval_coarse(const std::string& product_dir, const std::string& reference_dir,
                    const std::string& out_dir) {
    write_run_manifest(out_dir, "eval-coarse",
                       {{"product", product_dir}, {"reference", reference_dir}, {"out", out_dir}});
    const auto product = geo::load_target(product_dir);
    const auto reference = geo::load_target(reference_dir);
    const auto v = eval::validate_vs_coarse(product, reference);

    write_metrics_csv(fs::path(out_dir) / "metrics.csv", {{"pooled", v.pooled}});
    write_by_hour_csv(fs::path(out_dir) / "metrics_by_hour.csv", v.by_hour);
    util::write_pgm((fs::path(out_dir) / "r_map.pgm").string(), v.r_map);
    {
        // R map as a single-timestamp STC cube on the reference grid
        geo::TargetField rmap;
        rmap.grid = reference.grid;
        rmap.times = {reference.times.empty() ? 0 : reference.times.front()};
        rmap.values.assign(v.r_map.values.begin(), v.r_map.values.end());
        rmap.mask = v.r_map.mask;
        geo::save_target(rmap, (fs::path(out_dir) / "r_map").string());
    }
    json j = {{"pooled", metrics_to_json(v.pooled)},
              {"shared_timestamps", v.shared_timestamps}};
    write_text_file(fs::path(out_dir) / "summary.json", j.dump(2) + "\n");
    std::printf("pooled: N=%lld R=%s RMSE=%s ubRMSE=%s bias=%s\n", v.pooled.n,
                fmt_opt(v.pooled.r).c_str(), fmt_opt(v.pooled.rmse).c_str(),
                fmt_opt(v.pooled.ubrmse).c_str(), fmt_opt(v.pooled.bias).c_str());
    return 0;
}

int cmd_eval_stations(const std::string& product_dir, const std::string& stations_path,
                      const std::string& out_dir, const geo::StationFilter& filter) {
    write_run_manifest(out_dir, "eval-stations",
                       {{"product", product_dir}, {"stations", stations_path}, {"out", out_dir}});
    const auto product = geo::load_target(product_dir);
    const auto stations = geo::load_stations(stations_path);
    const auto v = eval::validate_vs_stations(product, stations, filter);

    std::vector<std::pair<std::string, eval::MetricsReport>> rows;
    for (const auto& s : v.per_station) rows.emplace_back(s.id, s.report);
    for (const auto& [net, m] : v.per_network) rows.emplace_back("network:" + net, m);
    write_metrics_csv(fs::path(out_dir) / "station_metrics.csv", rows);
    write_by_hour_csv(fs::path(out_dir) / "metrics_by_hour.csv", v.by_hour);

    json nets = json::object();
    for (const auto& [net, m] : v.per_network) nets[net] = metrics_to_json(m);
    json j = {{"stations_kept", v.per_station.size()}, {"skipped", v.skipped}, {"networks", nets}};
    write_text_file(fs::path(out_dir) / "summary.json", j.dump(2) + "\n");
    std::printf("stations kept %zu, skipped %zu\n", v.per_station.size(), v.skipped.size());
    return 0;
}

int cmd_relgen(const std::string& metrics_path, const std::string& out_dir) {
    write_run_manifest(out_dir, "relgen", {{"metrics", metrics_path}, {"out", out_dir}});
    const auto by_hour = read_by_hour_csv(metrics_path);
    const auto table = eval::relgen(by_hour);

    std::ostringstream os;
    os << "hour,RE_R,RE_ubRMSE\n";
    for (std::size_t k = 0; k < eval::RETable::kHours.size(); ++k)
        os << eval::RETable::kHours[k] << "," << fmt_opt(table.re_r[k]) << ","
           << fmt_opt(table.re_ubrmse[k]) << "\n";
    write_text_file(fs::path(out_dir) / "re_table.csv", os.str());

    json j = {{"baseline_R", fmt_opt(table.baseline_r)},
              {"baseline_ubRMSE", fmt_opt(table.baseline_ubrmse)},
              {"mean_RE_R", fmt_opt(table.mean_re_r)},
              {"mean_RE_ubRMSE", fmt_opt(table.mean_re_ubrmse)}};
    write_text_file(fs::path(out_dir) / "summary.json", j.dump(2) + "\n");
    std::printf("mean RE_R %s, mean RE_ubRMSE %s\n", fmt_opt(table.mean_re_r).c_str(),
                fmt_opt(table.mean_re_ubrmse).c_str());
    return 0;
}

int cmd_tch(const std::vector<std::string>& product_dirs, const std::string& out_dir,
            std::int64_t min_samples) {
    write_run_manifest(out_dir, "tch",
                       {{"products", product_dirs}, {"out", out_dir}, {"min_samples", min_samples}});
    std::vector<geo::TargetField> products;
    for (const auto& dir : product_dirs) products.push_back(geo::load_target(dir));

    std::ostringstream os;
    os << "product,sampling,mean_variance,mean_sigma,cells\n";
    for (const bool daily : {false, true}) {
        const auto maps = eval::tch_maps(products, min_samples, daily);
        for (std::size_t k = 0; k < maps.size(); ++k) {
            const std::string name = "tch_" + std::string(daily ? "daily" : "3h") + "_product" +
                                     std::to_string(k);
            geo::TargetField cube;
            cube.grid = products[k].grid;
            cube.times = {products[k].times.empty() ? 0 : products[k].times.front()};
            cube.values.assign(maps[k].values.begin(), maps[k].values.end());
            cube.mask = maps[k].mask;
            geo::save_target(cube, (fs::path(out_dir) / name).string());
            util::write_pgm((fs::path(out_dir) / (name + ".pgm")).string(), maps[k]);

            double sum = 0.0;
            std::int64_t n = 0;
            for (std::int64_t i = 0; i < maps[k].nrows * maps[k].ncols; ++i)
                if (maps[k].mask[static_cast<std::size_t>(i)]) {
                    sum += maps[k].values[static_cast<std::size_t>(i)];
                    ++n;
                }
            const double mv = n ? sum / static_cast<double>(n) : 0.0;
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g,%lld\n", k, daily ? "daily" : "3h",
                          mv, std::sqrt(std::max(mv, 0.0)), static_cast<long long>(n));
            os << buf;
        }
    }
    write_text_file(fs::path(out_dir) / "tch_summary.csv", os.str());
    std::printf("TCH maps for %zu products written to %s\n", products.size(), out_dir.c_str());
    return 0;
}

int cmd_gradcheck(int instances) {
    const auto res = ad::run_gradient_suite(instances);
    for (const auto& e : res.entries)
        std::printf("%-26s max rel err %.3e  %s\n", e.name.c_str(), e.max_rel_error,
                    e.pass ? "ok" : "FAIL");
    std::printf("gradient suite: %s (%.1fs, %d instances per op)\n", res.pass ? "PASS" : "FAIL",
                res.seconds, instances);
    return res.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stdown - spatio-temporal soil-moisture downscaling"};
    app.set_version_flag("--version", kVersion);
    int threads = 0;
    if (const char* env = std::getenv("STDOWN_THREADS")) threads = std::atoi(env);
    app.add_option("--threads", threads, "worker threads (0 = all cores)")->capture_default_str();

    std::string spec_path, out_dir, data_dir, config_path, checkpoint_dir, fine_dir, product_dir,
        reference_dir, stations_path, metrics_path;
    std::vector<std::string> product_dirs;
    std::int64_t seed_override = -1, min_samples = 30;
    int instances = 20;
    geo::StationFilter filter;
    bool all_quality = false, all_season = false;

    auto* synth = app.add_subcommand("synth", "generate a synthetic scene");
    synth->add_option("--spec", spec_path, "scene spec JSON (defaults when omitted)");
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--seed", seed_override, "override the scene seed");

    auto* train = app.add_subcommand("train", "train on a coarse scene directory");
    train->add_option("--data", data_dir, "scene directory (cube_coarse/, target_coarse/)")
        ->required();
    train->add_option("--config", config_path, "config JSON with model/loss/train sections");
    train->add_option("--out", out_dir, "checkpoint directory")->required();
    train->add_option("--seed", seed_override, "override the training seed");

    auto* infer = app.add_subcommand("infer", "downscale a fine cube with a checkpoint");
    infer->add_option("--checkpoint", checkpoint_dir, "checkpoint directory")->required();
    infer->add_option("--fine", fine_dir, "fine-grid STC cube directory")->required();
    infer->add_option("--out", out_dir, "output directory")->required();

    auto* evalc = app.add_subcommand("eval-coarse", "validate a product against a gridded reference");
    evalc->add_option("--product", product_dir, "product STC directory")->required();
    evalc->add_option("--reference", reference_dir, "reference STC directory")->required();
    evalc->add_option("--out", out_dir, "output directory")->required();

    auto* evals = app.add_subcommand("eval-stations", "validate a product against station records");
    evals->add_option("--product", product_dir, "product STC directory")->required();
    evals->add_option("--stations", stations_path, "stations.csv")->required();
    evals->add_option("--out", out_dir, "output directory")->required();
    evals->add_option("--max-depth", filter.max_depth_cm, "maximum sensor depth, cm")
        ->capture_default_str();
    evals->add_option("--max-missing", filter.max_missing_rate, "maximum missing-data rate")
        ->capture_default_str();
    evals->add_flag("--all-quality", all_quality, "keep samples regardless of quality flag");
    evals->add_flag("--all-season", all_season, "disable the melt-season window");

    auto* relg = app.add_subcommand("relgen", "temporal generalization table from per-hour metrics");
    relg->add_option("--metrics", metrics_path, "metrics_by_hour.csv")->required();
    relg->add_option("--out", out_dir, "output directory")->required();

    auto* tch = app.add_subcommand("tch", "three-cornered-hat uncertainty maps");
    tch->add_option("--products", product_dirs, "three or more product STC directories")
        ->required()
        ->expected(-3);
    tch->add_option("--out", out_dir, "output directory")->required();
    tch->add_option("--min-samples", min_samples, "minimum shared samples per cell")
        ->capture_default_str();

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--instances", instances, "random instances per operator")
        ->capture_default_str();
    std::string ops = "all";
    gradcheck->add_option("--ops", ops, "operator set (all)")->capture_default_str();

    app.require_subcommand(1);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage / message
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    util::set_thread_count(threads);
    try {
        if (*synth) return cmd_synth(spec_path, out_dir, seed_override);
        if (*train) return cmd_train(data_dir, config_path, out_dir, seed_override);
        if (*infer) return cmd_infer(checkpoint_dir, fine_dir, out_dir);
        if (*evalc) return cmd_eval_coarse(product_dir, reference_dir, out_dir);
        if (*evals) {
            filter.good_quality_only = !all_quality;
            filter.season_only = !all_season;
            return cmd_eval_stations(product_dir, stations_path, out_dir, filter);
        }
        if (*relg) return cmd_relgen(metrics_path, out_dir);
        if (*tch) return cmd_tch(product_dirs, out_dir, min_samples);
        if (*gradcheck) return cmd_gradcheck(instances);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
