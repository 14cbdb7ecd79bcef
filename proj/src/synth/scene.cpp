#include "stdown/synth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "stdown/geo/stc_io.hpp"
#include "stdown/util/rng.hpp"
#include "stdown/util/timeaxis.hpp"

namespace stdown::synth {

using geo::DataCube;
using geo::Field2D;
using geo::GeoGrid;
using geo::TargetField;
using nlohmann::json;

void SceneSpec::validate() const {
    fine.validate();
    coarse.validate();
    if (coarse.dlat <= fine.dlat || coarse.dlon <= fine.dlon)
        throw std::invalid_argument("coarse grid must be coarser than the fine grid");
    if (n_steps < 1) throw std::invalid_argument("scene needs at least one timestep");
    if (mapping != "logistic" && mapping != "linear")
        throw std::invalid_argument("mapping must be 'logistic' or 'linear'");
    if (target_gap_fraction < 0.0 || target_gap_fraction > 1.0)
        throw std::invalid_argument("gap fraction must be in [0, 1]");
    if (memory_decay < 0.0 || memory_decay >= 1.0)
        throw std::invalid_argument("memory decay must be in [0, 1)");
}

namespace {

// stream ids for counter-based substreams
enum : std::uint64_t {
    kStreamStatic = 1,
    kStreamDynamic = 2,
    kStreamFluxNoise = 3,
    kStreamGaps = 4,
    kStreamStations = 5,
    kStreamObsNoise = 6,
};

// Smooth standard field: white noise blurred by a truncated separable
// Gaussian (edge-renormalized), then standardized to mean 0 / std 1.
std::vector<double> smooth_field(const GeoGrid& grid, double corr_len_deg, util::Rng& rng) {
    const std::int64_t H = grid.nlat, W = grid.nlon;
    std::vector<double> noise(static_cast<std::size_t>(H * W));
    for (auto& v : noise) v = rng.next_normal();

    const double sigma_cells = std::max(corr_len_deg / grid.dlat, 1e-6);
    const std::int64_t radius = std::max<std::int64_t>(1, static_cast<std::int64_t>(3.0 * sigma_cells));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    for (std::int64_t k = -radius; k <= radius; ++k)
        kernel[static_cast<std::size_t>(k + radius)] =
            std::exp(-0.5 * static_cast<double>(k * k) / (sigma_cells * sigma_cells));

    auto blur_axis = [&](const std::vector<double>& src, bool rows) {
        std::vector<double> dst(src.size());
        for (std::int64_t i = 0; i < H; ++i)
            for (std::int64_t j = 0; j < W; ++j) {
                double acc = 0.0, wsum = 0.0;
                for (std::int64_t k = -radius; k <= radius; ++k) {
                    const std::int64_t ii = rows ? i + k : i;
                    const std::int64_t jj = rows ? j : j + k;
                    if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                    const double w = kernel[static_cast<std::size_t>(k + radius)];
                    acc += w * src[static_cast<std::size_t>(ii * W + jj)];
                    wsum += w;
                }
                dst[static_cast<std::size_t>(i * W + j)] = acc / wsum;
            }
        return dst;
    };
    auto field = blur_axis(blur_axis(noise, true), false);

    double mean = 0.0;
    for (double v : field) mean += v;
    mean /= static_cast<double>(field.size());
    double ss = 0.0;
    for (double v : field) ss += (v - mean) * (v - mean);
    const double sd = std::max(std::sqrt(ss / static_cast<double>(field.size())), 1e-12);
    for (auto& v : field) v = (v - mean) / sd;
    return field;
}

}  // namespace

double scene_mapping(const SceneSpec& spec, double memory, double tair, double texture) {
    const double mem_n = (memory - spec.memory_center) / spec.memory_spread;
    const double tanom = -(tair - spec.tair_mean_k) / spec.tair_spread_k;
    const double z = spec.g_bias + spec.g_memory * mem_n + spec.g_temp * tanom +
                     spec.g_texture * texture;
    double sm;
    if (spec.mapping == "logistic") {
        const double s = 1.0 / (1.0 + std::exp(-spec.g_gain * z));
        sm = spec.sm_lo + (spec.sm_hi - spec.sm_lo) * s;
    } else {
        sm = 0.5 * (spec.sm_lo + spec.sm_hi) + spec.linear_slope * z;
    }
    return std::clamp(sm, spec.sm_lo, spec.sm_hi);
}

Scene gen_scene(const SceneSpec& spec) {
    spec.validate();
    const GeoGrid& fg = spec.fine;
    const std::int64_t H = fg.nlat, W = fg.nlon, P = H * W;
    const std::int64_t T = spec.n_steps;

    Scene scene;
    DataCube& cf = scene.cube_fine;
    cf.grid = fg;
    cf.schema.vars = {{"precip", geo::VarKind::dynamic, "mm/h"},
                      {"tair", geo::VarKind::dynamic, "K"},
                      {"srad", geo::VarKind::dynamic, "W/m2"},
                      {"flux", geo::VarKind::dynamic, "index"},
                      {"evap", geo::VarKind::dynamic, "mm/h"},
                      {"runoff", geo::VarKind::dynamic, "mm/h"},
                      {"clay", geo::VarKind::static_field, "index"},
                      {"sand", geo::VarKind::static_field, "index"},
                      {"elev", geo::VarKind::static_field, "m"}};
    for (std::int64_t t = 0; t < T; ++t) cf.times.push_back(spec.t_start + t * geo::kTimeStepSeconds);
    cf.allocate();
    const std::int64_t C = cf.C();

    // static fields
    util::Rng rs(util::substream(spec.seed, kStreamStatic));
    const auto clay = smooth_field(fg, spec.corr_len_static_deg, rs);
    const auto sand = smooth_field(fg, spec.corr_len_static_deg, rs);
    auto elev = smooth_field(fg, spec.corr_len_static_deg, rs);
    for (auto& v : elev) v = 4000.0 + 500.0 * v;

    // AR(1) dynamic drivers (standardized marginals)
    const int kDrivers = 5;  // precip raw, tair, srad, evap, runoff
    std::vector<std::vector<double>> driver(kDrivers);
    const double rho = spec.ar1_rho;
    const double innov_scale = std::sqrt(1.0 - rho * rho);

    scene.truth_fine.grid = fg;
    scene.truth_fine.times = cf.times;
    scene.truth_fine.allocate();

    std::vector<double> memory(static_cast<std::size_t>(P), spec.memory_center);

    for (std::int64_t t = 0; t < T; ++t) {
        const std::int64_t epoch = cf.times[static_cast<std::size_t>(t)];
        for (int d = 0; d < kDrivers; ++d) {
            util::Rng rt(util::substream(spec.seed, kStreamDynamic,
                                         static_cast<std::uint64_t>(t) * 16 +
                                             static_cast<std::uint64_t>(d)));
            auto innov = smooth_field(fg, spec.corr_len_dynamic_deg, rt);
            if (t == 0) {
                driver[static_cast<std::size_t>(d)] = std::move(innov);
            } else {
                auto& f = driver[static_cast<std::size_t>(d)];
                for (std::int64_t p = 0; p < P; ++p)
                    f[static_cast<std::size_t>(p)] = rho * f[static_cast<std::size_t>(p)] +
                                                     innov_scale * innov[static_cast<std::size_t>(p)];
            }
        }

        util::Rng rf(util::substream(spec.seed, kStreamFluxNoise, static_cast<std::uint64_t>(t)));
        const double hod = static_cast<double>(util::hour_of_day(epoch));
        const double diurnal =
            spec.tair_diurnal_k * std::cos(2.0 * std::numbers::pi * (hod - 14.0) / 24.0);

        for (std::int64_t p = 0; p < P; ++p) {
            const double precip =
                spec.precip_scale *
                std::max(0.0, driver[0][static_cast<std::size_t>(p)] - spec.precip_threshold);
            memory[static_cast<std::size_t>(p)] = spec.memory_decay * memory[static_cast<std::size_t>(p)] +
                                                  (1.0 - spec.memory_decay) * precip;
            const double tair = spec.tair_mean_k +
                                spec.tair_spread_k * driver[1][static_cast<std::size_t>(p)] + diurnal;
            const double flux =
                memory[static_cast<std::size_t>(p)] + spec.flux_noise * rf.next_normal();

            const auto base = static_cast<std::size_t>((t * P + p) * C);
            cf.values[base + 0] = precip;
            cf.values[base + 1] = tair;
            cf.values[base + 2] = 300.0 + 80.0 * driver[2][static_cast<std::size_t>(p)];
            cf.values[base + 3] = flux;
            cf.values[base + 4] = 0.2 + 0.1 * driver[3][static_cast<std::size_t>(p)];
            cf.values[base + 5] = 0.05 + 0.05 * driver[4][static_cast<std::size_t>(p)];
            cf.values[base + 6] = clay[static_cast<std::size_t>(p)];
            cf.values[base + 7] = sand[static_cast<std::size_t>(p)];
            cf.values[base + 8] = elev[static_cast<std::size_t>(p)];

            scene.truth_fine.values[static_cast<std::size_t>(t * P + p)] = scene_mapping(
                spec, memory[static_cast<std::size_t>(p)], tair, clay[static_cast<std::size_t>(p)]);
        }
    }

    // quantize through the on-disk precision so save/load round-trips exactly
    for (auto& v : cf.values) v = geo::f32_round(v);
    for (auto& v : scene.truth_fine.values) v = geo::f32_round(v);

    // coarse auxiliary cube by area-weighted aggregation
    DataCube& cc = scene.cube_coarse;
    cc.grid = spec.coarse;
    cc.schema = cf.schema;
    cc.times = cf.times;
    cc.allocate();
    const std::int64_t Pc = cc.H() * cc.W();
    for (std::int64_t t = 0; t < T; ++t)
        for (std::int64_t c = 0; c < C; ++c) {
            Field2D fld(H, W);
            for (std::int64_t p = 0; p < P; ++p)
                fld.values[static_cast<std::size_t>(p)] =
                    cf.values[static_cast<std::size_t>((t * P + p) * C + c)];
            const Field2D agg = geo::aggregate_to_coarse(fld, fg, spec.coarse);
            for (std::int64_t p = 0; p < Pc; ++p) {
                cc.values[static_cast<std::size_t>((t * Pc + p) * C + c)] =
                    geo::f32_round(agg.values[static_cast<std::size_t>(p)]);
                cc.mask[static_cast<std::size_t>((t * Pc + p) * C + c)] =
                    agg.mask[static_cast<std::size_t>(p)];
            }
        }

    // coarse target: aggregated truth at the 06:00/18:00 anchors with
    // blobby gap masks (and optional observation noise)
    TargetField& tc = scene.target_coarse;
    tc.grid = spec.coarse;
    for (std::int64_t t = 0; t < T; ++t) {
        const int hod = util::hour_of_day(cf.times[static_cast<std::size_t>(t)]);
        if (hod == 6 || hod == 18) tc.times.push_back(cf.times[static_cast<std::size_t>(t)]);
    }
    tc.allocate();
    for (std::size_t k = 0; k < tc.times.size(); ++k) {
        const std::int64_t t = (tc.times[k] - spec.t_start) / geo::kTimeStepSeconds;
        Field2D fld(H, W);
        for (std::int64_t p = 0; p < P; ++p)
            fld.values[static_cast<std::size_t>(p)] =
                scene.truth_fine.values[static_cast<std::size_t>(t * P + p)];
        const Field2D agg = geo::aggregate_to_coarse(fld, fg, spec.coarse);

        util::Rng rg(util::substream(spec.seed, kStreamGaps, static_cast<std::uint64_t>(t)));
        std::vector<double> gap_field;
        double gap_cut = 0.0;
        if (spec.target_gap_fraction > 0.0 && spec.target_gap_fraction < 1.0) {
            gap_field = smooth_field(spec.coarse, spec.coarse.dlat * 4.0, rg);
            // standardized field: the quantile of a normal at the gap fraction
            std::vector<double> sorted = gap_field;
            std::sort(sorted.begin(), sorted.end());
            const auto cut_idx = static_cast<std::size_t>(
                std::min<double>(static_cast<double>(sorted.size() - 1),
                                 spec.target_gap_fraction * static_cast<double>(sorted.size())));
            gap_cut = sorted[cut_idx];
        }
        util::Rng rn(util::substream(spec.seed, kStreamObsNoise, static_cast<std::uint64_t>(t)));
        for (std::int64_t p = 0; p < Pc; ++p) {
            const auto o = static_cast<std::size_t>(static_cast<std::int64_t>(k) * Pc + p);
            double v = agg.values[static_cast<std::size_t>(p)];
            if (spec.target_obs_noise > 0.0) v += spec.target_obs_noise * rn.next_normal();
            tc.values[o] = geo::f32_round(v);
            const bool gapped =
                spec.target_gap_fraction >= 1.0 ||
                (!gap_field.empty() && gap_field[static_cast<std::size_t>(p)] < gap_cut);
            tc.mask[o] = (agg.mask[static_cast<std::size_t>(p)] && !gapped) ? 1 : 0;
        }
    }

    // stations: unique fine cells, truth + independent noise
    util::Rng rst(util::substream(spec.seed, kStreamStations));
    std::vector<std::int64_t> cells;
    while (static_cast<std::int64_t>(cells.size()) < std::min(spec.n_stations, P)) {
        const auto cell = static_cast<std::int64_t>(rst.next_below(static_cast<std::uint64_t>(P)));
        if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
    }
    for (std::size_t s = 0; s < cells.size(); ++s) {
        geo::StationRecord st;
        char name[16];
        std::snprintf(name, sizeof(name), "st%02zu", s);
        st.id = name;
        const std::int64_t ci = cells[s] / W, cj = cells[s] % W;
        st.lat = fg.lat(ci) + fg.dlat * 0.3 * (rst.next_double() - 0.5);
        st.lon = fg.lon(cj) + fg.dlon * 0.3 * (rst.next_double() - 0.5);
        st.depth_cm = 2.0;
        for (std::int64_t t = 0; t < T; ++t) {
            const double truth = scene.truth_fine.values[static_cast<std::size_t>(t * P + cells[s])];
            const double sm = geo::f32_round(truth + spec.station_noise * rst.next_normal());
            const bool bad = rst.next_double() < spec.station_bad_fraction;
            st.series.push_back({cf.times[static_cast<std::size_t>(t)], sm, bad ? "bad" : "good"});
        }
        scene.stations.push_back(std::move(st));
    }

    return scene;
}

namespace {

json spec_to_json(const SceneSpec& s) {
    return json{{"seed", s.seed},
                {"fine", {{"lat0", s.fine.lat0}, {"lon0", s.fine.lon0}, {"dlat", s.fine.dlat},
                          {"dlon", s.fine.dlon}, {"nlat", s.fine.nlat}, {"nlon", s.fine.nlon}}},
                {"coarse", {{"lat0", s.coarse.lat0}, {"lon0", s.coarse.lon0}, {"dlat", s.coarse.dlat},
                            {"dlon", s.coarse.dlon}, {"nlat", s.coarse.nlat}, {"nlon", s.coarse.nlon}}},
                {"t_start", s.t_start},
                {"n_steps", s.n_steps},
                {"corr_len_dynamic_deg", s.corr_len_dynamic_deg},
                {"corr_len_static_deg", s.corr_len_static_deg},
                {"ar1_rho", s.ar1_rho},
                {"precip_threshold", s.precip_threshold},
                {"precip_scale", s.precip_scale},
                {"memory_decay", s.memory_decay},
                {"memory_center", s.memory_center},
                {"memory_spread", s.memory_spread},
                {"tair_mean_k", s.tair_mean_k},
                {"tair_spread_k", s.tair_spread_k},
                {"tair_diurnal_k", s.tair_diurnal_k},
                {"mapping", s.mapping},
                {"g_bias", s.g_bias},
                {"g_memory", s.g_memory},
                {"g_temp", s.g_temp},
                {"g_texture", s.g_texture},
                {"g_gain", s.g_gain},
                {"linear_slope", s.linear_slope},
                {"sm_lo", s.sm_lo},
                {"sm_hi", s.sm_hi},
                {"flux_noise", s.flux_noise},
                {"target_obs_noise", s.target_obs_noise},
                {"target_gap_fraction", s.target_gap_fraction},
                {"station_noise", s.station_noise},
                {"station_bad_fraction", s.station_bad_fraction},
                {"n_stations", s.n_stations}};
}

}  // namespace

std::string scene_manifest(const SceneSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

SceneSpec parse_manifest(const std::string& text) {
    const json j = json::parse(text);
    SceneSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    auto load_grid = [&](const char* key, GeoGrid& g) {
        const json& gj = j.at(key);
        g.lat0 = gj.at("lat0").get<double>();
        g.lon0 = gj.at("lon0").get<double>();
        g.dlat = gj.at("dlat").get<double>();
        g.dlon = gj.at("dlon").get<double>();
        g.nlat = gj.at("nlat").get<std::int64_t>();
        g.nlon = gj.at("nlon").get<std::int64_t>();
    };
    load_grid("fine", s.fine);
    load_grid("coarse", s.coarse);
    s.t_start = j.at("t_start").get<std::int64_t>();
    s.n_steps = j.at("n_steps").get<std::int64_t>();
    s.corr_len_dynamic_deg = j.at("corr_len_dynamic_deg").get<double>();
    s.corr_len_static_deg = j.at("corr_len_static_deg").get<double>();
    s.ar1_rho = j.at("ar1_rho").get<double>();
    s.precip_threshold = j.at("precip_threshold").get<double>();
    s.precip_scale = j.at("precip_scale").get<double>();
    s.memory_decay = j.at("memory_decay").get<double>();
    s.memory_center = j.at("memory_center").get<double>();
    s.memory_spread = j.at("memory_spread").get<double>();
    s.tair_mean_k = j.at("tair_mean_k").get<double>();
    s.tair_spread_k = j.at("tair_spread_k").get<double>();
    s.tair_diurnal_k = j.at("tair_diurnal_k").get<double>();
    s.mapping = j.at("mapping").get<std::string>();
    s.g_bias = j.at("g_bias").get<double>();
    s.g_memory = j.at("g_memory").get<double>();
    s.g_temp = j.at("g_temp").get<double>();
    s.g_texture = j.at("g_texture").get<double>();
    s.g_gain = j.at("g_gain").get<double>();
    s.linear_slope = j.at("linear_slope").get<double>();
    s.sm_lo = j.at("sm_lo").get<double>();
    s.sm_hi = j.at("sm_hi").get<double>();
    s.flux_noise = j.at("flux_noise").get<double>();
    s.target_obs_noise = j.at("target_obs_noise").get<double>();
    s.target_gap_fraction = j.at("target_gap_fraction").get<double>();
    s.station_noise = j.at("station_noise").get<double>();
    s.station_bad_fraction = j.at("station_bad_fraction").get<double>();
    s.n_stations = j.at("n_stations").get<std::int64_t>();
    return s;
}

std::uint64_t manifest_hash(const SceneSpec& spec) {
    const std::string text = scene_manifest(spec);
    return util::fnv1a(text.data(), text.size());
}

void save_scene(const Scene& scene, const SceneSpec& spec, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    geo::save_cube(scene.cube_fine, (fs::path(dir) / "cube_fine").string());
    geo::save_cube(scene.cube_coarse, (fs::path(dir) / "cube_coarse").string());
    geo::save_target(scene.truth_fine, (fs::path(dir) / "truth_fine").string());
    geo::save_target(scene.target_coarse, (fs::path(dir) / "target_coarse").string());
    geo::save_stations(scene.stations, (fs::path(dir) / "stations.csv").string());
    std::ofstream f(fs::path(dir) / "scene.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write scene.json under " + dir);
    f << scene_manifest(spec);
}

}  // namespace stdown::synth
