#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stdown/geo/cube.hpp"
#include "stdown/geo/stations.hpp"

namespace stdown::synth {

// Fully serialized recipe for a synthetic scene. Same seed, same scene,
// bit for bit; every mapping coefficient lands in scene.json so any
// evaluation against the generated truth is auditable.
struct SceneSpec {
    std::uint64_t seed = 20240601;

    geo::GeoGrid fine{30.05, 85.05, 0.1, 0.1, 90, 90};
    geo::GeoGrid coarse{30.18, 85.18, 0.36, 0.36, 25, 25};
    std::int64_t t_start = 1496275200;  // 2017-06-01 00:00 UTC
    std::int64_t n_steps = 480;         // 60 days of 3-hour steps

    // auxiliary field statistics
    double corr_len_dynamic_deg = 1.5;
    double corr_len_static_deg = 0.8;
    double ar1_rho = 0.9;

    // precipitation process and its exponential memory
    double precip_threshold = 0.6;
    double precip_scale = 2.0;
    double memory_decay = 0.85;  // per 3-hour step
    double memory_center = 0.45;
    double memory_spread = 0.25;

    // temperature process
    double tair_mean_k = 285.0;
    double tair_spread_k = 8.0;
    double tair_diurnal_k = 2.0;

    // truth mapping g: logistic squashing of a weighted sum of the
    // precipitation memory, negative temperature anomaly, and static
    // texture term, clamped to [sm_lo, sm_hi]
    std::string mapping = "logistic";  // or "linear"
    double g_bias = 0.0;
    double g_memory = 1.2;
    double g_temp = 0.5;
    double g_texture = 0.6;
    double g_gain = 0.9;
    double linear_slope = 0.10;
    double sm_lo = 0.02;
    double sm_hi = 0.60;

    // noise and gaps
    double flux_noise = 0.02;        // on the wetness-flux channel
    double target_obs_noise = 0.0;   // on the coarse target observations
    double target_gap_fraction = 0.2;
    double station_noise = 0.01;
    double station_bad_fraction = 0.02;
    std::int64_t n_stations = 20;

    bool operator==(const SceneSpec&) const = default;
    void validate() const;
};

struct Scene {
    geo::DataCube cube_fine;        // auxiliary channels, fine grid, all timestamps
    geo::DataCube cube_coarse;      // aggregated auxiliaries, coarse grid
    geo::TargetField truth_fine;    // 3-hourly truth SM, fine grid
    geo::TargetField target_coarse; // 06:00/18:00 observations with gap masks
    std::vector<geo::StationRecord> stations;
};

Scene gen_scene(const SceneSpec& spec);

// The truth mapping itself, exposed for monotonicity probes.
double scene_mapping(const SceneSpec& spec, double memory, double tair, double texture);

std::string scene_manifest(const SceneSpec& spec);
SceneSpec parse_manifest(const std::string& text);
std::uint64_t manifest_hash(const SceneSpec& spec);

// Writes cube_fine/, cube_coarse/, truth_fine/, target_coarse/,
// stations.csv and scene.json under dir.
void save_scene(const Scene& scene, const SceneSpec& spec, const std::string& dir);

}  // namespace stdown::synth
