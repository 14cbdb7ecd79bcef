#pragma once

#include <string>

#include "stdown/geo/cube.hpp"
#include "stdown/geo/stations.hpp"

namespace stdown::geo {

// STC cube container: a directory holding manifest.json (grid, schema,
// times, dtype "f32le", order "T,H,W,C row-major"), data.bin with IEEE-754
// 32-bit little-endian values and mask.bin with one 0/1 byte per cell.
void save_cube(const DataCube& cube, const std::string& dir);
DataCube load_cube(const std::string& dir);

// A TargetField travels as a single-channel STC cube named "sm".
void save_target(const TargetField& target, const std::string& dir);
TargetField load_target(const std::string& dir);

// stations.csv columns: id,lat,lon,depth_cm,time_epoch,sm,quality
void save_stations(const std::vector<StationRecord>& stations, const std::string& path);
std::vector<StationRecord> load_stations(const std::string& path);

void save_norm_stats(const NormStats& stats, const ChannelStats& target_stats,
                     const std::string& path);
void load_norm_stats(const std::string& path, NormStats& stats, ChannelStats& target_stats);

// Round a double through IEEE-754 binary32, the on-disk precision.
inline double f32_round(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace stdown::geo
