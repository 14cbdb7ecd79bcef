#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stdown/geo/grid.hpp"

namespace stdown::geo {

struct StationSample {
    std::int64_t time = 0;  // epoch seconds
    double sm = 0.0;        // m3/m3
    std::string quality;    // "good" passes the quality filter
};

struct StationRecord {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
    double depth_cm = 0.0;
    std::vector<StationSample> series;  // time-sorted
};

// Station-processing rules, all configurable (defaults follow the
// shallow-depth / good-quality / melt-season conventions).
struct StationFilter {
    double max_depth_cm = 5.0;
    double max_missing_rate = 0.95;
    bool good_quality_only = true;
    bool season_only = true;
    unsigned season_begin_month = 4, season_begin_day = 1;   // April 1
    unsigned season_end_month = 11, season_end_day = 1;      // November 1
};

// Nearest-center cell for the station, or -1 if outside the grid.
std::int64_t match_station_to_cell(const StationRecord& station, const GeoGrid& grid);

// Fraction of 3-hour slots in [t_begin, t_end] without a good sample.
double missing_rate(const StationRecord& station, std::int64_t t_begin, std::int64_t t_end);

struct StationAssignment {
    std::size_t station_index;
    std::int64_t cell;
};

// Cell assignment keeping, per cell, the station with the lowest
// missing-data rate over the given span. Stations outside the grid are
// dropped (reported by index in `excluded`).
std::vector<StationAssignment> assign_stations(const std::vector<StationRecord>& stations,
                                               const GeoGrid& grid, std::int64_t t_begin,
                                               std::int64_t t_end,
                                               std::vector<std::size_t>* excluded = nullptr);

// Aggregates good-quality samples to 3-hour bins centered on the given
// timestamps (mean of samples within +-1.5 h). mask=0 for empty bins.
struct BinnedSeries {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
};
BinnedSeries bin_to_timestamps(const StationRecord& station,
                               const std::vector<std::int64_t>& times,
                               bool good_quality_only = true);

}  // namespace stdown::geo
