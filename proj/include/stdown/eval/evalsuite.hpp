#pragma once

#include <map>
#include <string>
#include <vector>

#include "stdown/eval/metrics.hpp"
#include "stdown/geo/cube.hpp"
#include "stdown/geo/stations.hpp"

namespace stdown::eval {

// Validation of a fine product against a coarse(r) reference: the
// product is aggregated onto the reference grid, pooled metrics are
// computed over all flattened (cell, time) pairs, a per-cell temporal R
// map is produced, and pooled metrics per UTC hour feed the temporal
// generalization table.
struct CoarseValidation {
    MetricsReport pooled;
    geo::Field2D r_map;                   // reference grid; masked where n < 2
    std::map<int, MetricsReport> by_hour;  // UTC hour -> pooled metrics
    std::int64_t shared_timestamps = 0;
};

CoarseValidation validate_vs_coarse(const geo::TargetField& product,
                                    const geo::TargetField& reference);

struct StationRow {
    std::string id;
    std::string network;
    std::int64_t cell = -1;
    MetricsReport report;
};

struct StationValidation {
    std::vector<StationRow> per_station;
    std::map<std::string, MetricsReport> per_network;  // pooled pairs
    std::map<int, MetricsReport> by_hour;              // pooled over all kept stations
    std::vector<std::string> skipped;                  // "id: reason"
};

// Stations are depth- and quality-filtered, deduplicated per cell by
// missing rate, aggregated to 3-hour bins, season-windowed, and compared
// to the product series at their cells. The network name is the id
// prefix before the first '-' or '_' ("all" when absent).
StationValidation validate_vs_stations(const geo::TargetField& product,
                                       const std::vector<geo::StationRecord>& stations,
                                       const geo::StationFilter& filter = {});

}  // namespace stdown::eval
