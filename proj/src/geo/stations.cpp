#include "stdown/geo/stations.hpp"

#include <cmath>
#include <map>

#include "stdown/geo/cube.hpp"

namespace stdown::geo {

std::int64_t match_station_to_cell(const StationRecord& station, const GeoGrid& grid) {
    return cell_index(grid, station.lat, station.lon);
}

double missing_rate(const StationRecord& station, std::int64_t t_begin, std::int64_t t_end) {
    if (t_end <= t_begin) return 1.0;
    const std::int64_t slots = (t_end - t_begin) / kTimeStepSeconds + 1;
    std::int64_t filled = 0;
    std::int64_t last_slot = -1;
    for (const auto& s : station.series) {
        if (s.time < t_begin || s.time > t_end) continue;
        if (s.quality != "good") continue;
        const std::int64_t slot = (s.time - t_begin + kTimeStepSeconds / 2) / kTimeStepSeconds;
        if (slot != last_slot) {
            ++filled;
            last_slot = slot;
        }
    }
    return 1.0 - static_cast<double>(filled) / static_cast<double>(slots);
}

std::vector<StationAssignment> assign_stations(const std::vector<StationRecord>& stations,
                                               const GeoGrid& grid, std::int64_t t_begin,
                                               std::int64_t t_end,
                                               std::vector<std::size_t>* excluded) {
    std::map<std::int64_t, std::pair<std::size_t, double>> best;  // cell -> (station, rate)
    for (std::size_t k = 0; k < stations.size(); ++k) {
        const std::int64_t cell = match_station_to_cell(stations[k], grid);
        if (cell < 0) {
            if (excluded) excluded->push_back(k);
            continue;
        }
        const double rate = missing_rate(stations[k], t_begin, t_end);
        auto it = best.find(cell);
        if (it == best.end() || rate < it->second.second) best[cell] = {k, rate};
    }
    std::vector<StationAssignment> out;
    out.reserve(best.size());
    for (const auto& [cell, entry] : best) out.push_back({entry.first, cell});
    return out;
}

BinnedSeries bin_to_timestamps(const StationRecord& station,
                               const std::vector<std::int64_t>& times, bool good_quality_only) {
    BinnedSeries out;
    out.values.assign(times.size(), 0.0);
    out.mask.assign(times.size(), 0);
    const std::int64_t half = kTimeStepSeconds / 2;
    for (std::size_t t = 0; t < times.size(); ++t) {
        double sum = 0.0;
        std::int64_t n = 0;
        for (const auto& s : station.series) {
            if (good_quality_only && s.quality != "good") continue;
            const std::int64_t d = s.time - times[t];
            if (d < -half || d > half) continue;
            sum += s.sm;
            ++n;
        }
        if (n > 0) {
            out.values[t] = sum / static_cast<double>(n);
            out.mask[t] = 1;
        }
    }
    return out;
}

}  // namespace stdown::geo
