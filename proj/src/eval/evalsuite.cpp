#include "stdown/eval/evalsuite.hpp"

#include <stdexcept>

#include "stdown/util/timeaxis.hpp"

namespace stdown::eval {

using geo::Field2D;
using geo::TargetField;

CoarseValidation validate_vs_coarse(const TargetField& product, const TargetField& reference) {
    CoarseValidation out;
    const std::int64_t Pc = reference.H() * reference.W();
    std::vector<std::vector<double>> cell_ref(static_cast<std::size_t>(Pc));
    std::vector<std::vector<double>> cell_prod(static_cast<std::size_t>(Pc));
    std::vector<double> pooled_ref, pooled_prod;
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_hour;

    for (std::size_t rt = 0; rt < reference.times.size(); ++rt) {
        const auto pt = product.time_index(reference.times[rt]);
        if (!pt) continue;
        ++out.shared_timestamps;
        const Field2D agg =
            geo::aggregate_to_coarse(product.slice(*pt), product.grid, reference.grid);
        const int hour = util::hour_of_day(reference.times[rt]);
        auto& hour_bin = by_hour[hour];
        for (std::int64_t p = 0; p < Pc; ++p) {
            const auto ri = static_cast<std::size_t>(static_cast<std::int64_t>(rt) * Pc + p);
            if (!reference.mask[ri] || !agg.mask[static_cast<std::size_t>(p)]) continue;
            const double rv = reference.values[ri];
            const double pv = agg.values[static_cast<std::size_t>(p)];
            cell_ref[static_cast<std::size_t>(p)].push_back(rv);
            cell_prod[static_cast<std::size_t>(p)].push_back(pv);
            pooled_ref.push_back(rv);
            pooled_prod.push_back(pv);
            hour_bin.first.push_back(rv);
            hour_bin.second.push_back(pv);
        }
    }
    if (out.shared_timestamps == 0)
        throw std::invalid_argument("product and reference share no timestamps");

    out.pooled = metrics(pooled_ref, pooled_prod);
    out.r_map = Field2D(reference.H(), reference.W());
    for (std::int64_t p = 0; p < Pc; ++p) {
        const auto rep = metrics(cell_ref[static_cast<std::size_t>(p)],
                                 cell_prod[static_cast<std::size_t>(p)]);
        if (rep.r) {
            out.r_map.values[static_cast<std::size_t>(p)] = *rep.r;
        } else {
            out.r_map.mask[static_cast<std::size_t>(p)] = 0;
        }
    }
    for (auto& [hour, pairs] : by_hour) out.by_hour[hour] = metrics(pairs.first, pairs.second);
    return out;
}

namespace {

std::string network_of(const std::string& id) {
    const auto pos = id.find_first_of("-_");
    if (pos == std::string::npos || pos == 0) return "all";
    return id.substr(0, pos);
}

}  // namespace

StationValidation validate_vs_stations(const TargetField& product,
                                       const std::vector<geo::StationRecord>& stations,
                                       const geo::StationFilter& filter) {
    StationValidation out;
    if (product.times.empty()) throw std::invalid_argument("product has no timestamps");
    const std::int64_t t_begin = product.times.front();
    const std::int64_t t_end = product.times.back();

    // depth rule first, then per-cell representative selection
    std::vector<geo::StationRecord> shallow;
    for (const auto& st : stations) {
        if (st.depth_cm < filter.max_depth_cm) {
            shallow.push_back(st);
        } else {
            out.skipped.push_back(st.id + ": depth " + std::to_string(st.depth_cm) + " cm");
        }
    }
    std::vector<std::size_t> outside;
    const auto picks = geo::assign_stations(shallow, product.grid, t_begin, t_end, &outside);
    for (auto k : outside) out.skipped.push_back(shallow[k].id + ": outside product domain");

    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> network_pairs;
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> hour_pairs;

    for (const auto& pick : picks) {
        const geo::StationRecord& st = shallow[pick.station_index];
        if (missing_rate(st, t_begin, t_end) > filter.max_missing_rate) {
            out.skipped.push_back(st.id + ": missing-data rate above threshold");
            continue;
        }
        const auto bins = geo::bin_to_timestamps(st, product.times, filter.good_quality_only);

        std::vector<double> obs, pred;
        for (std::size_t t = 0; t < product.times.size(); ++t) {
            if (!bins.mask[t]) continue;
            if (filter.season_only &&
                !util::in_day_window(product.times[t], filter.season_begin_month,
                                     filter.season_begin_day, filter.season_end_month,
                                     filter.season_end_day))
                continue;
            const auto pi = static_cast<std::size_t>(
                static_cast<std::int64_t>(t) * product.H() * product.W() + pick.cell);
            if (!product.mask[pi]) continue;
            obs.push_back(bins.values[t]);
            pred.push_back(product.values[pi]);
            const int hour = util::hour_of_day(product.times[t]);
            hour_pairs[hour].first.push_back(bins.values[t]);
            hour_pairs[hour].second.push_back(product.values[pi]);
        }
        if (obs.empty()) {
            out.skipped.push_back(st.id + ": no overlapping samples");
            continue;
        }
        StationRow row;
        row.id = st.id;
        row.network = network_of(st.id);
        row.cell = pick.cell;
        row.report = metrics(obs, pred);
        out.per_station.push_back(row);
        auto& np = network_pairs[row.network];
        np.first.insert(np.first.end(), obs.begin(), obs.end());
        np.second.insert(np.second.end(), pred.begin(), pred.end());
    }
    for (auto& [net, pairs] : network_pairs) out.per_network[net] = metrics(pairs.first, pairs.second);
    for (auto& [hour, pairs] : hour_pairs) out.by_hour[hour] = metrics(pairs.first, pairs.second);
    return out;
}

}  // namespace stdown::eval
