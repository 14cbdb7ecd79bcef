#include "stdown/geo/cube.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace stdown::geo {

std::string to_string(VarKind k) {
    switch (k) {
        case VarKind::dynamic: return "dynamic";
        case VarKind::static_field: return "static";
        case VarKind::context: return "context";
    }
    return "dynamic";
}

VarKind var_kind_from_string(const std::string& s) {
    if (s == "dynamic") return VarKind::dynamic;
    if (s == "static") return VarKind::static_field;
    if (s == "context") return VarKind::context;
    throw std::invalid_argument("unknown variable kind '" + s + "'");
}

std::int64_t VarSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < vars.size(); ++i)
        if (vars[i].name == name) return static_cast<std::int64_t>(i);
    return -1;
}

bool VarSchema::has_context() const {
    for (const auto& v : vars)
        if (v.kind == VarKind::context) return true;
    return false;
}

void VarSchema::validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& v : vars) {
        if (v.name.empty()) throw std::invalid_argument("schema has an unnamed channel");
        if (!seen.insert(v.name).second)
            throw std::invalid_argument("duplicate channel name '" + v.name + "'");
    }
    // context channels, when present, are exactly {HOY, longitude, latitude}
    std::vector<std::string> ctx;
    for (const auto& v : vars)
        if (v.kind == VarKind::context) ctx.push_back(v.name);
    if (!ctx.empty()) {
        std::vector<std::string> want = {"HOY", "longitude", "latitude"};
        std::sort(ctx.begin(), ctx.end());
        std::sort(want.begin(), want.end());
        if (ctx != want)
            throw std::invalid_argument("context channels must be exactly {HOY, longitude, latitude}");
    }
}

void DataCube::validate() const {
    grid.validate();
    schema.validate();
    const auto n = static_cast<std::size_t>(T() * H() * W() * C());
    if (values.size() != n || mask.size() != n)
        throw std::invalid_argument("cube storage does not match TxHxWxC = " + std::to_string(n));
    for (std::size_t t = 1; t < times.size(); ++t)
        if (times[t] - times[t - 1] != kTimeStepSeconds)
            throw std::invalid_argument("cube time axis must be uniform 3-hour steps");
    // static channels carry one field; every timestep must repeat it
    for (std::int64_t c = 0; c < C(); ++c) {
        if (schema.vars[static_cast<std::size_t>(c)].kind != VarKind::static_field) continue;
        for (std::int64_t t = 1; t < T(); ++t)
            for (std::int64_t i = 0; i < H(); ++i)
                for (std::int64_t j = 0; j < W(); ++j) {
                    const auto a = static_cast<std::size_t>(idx(0, i, j, c));
                    const auto b = static_cast<std::size_t>(idx(t, i, j, c));
                    if (values[a] != values[b] || mask[a] != mask[b])
                        throw std::invalid_argument(
                            "static channel '" + schema.vars[static_cast<std::size_t>(c)].name +
                            "' varies over time");
                }
    }
}

Field2D TargetField::slice(std::int64_t t) const {
    Field2D f(H(), W());
    const auto base = static_cast<std::size_t>(t * H() * W());
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(base), H() * W(), f.values.begin());
    std::copy_n(mask.begin() + static_cast<std::ptrdiff_t>(base), H() * W(), f.mask.begin());
    return f;
}

std::optional<std::int64_t> TargetField::time_index(std::int64_t epoch) const {
    for (std::size_t t = 0; t < times.size(); ++t)
        if (times[t] == epoch) return static_cast<std::int64_t>(t);
    return std::nullopt;
}

namespace {

void require_same_axes(const TargetField& a, const TargetField& b, const char* what) {
    if (!(a.grid == b.grid) || a.times != b.times)
        throw std::invalid_argument(std::string(what) + ": grid/time mismatch (" +
                                    std::to_string(a.H()) + "x" + std::to_string(a.W()) + " T=" +
                                    std::to_string(a.T()) + " vs " + std::to_string(b.H()) + "x" +
                                    std::to_string(b.W()) + " T=" + std::to_string(b.T()) + ")");
}

}  // namespace

TargetField qc_filter_sm(const TargetField& sm, const TargetField& surface_temp,
                         const TargetField& water_frac) {
    require_same_axes(sm, surface_temp, "qc_filter_sm temperature field");
    require_same_axes(sm, water_frac, "qc_filter_sm water fraction field");
    TargetField out = sm;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (!out.mask[i]) continue;
        const bool frozen = surface_temp.mask[i] && surface_temp.values[i] < 273.15;
        const bool water = water_frac.mask[i] && water_frac.values[i] > 0.10;
        const bool below_floor = out.values[i] < 0.02;
        if (frozen || water || below_floor) out.mask[i] = 0;
    }
    return out;
}

NormStats zscore_fit(const DataCube& cube) {
    NormStats stats;
    const std::int64_t C = cube.C();
    const std::int64_t cells = cube.T() * cube.H() * cube.W();
    stats.names.reserve(static_cast<std::size_t>(C));
    stats.channels.resize(static_cast<std::size_t>(C));
    for (std::int64_t c = 0; c < C; ++c) {
        double sum = 0.0;
        std::int64_t n = 0;
        for (std::int64_t i = 0; i < cells; ++i) {
            const auto k = static_cast<std::size_t>(i * C + c);
            if (!cube.mask[k]) continue;
            sum += cube.values[k];
            ++n;
        }
        const std::string& name = cube.schema.vars[static_cast<std::size_t>(c)].name;
        if (n == 0) throw std::invalid_argument("channel '" + name + "' is fully masked");
        if (n < 2) throw std::invalid_argument("channel '" + name + "' has fewer than 2 valid cells");
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::int64_t i = 0; i < cells; ++i) {
            const auto k = static_cast<std::size_t>(i * C + c);
            if (!cube.mask[k]) continue;
            const double d = cube.values[k] - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        stats.names.push_back(name);
        stats.channels[static_cast<std::size_t>(c)] = {mean, std::max(sd, kStdFloor)};
    }
    return stats;
}

DataCube zscore_apply(const DataCube& cube, const NormStats& stats) {
    if (stats.names.size() != cube.schema.vars.size())
        throw std::invalid_argument("normalization stats have " + std::to_string(stats.names.size()) +
                                    " channels, cube has " + std::to_string(cube.schema.vars.size()));
    for (std::size_t c = 0; c < stats.names.size(); ++c)
        if (stats.names[c] != cube.schema.vars[c].name)
            throw std::invalid_argument("normalization stats channel '" + stats.names[c] +
                                        "' does not match cube channel '" + cube.schema.vars[c].name +
                                        "'");
    DataCube out = cube;
    const std::int64_t C = cube.C();
    const std::int64_t cells = cube.T() * cube.H() * cube.W();
    for (std::int64_t i = 0; i < cells; ++i)
        for (std::int64_t c = 0; c < C; ++c) {
            const auto k = static_cast<std::size_t>(i * C + c);
            const auto& st = stats.channels[static_cast<std::size_t>(c)];
            out.values[k] = (out.values[k] - st.mean) / st.stddev;
        }
    return out;
}

ChannelStats fit_target_stats(const TargetField& target) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < target.values.size(); ++i)
        if (target.mask[i]) {
            sum += target.values[i];
            ++n;
        }
    if (n < 2) throw std::invalid_argument("target field has fewer than 2 valid cells");
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < target.values.size(); ++i)
        if (target.mask[i]) {
            const double d = target.values[i] - mean;
            ss += d * d;
        }
    return {mean, std::max(std::sqrt(ss / static_cast<double>(n)), kStdFloor)};
}

Series temporal_interp(const std::vector<double>& src_values,
                       const std::vector<std::uint8_t>& src_mask,
                       const std::vector<std::int64_t>& src_times,
                       const std::vector<std::int64_t>& dst_times, std::int64_t max_gap_s) {
    if (src_values.size() != src_times.size() || src_mask.size() != src_times.size())
        throw std::invalid_argument("temporal_interp: series lengths disagree");
    for (std::size_t i = 1; i < src_times.size(); ++i)
        if (src_times[i] <= src_times[i - 1])
            throw std::invalid_argument("temporal_interp: source times must be sorted");

    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < src_times.size(); ++i)
        if (src_mask[i]) valid.push_back(i);

    Series out;
    out.values.assign(dst_times.size(), 0.0);
    out.mask.assign(dst_times.size(), 0);
    if (valid.empty()) return out;

    for (std::size_t d = 0; d < dst_times.size(); ++d) {
        const std::int64_t t = dst_times[d];
        // nearest valid samples around t
        std::size_t hi = 0;
        while (hi < valid.size() && src_times[valid[hi]] < t) ++hi;
        if (hi < valid.size() && src_times[valid[hi]] == t) {
            out.values[d] = src_values[valid[hi]];
            out.mask[d] = 1;
            continue;
        }
        if (hi == 0 || hi == valid.size()) continue;  // outside range: no extrapolation
        const std::size_t a = valid[hi - 1], b = valid[hi];
        if (src_times[b] - src_times[a] > max_gap_s) continue;
        const double w = static_cast<double>(t - src_times[a]) /
                         static_cast<double>(src_times[b] - src_times[a]);
        out.values[d] = src_values[a] + w * (src_values[b] - src_values[a]);
        out.mask[d] = 1;
    }
    return out;
}

}  // namespace stdown::geo
