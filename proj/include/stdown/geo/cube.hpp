#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stdown/geo/grid.hpp"

namespace stdown::geo {

enum class VarKind { dynamic, static_field, context };

std::string to_string(VarKind k);
VarKind var_kind_from_string(const std::string& s);

struct VarDef {
    std::string name;
    VarKind kind = VarKind::dynamic;
    std::string units;

    bool operator==(const VarDef&) const = default;
};

// Ordered channel list; channel index = list position.
struct VarSchema {
    std::vector<VarDef> vars;

    std::int64_t channels() const { return static_cast<std::int64_t>(vars.size()); }
    std::int64_t index_of(const std::string& name) const;
    bool has_context() const;
    void validate() const;

    bool operator==(const VarSchema&) const = default;
};

constexpr std::int64_t kTimeStepSeconds = 10800;  // uniform 3-hour axis

// T x H x W x C multi-variable field with per-cell validity mask.
struct DataCube {
    GeoGrid grid;
    VarSchema schema;
    std::vector<std::int64_t> times;
    std::vector<double> values;       // T*H*W*C, row-major
    std::vector<std::uint8_t> mask;   // same layout

    std::int64_t T() const { return static_cast<std::int64_t>(times.size()); }
    std::int64_t H() const { return grid.nlat; }
    std::int64_t W() const { return grid.nlon; }
    std::int64_t C() const { return schema.channels(); }
    std::int64_t idx(std::int64_t t, std::int64_t i, std::int64_t j, std::int64_t c) const {
        return ((t * H() + i) * W() + j) * C() + c;
    }
    void allocate() {
        values.assign(static_cast<std::size_t>(T() * H() * W() * C()), 0.0);
        mask.assign(values.size(), 1);
    }
    void validate() const;  // shapes, time axis, static-channel invariance
};

// T x H x W single-variable field (soil moisture target or any gridded
// series reused through the evaluation code).
struct TargetField {
    GeoGrid grid;
    std::vector<std::int64_t> times;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    std::int64_t T() const { return static_cast<std::int64_t>(times.size()); }
    std::int64_t H() const { return grid.nlat; }
    std::int64_t W() const { return grid.nlon; }
    std::int64_t idx(std::int64_t t, std::int64_t i, std::int64_t j) const {
        return (t * H() + i) * W() + j;
    }
    void allocate() {
        values.assign(static_cast<std::size_t>(T() * H() * W()), 0.0);
        mask.assign(values.size(), 1);
    }
    Field2D slice(std::int64_t t) const;
    std::optional<std::int64_t> time_index(std::int64_t epoch) const;
};

// Quality control for the soil-moisture target: masks frozen conditions
// (surface temperature < 273.15 K), open-water coverage > 10%, and
// values below the 0.02 validity floor. Values are left unchanged.
TargetField qc_filter_sm(const TargetField& sm, const TargetField& surface_temp,
                         const TargetField& water_frac);

struct ChannelStats {
    double mean = 0.0;
    double stddev = 1.0;  // population convention, clamped to >= 1e-8
};

struct NormStats {
    std::vector<std::string> names;  // one entry per schema channel
    std::vector<ChannelStats> channels;
};

constexpr double kStdFloor = 1e-8;

// Per-channel mean/std over valid cells (population 1/N convention).
NormStats zscore_fit(const DataCube& cube);
DataCube zscore_apply(const DataCube& cube, const NormStats& stats);

// Mean/std of the valid target cells, for denormalizing predictions.
ChannelStats fit_target_stats(const TargetField& target);

// Linear interpolation of one series onto new times. No extrapolation;
// source gaps longer than max_gap_s stay masked.
struct Series {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;
};
Series temporal_interp(const std::vector<double>& src_values,
                       const std::vector<std::uint8_t>& src_mask,
                       const std::vector<std::int64_t>& src_times,
                       const std::vector<std::int64_t>& dst_times,
                       std::int64_t max_gap_s = 48 * 3600);

}  // namespace stdown::geo
