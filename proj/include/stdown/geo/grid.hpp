#pragma once

#include <cstdint>
#include <vector>

namespace stdown::geo {

// Regular latitude-longitude raster geometry. Cell centers are
// lat0 + i*dlat, lon0 + j*dlon; no rotation, no projection.
struct GeoGrid {
    double lat0 = 0.0;
    double lon0 = 0.0;
    double dlat = 1.0;
    double dlon = 1.0;
    std::int64_t nlat = 1;
    std::int64_t nlon = 1;

    void validate() const;
    double lat(std::int64_t i) const { return lat0 + static_cast<double>(i) * dlat; }
    double lon(std::int64_t j) const { return lon0 + static_cast<double>(j) * dlon; }
    double lat_max() const { return lat(nlat - 1); }
    double lon_max() const { return lon(nlon - 1); }
    std::int64_t cells() const { return nlat * nlon; }

    bool operator==(const GeoGrid&) const = default;
};

// One H x W field with a validity mask, row-major (i * ncols + j).
struct Field2D {
    std::int64_t nrows = 0;
    std::int64_t ncols = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    Field2D() = default;
    Field2D(std::int64_t r, std::int64_t c)
        : nrows(r), ncols(c), values(static_cast<std::size_t>(r * c), 0.0),
          mask(static_cast<std::size_t>(r * c), 1) {}

    std::int64_t idx(std::int64_t i, std::int64_t j) const { return i * ncols + j; }
    double& at(std::int64_t i, std::int64_t j) { return values[static_cast<std::size_t>(idx(i, j))]; }
    double at(std::int64_t i, std::int64_t j) const { return values[static_cast<std::size_t>(idx(i, j))]; }
    bool valid(std::int64_t i, std::int64_t j) const { return mask[static_cast<std::size_t>(idx(i, j))] != 0; }
};

// Source cells with gaps: mask_gaps keeps any gap-touched destination
// cell masked; fill_gaps renormalizes the bilinear weights over the
// valid neighbors (masked only when all four are invalid).
enum class GapPolicy { mask_gaps, fill_gaps };

// Bilinear resampling between regular grids. Destination centers outside
// the source center lattice clamp to the nearest edge cell.
Field2D bilinear_resample(const Field2D& field, const GeoGrid& src, const GeoGrid& dst,
                          GapPolicy policy = GapPolicy::mask_gaps);

// Area-weighted mean of fine cells overlapping each coarse cell (valid
// cells only). A coarse cell is masked when the valid overlap is less
// than half of its area.
Field2D aggregate_to_coarse(const Field2D& fine, const GeoGrid& fine_grid,
                            const GeoGrid& coarse_grid);

// Nearest-center cell index for a point, or -1 when outside the grid
// bounds (cell edges). Exact boundary ties go to the lower index.
std::int64_t cell_index(const GeoGrid& grid, double lat, double lon);

}  // namespace stdown::geo
