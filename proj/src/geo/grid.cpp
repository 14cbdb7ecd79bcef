#include "stdown/geo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stdown::geo {

void GeoGrid::validate() const {
    if (dlat <= 0.0 || dlon <= 0.0)
        throw std::invalid_argument("grid spacing must be positive (dlat=" + std::to_string(dlat) +
                                    ", dlon=" + std::to_string(dlon) + ")");
    if (nlat < 1 || nlon < 1)
        throw std::invalid_argument("grid must have at least one cell per axis");
}

namespace {

// Fractional index of a coordinate on the center lattice, snapped to the
// nearest integer when within 1e-9 cells so that resampling a grid onto
// itself is an exact identity.
double frac_index(double x, double x0, double dx) {
    double f = (x - x0) / dx;
    const double r = std::round(f);
    if (std::fabs(f - r) < 1e-9) f = r;
    return f;
}

}  // namespace

Field2D bilinear_resample(const Field2D& field, const GeoGrid& src, const GeoGrid& dst,
                          GapPolicy policy) {
    src.validate();
    dst.validate();
    if (field.nrows != src.nlat || field.ncols != src.nlon)
        throw std::invalid_argument("field " + std::to_string(field.nrows) + "x" +
                                    std::to_string(field.ncols) + " does not match source grid " +
                                    std::to_string(src.nlat) + "x" + std::to_string(src.nlon));

    Field2D out(dst.nlat, dst.nlon);
    for (std::int64_t i = 0; i < dst.nlat; ++i) {
        double fi = frac_index(dst.lat(i), src.lat0, src.dlat);
        fi = std::clamp(fi, 0.0, static_cast<double>(src.nlat - 1));
        const std::int64_t i0 = static_cast<std::int64_t>(std::floor(fi));
        const std::int64_t i1 = std::min(i0 + 1, src.nlat - 1);
        const double wy = fi - static_cast<double>(i0);
        for (std::int64_t j = 0; j < dst.nlon; ++j) {
            double fj = frac_index(dst.lon(j), src.lon0, src.dlon);
            fj = std::clamp(fj, 0.0, static_cast<double>(src.nlon - 1));
            const std::int64_t j0 = static_cast<std::int64_t>(std::floor(fj));
            const std::int64_t j1 = std::min(j0 + 1, src.nlon - 1);
            const double wx = fj - static_cast<double>(j0);

            const std::int64_t cells[4] = {field.idx(i0, j0), field.idx(i0, j1), field.idx(i1, j0),
                                           field.idx(i1, j1)};
            const double w[4] = {(1.0 - wy) * (1.0 - wx), (1.0 - wy) * wx, wy * (1.0 - wx),
                                 wy * wx};
            double acc = 0.0, wsum = 0.0;
            bool gap_touched = false;
            for (int k = 0; k < 4; ++k) {
                if (w[k] == 0.0) continue;
                if (field.mask[static_cast<std::size_t>(cells[k])]) {
                    acc += w[k] * field.values[static_cast<std::size_t>(cells[k])];
                    wsum += w[k];
                } else {
                    gap_touched = true;
                }
            }
            const std::int64_t o = out.idx(i, j);
            if (wsum == 0.0 || (policy == GapPolicy::mask_gaps && gap_touched)) {
                out.mask[static_cast<std::size_t>(o)] = 0;
                out.values[static_cast<std::size_t>(o)] = 0.0;
            } else {
                out.values[static_cast<std::size_t>(o)] = acc / wsum;
            }
        }
    }
    return out;
}

namespace {

double overlap_1d(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

}  // namespace

Field2D aggregate_to_coarse(const Field2D& fine, const GeoGrid& fine_grid,
                            const GeoGrid& coarse_grid) {
    fine_grid.validate();
    coarse_grid.validate();
    if (fine.nrows != fine_grid.nlat || fine.ncols != fine_grid.nlon)
        throw std::invalid_argument("field does not match fine grid");

    Field2D out(coarse_grid.nlat, coarse_grid.nlon);
    for (std::int64_t ci = 0; ci < coarse_grid.nlat; ++ci) {
        const double clat0 = coarse_grid.lat(ci) - 0.5 * coarse_grid.dlat;
        const double clat1 = clat0 + coarse_grid.dlat;
        // fine rows whose cell rectangle can intersect [clat0, clat1]
        std::int64_t r0 = static_cast<std::int64_t>(
            std::floor((clat0 - (fine_grid.lat0 - 0.5 * fine_grid.dlat)) / fine_grid.dlat));
        std::int64_t r1 = static_cast<std::int64_t>(
            std::ceil((clat1 - (fine_grid.lat0 - 0.5 * fine_grid.dlat)) / fine_grid.dlat));
        r0 = std::max<std::int64_t>(r0, 0);
        r1 = std::min(r1, fine_grid.nlat);
        for (std::int64_t cj = 0; cj < coarse_grid.nlon; ++cj) {
            const double clon0 = coarse_grid.lon(cj) - 0.5 * coarse_grid.dlon;
            const double clon1 = clon0 + coarse_grid.dlon;
            std::int64_t c0 = static_cast<std::int64_t>(
                std::floor((clon0 - (fine_grid.lon0 - 0.5 * fine_grid.dlon)) / fine_grid.dlon));
            std::int64_t c1 = static_cast<std::int64_t>(
                std::ceil((clon1 - (fine_grid.lon0 - 0.5 * fine_grid.dlon)) / fine_grid.dlon));
            c0 = std::max<std::int64_t>(c0, 0);
            c1 = std::min(c1, fine_grid.nlon);

            double acc = 0.0, valid_w = 0.0;
            for (std::int64_t fi = r0; fi < r1; ++fi) {
                const double flat0 = fine_grid.lat(fi) - 0.5 * fine_grid.dlat;
                const double oy = overlap_1d(flat0, flat0 + fine_grid.dlat, clat0, clat1);
                if (oy <= 0.0) continue;
                for (std::int64_t fj = c0; fj < c1; ++fj) {
                    const double flon0 = fine_grid.lon(fj) - 0.5 * fine_grid.dlon;
                    const double ox = overlap_1d(flon0, flon0 + fine_grid.dlon, clon0, clon1);
                    if (ox <= 0.0) continue;
                    if (!fine.valid(fi, fj)) continue;
                    const double w = ox * oy;
                    acc += w * fine.at(fi, fj);
                    valid_w += w;
                }
            }
            const double total = coarse_grid.dlat * coarse_grid.dlon;
            const std::int64_t o = out.idx(ci, cj);
            if (valid_w / total < 0.5) {
                out.mask[static_cast<std::size_t>(o)] = 0;
                out.values[static_cast<std::size_t>(o)] = 0.0;
            } else {
                out.values[static_cast<std::size_t>(o)] = acc / valid_w;
            }
        }
    }
    return out;
}

std::int64_t cell_index(const GeoGrid& grid, double lat, double lon) {
    grid.validate();
    const double fi = (lat - grid.lat0) / grid.dlat;
    const double fj = (lon - grid.lon0) / grid.dlon;
    if (fi < -0.5 || fi > static_cast<double>(grid.nlat - 1) + 0.5) return -1;
    if (fj < -0.5 || fj > static_cast<double>(grid.nlon - 1) + 0.5) return -1;
    // nearest center; exact half-cell boundaries resolve to the lower index
    const std::int64_t i = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::ceil(fi - 0.5)), 0, grid.nlat - 1);
    const std::int64_t j = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::ceil(fj - 0.5)), 0, grid.nlon - 1);
    return i * grid.nlon + j;
}

}  // namespace stdown::geo
