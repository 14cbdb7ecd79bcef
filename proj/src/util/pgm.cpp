#include "stdown/util/pgm.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace stdown::util {

void write_pgm(const std::string& path, const geo::Field2D& field) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::int64_t i = 0; i < field.nrows * field.ncols; ++i) {
        if (!field.mask[static_cast<std::size_t>(i)]) continue;
        const double v = field.values[static_cast<std::size_t>(i)];
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const double span = hi > lo ? hi - lo : 1.0;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "P5\n" << field.ncols << " " << field.nrows << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(field.ncols));
    // northernmost row on top
    for (std::int64_t i = field.nrows - 1; i >= 0; --i) {
        for (std::int64_t j = 0; j < field.ncols; ++j) {
            const auto k = static_cast<std::size_t>(i * field.ncols + j);
            row[static_cast<std::size_t>(j)] =
                field.mask[k] ? static_cast<unsigned char>(
                                    1 + 254.0 * (field.values[k] - lo) / span)
                              : 0;
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

}  // namespace stdown::util
