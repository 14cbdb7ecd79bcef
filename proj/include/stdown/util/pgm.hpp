#pragma once

#include <string>

#include "stdown/geo/grid.hpp"

namespace stdown::util {

// Plain 8-bit PGM export for eyeballing heatmaps. Valid cells are
// scaled min->max onto 1..255; masked cells are 0.
void write_pgm(const std::string& path, const geo::Field2D& field);

}  // namespace stdown::util
