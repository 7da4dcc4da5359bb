#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "graduate/blc.hpp"
#include "graduate/lifetable.hpp"

namespace graduate {

struct HeatmapCell {
  std::string label;
  int age = 0;
  double expectancy = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// One column per table. Every table must report the same ages.
std::vector<HeatmapCell> heatmap_grid(std::span<const ExpectancyTable> tables, std::span<const std::string> labels);

// Years become the column labels.
std::vector<HeatmapCell> heatmap_grid(const BLCExpectancy& e);

// Columns label,age,expectancy,lower,upper.
void write_heatmap_csv(std::ostream& out, const std::vector<HeatmapCell>& cells);

}  // namespace graduate
