#include "graduate/heatmap.hpp"

#include <ostream>

#include "graduate/errors.hpp"
#include "graduate/serialize.hpp"

namespace graduate {

std::vector<HeatmapCell> heatmap_grid(std::span<const ExpectancyTable> tables, std::span<const std::string> labels) {
  if (tables.size() != labels.size()) {
    throw ConfigError("heat map needs one label per fit (" + std::to_string(tables.size()) + " fits, " +
                      std::to_string(labels.size()) + " labels)");
  }
  std::vector<HeatmapCell> cells;
  for (std::size_t c = 0; c < tables.size(); ++c) {
    const ExpectancyTable& t = tables[c];
    if (t.ages != tables.front().ages) throw DataError("heat map columns cover different ages");
    for (std::size_t i = 0; i < t.ages.size(); ++i) {
      cells.push_back({labels[c], t.ages[i], t.point[i], t.lower[i], t.upper[i]});
    }
  }
  return cells;
}

std::vector<HeatmapCell> heatmap_grid(const BLCExpectancy& e) {
  std::vector<HeatmapCell> cells;
  for (std::size_t t = 0; t < e.years.size(); ++t) {
    for (std::size_t i = 0; i < e.ages.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(t);
      cells.push_back({std::to_string(e.years[t]), e.ages[i], e.point(r, c), e.lower(r, c), e.upper(r, c)});
    }
  }
  return cells;
}

void write_heatmap_csv(std::ostream& out, const std::vector<HeatmapCell>& cells) {
  out << "label,age,expectancy,lower,upper\n";
  for (const auto& c : cells) {
    out << c.label << ',' << c.age << ',' << format_real(c.expectancy) << ',' << format_real(c.lower) << ','
        << format_real(c.upper) << '\n';
  }
}

}  // namespace graduate
