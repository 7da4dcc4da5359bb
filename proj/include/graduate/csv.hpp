#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graduate/blc.hpp"
#include "graduate/lifetable.hpp"

namespace graduate {

enum class Series { total, male, female };

Series parse_series(const std::string& name);
// Column suffix used in the CSV header: "Total", "Male" or "Female".
std::string series_suffix(Series s);

// Long-format CSV with Year, Age, Ex.<Series>, Dx.<Series> columns.
struct DatasetSpec {
  std::string path;
  std::optional<int> year;
  std::optional<std::pair<int, int>> years;  // inclusive, for Lee-Carter
  Series series = Series::total;
  std::optional<std::pair<int, int>> ages;   // inclusive
};

// One year of data. Without a year filter the file must hold a single year.
MortalityData load_mortality_csv(const DatasetSpec& spec);
MortalityData parse_mortality_csv(std::istream& in, const DatasetSpec& spec);

// Ages x years of log(D/E); every cell must be finite.
LogMortalityMatrix load_log_mortality_matrix(const DatasetSpec& spec);
LogMortalityMatrix parse_log_mortality_matrix(std::istream& in, const DatasetSpec& spec);

// Parses "a:b" (or a single age "a") into an inclusive range.
std::pair<int, int> parse_range(const std::string& text);

}  // namespace graduate
