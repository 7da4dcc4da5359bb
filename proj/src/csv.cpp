#include "graduate/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "graduate/errors.hpp"

namespace graduate {

namespace {

struct Cell {
  double exposure;
  double deaths;
};

using Table = std::map<std::pair<int, int>, Cell>;  // (year, age)

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
  throw DataError("row " + std::to_string(row) + ": " + what);
}

double parse_real(const std::string& s, std::size_t row, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    row_error(row, "column " + column + " is not a number: '" + s + "'");
  }
  if (v < 0.0) row_error(row, "column " + column + " is negative");
  return v;
}

int parse_int(std::string s, std::size_t row, const std::string& column) {
  if (!s.empty() && s.back() == '+') s.pop_back();  // open age group "110+"
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    row_error(row, "column " + column + " is not an integer: '" + s + "'");
  }
  return v;
}

Table read_table(std::istream& in, Series series) {
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw DataError("empty CSV input");
  const std::vector<std::string> header = split(line);
  const std::string ex = "Ex." + series_suffix(series);
  const std::string dx = "Dx." + series_suffix(series);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError("CSV header lacks column '" + name + "'");
  };
  const std::size_t c_year = column("Year");
  const std::size_t c_age = column("Age");
  const std::size_t c_ex = column(ex);
  const std::size_t c_dx = column(dx);

  Table table;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split(line);
    if (f.size() != header.size()) {
      row_error(row, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    }
    const int year = parse_int(f[c_year], row, "Year");
    const int age = parse_int(f[c_age], row, "Age");
    if (age < 0) row_error(row, "negative age");
    const Cell cell{parse_real(f[c_ex], row, ex), parse_real(f[c_dx], row, dx)};
    if (!table.emplace(std::make_pair(year, age), cell).second) {
      row_error(row, "duplicate row for year " + std::to_string(year) + ", age " + std::to_string(age));
    }
  }
  if (table.empty()) throw DataError("CSV input has no data rows");
  return table;
}

std::set<int> years_in(const Table& t) {
  std::set<int> ys;
  for (const auto& [key, cell] : t) ys.insert(key.first);
  return ys;
}

std::pair<int, int> age_span(const Table& t, int year) {
  int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
  for (const auto& [key, cell] : t) {
    if (key.first != year) continue;
    lo = std::min(lo, key.second);
    hi = std::max(hi, key.second);
  }
  return {lo, hi};
}

const Cell& lookup(const Table& t, int year, int age) {
  const auto it = t.find({year, age});
  if (it == t.end()) {
    throw DataError("no row for year " + std::to_string(year) + ", age " + std::to_string(age));
  }
  return it->second;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

}  // namespace

Series parse_series(const std::string& name) {
  if (name == "Total" || name == "total") return Series::total;
  if (name == "Male" || name == "male") return Series::male;
  if (name == "Female" || name == "female") return Series::female;
  throw ConfigError("unknown series '" + name + "' (use Total, Male or Female)");
}

std::string series_suffix(Series s) {
  switch (s) {
    case Series::total: return "Total";
    case Series::male: return "Male";
    case Series::female: return "Female";
  }
  return "Total";
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  auto number = [&](const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("bad range '" + text + "' (expected a:b)");
    }
    return v;
  };
  if (colon == std::string::npos) {
    const int v = number(text);
    return {v, v};
  }
  const int a = number(text.substr(0, colon));
  const int b = number(text.substr(colon + 1));
  if (b < a) throw ConfigError("bad range '" + text + "': end before start");
  return {a, b};
}

MortalityData parse_mortality_csv(std::istream& in, const DatasetSpec& spec) {
  const Table table = read_table(in, spec.series);
  int year = 0;
  if (spec.year) {
    year = *spec.year;
  } else {
    const auto ys = years_in(table);
    if (ys.size() != 1) throw ConfigError("the file holds several years; select one with --year");
    year = *ys.begin();
  }
  if (!years_in(table).count(year)) throw DataError("no rows for year " + std::to_string(year));
  const auto [lo, hi] = spec.ages.value_or(age_span(table, year));

  MortalityData d;
  for (int age = lo; age <= hi; ++age) {
    const Cell& c = lookup(table, year, age);
    d.ages.push_back(age);
    d.exposures.push_back(c.exposure);
    d.deaths.push_back(c.deaths);
  }
  d.validate();
  return d;
}

MortalityData load_mortality_csv(const DatasetSpec& spec) {
  std::ifstream in = open(spec.path);
  return parse_mortality_csv(in, spec);
}

LogMortalityMatrix parse_log_mortality_matrix(std::istream& in, const DatasetSpec& spec) {
  const Table table = read_table(in, spec.series);
  const auto all_years = years_in(table);
  std::pair<int, int> yr;
  if (spec.years) {
    yr = *spec.years;
  } else if (spec.year) {
    yr = {*spec.year, *spec.year};
  } else {
    yr = {*all_years.begin(), *all_years.rbegin()};
  }
  const auto [lo, hi] = spec.ages.value_or(age_span(table, yr.first));

  LogMortalityMatrix Y;
  for (int a = lo; a <= hi; ++a) Y.ages.push_back(a);
  for (int t = yr.first; t <= yr.second; ++t) Y.years.push_back(t);
  Y.values.resize(static_cast<Eigen::Index>(Y.ages.size()), static_cast<Eigen::Index>(Y.years.size()));
  for (std::size_t i = 0; i < Y.ages.size(); ++i) {
    for (std::size_t t = 0; t < Y.years.size(); ++t) {
      const Cell& c = lookup(table, Y.years[t], Y.ages[i]);
      if (!(c.exposure > 0.0) || !(c.deaths > 0.0)) {
        throw DataError("log rate undefined (zero deaths or exposure) at age " + std::to_string(Y.ages[i]) +
                        ", year " + std::to_string(Y.years[t]) + "; restrict the age range");
      }
      Y.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = std::log(c.deaths / c.exposure);
    }
  }
  Y.validate();
  return Y;
}

LogMortalityMatrix load_log_mortality_matrix(const DatasetSpec& spec) {
  std::ifstream in = open(spec.path);
  return parse_log_mortality_matrix(in, spec);
}

}  // namespace graduate
