#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graduate/blc.hpp"
#include "graduate/closure.hpp"
#include "graduate/dlm.hpp"
#include "graduate/hp.hpp"
#include "graduate/lifetable.hpp"

namespace graduate {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Every document carries schema_version, kind and a summary block; sample
// matrices are included unless `with_samples` is false.
Json to_json(const HPFit& fit, bool with_samples = true);
Json to_json(const DLMFit& fit, bool with_samples = true);
Json to_json(const BLCFit& fit, bool with_samples = true);
Json to_json(const ClosedTable& table);

HPFit hp_fit_from_json(const Json& j);
DLMFit dlm_fit_from_json(const Json& j);
BLCFit blc_fit_from_json(const Json& j);
ClosedTable closed_table_from_json(const Json& j);

// "hp", "dlm", "blc" or "closed"; DataError for unknown or newer schemas.
std::string document_kind(const Json& j);

Json summary_to_json(const std::vector<std::pair<std::string, PosteriorSummary>>& summary);
std::vector<std::pair<std::string, PosteriorSummary>> summary_from_json(const Json& j);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// Shortest decimal with 17 significant digits, so binary64 values survive a
// text round trip.
std::string format_real(double v);

struct TidyRow {
  int age = 0;
  std::optional<int> year;
  std::string statistic;
  double value = 0.0;
};

// Columns age[,year],statistic,value.
void write_tidy_csv(std::ostream& out, const std::vector<TidyRow>& rows);

}  // namespace graduate
