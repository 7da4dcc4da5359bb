#include "graduate/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "graduate/errors.hpp"

namespace graduate {

namespace {

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw DataError("ragged matrix in JSON");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const Json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Json header(const std::string& kind) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  return j;
}

void expect_kind(const Json& j, const std::string& kind) {
  if (document_kind(j) != kind) throw DataError("expected a '" + kind + "' document, found '" + document_kind(j) + "'");
}

Json data_to_json(const MortalityData& d) {
  return {{"ages", d.ages}, {"exposures", d.exposures}, {"deaths", d.deaths}};
}

MortalityData data_from_json(const Json& j) {
  MortalityData d;
  d.ages = j.at("ages").get<std::vector<int>>();
  d.exposures = j.at("exposures").get<std::vector<double>>();
  d.deaths = j.at("deaths").get<std::vector<double>>();
  d.validate();
  return d;
}

template <typename T>
Json optional_to_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

Json hp_params_to_json(const HPParams& p) {
  return {{"A", optional_to_json(p.A)}, {"B", optional_to_json(p.B)}, {"C", optional_to_json(p.C)},
          {"D", p.D},  {"E", p.E},  {"F", p.F},  {"G", p.G},  {"H", p.H},
          {"K", optional_to_json(p.K)}, {"sigma2", optional_to_json(p.sigma2)}};
}

}  // namespace

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string document_kind(const Json& j) {
  if (!j.is_object() || !j.contains("schema_version") || !j.contains("kind")) {
    throw DataError("not a fit document (schema_version/kind missing)");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kSchemaVersion) throw DataError("unsupported schema_version " + std::to_string(version));
  return j.at("kind").get<std::string>();
}

Json summary_to_json(const std::vector<std::pair<std::string, PosteriorSummary>>& summary) {
  Json out = Json::array();
  for (const auto& [name, s] : summary) {
    Json q = Json::array();
    for (const auto& [level, value] : s.quantiles) q.push_back({level, value});
    out.push_back({{"name", name}, {"mean", s.mean}, {"sd", s.sd}, {"quantiles", q}});
  }
  return out;
}

std::vector<std::pair<std::string, PosteriorSummary>> summary_from_json(const Json& j) {
  const Json& block = j.is_object() ? j.at("summary") : j;
  std::vector<std::pair<std::string, PosteriorSummary>> out;
  for (const Json& e : block) {
    PosteriorSummary s;
    s.mean = e.at("mean").get<double>();
    s.sd = e.at("sd").get<double>();
    for (const Json& q : e.at("quantiles")) s.quantiles[q.at(0).get<double>()] = q.at(1).get<double>();
    out.emplace_back(e.at("name").get<std::string>(), std::move(s));
  }
  return out;
}

Json to_json(const HPFit& fit, bool with_samples) {
  Json j = header("hp");
  const HPConfig& c = fit.config;
  Json means = Json::array(), vars = Json::array();
  for (int i = 0; i < 8; ++i) {
    means.push_back(optional_to_json(c.prior_means[static_cast<std::size_t>(i)]));
    vars.push_back(optional_to_json(c.prior_variances[static_cast<std::size_t>(i)]));
  }
  j["config"] = {{"model", to_string(c.model)},
                 {"iterations", c.iterations},
                 {"burn_in", c.effective_burn_in()},
                 {"thin", c.thin},
                 {"prior_means", means},
                 {"prior_variances", vars},
                 {"inits", c.inits ? hp_params_to_json(*c.inits) : Json(nullptr)},
                 {"proposal_scales", optional_to_json(c.proposal_scales)},
                 {"adapt", c.adapt},
                 {"reduced_model", c.reduced_model},
                 {"sigma2_shape", c.sigma2_shape},
                 {"sigma2_scale", c.sigma2_scale},
                 {"seed", c.seed}};
  j["seed"] = c.seed;
  j["acceptance_rate"] = fit.acceptance_rate;
  j["final_scales"] = fit.final_scales;
  j["data"] = data_to_json(fit.data);
  j["summary"] = summary_to_json(hp_summary(fit));
  if (with_samples) {
    Json s = Json::array();
    for (const HPParams& p : fit.samples) s.push_back(hp_params_to_json(p));
    j["samples"] = std::move(s);
  }
  return j;
}

HPFit hp_fit_from_json(const Json& j) {
  expect_kind(j, "hp");
  if (!j.contains("samples")) throw DataError("the HP document was saved without samples");
  HPFit fit;
  const Json& c = j.at("config");
  fit.config.model = parse_observation_model(c.at("model").get<std::string>());
  fit.config.iterations = c.at("iterations").get<int>();
  fit.config.burn_in = c.at("burn_in").get<int>();
  fit.config.thin = c.at("thin").get<int>();
  for (std::size_t i = 0; i < 8; ++i) {
    fit.config.prior_means[i] = optional_from_json<double>(c.at("prior_means").at(i));
    fit.config.prior_variances[i] = optional_from_json<double>(c.at("prior_variances").at(i));
  }
  fit.config.proposal_scales = optional_from_json<std::vector<double>>(c.at("proposal_scales"));
  fit.config.adapt = c.at("adapt").get<bool>();
  fit.config.reduced_model = c.at("reduced_model").get<bool>();
  fit.config.sigma2_shape = c.at("sigma2_shape").get<double>();
  fit.config.sigma2_scale = c.at("sigma2_scale").get<double>();
  fit.config.seed = c.at("seed").get<std::uint64_t>();
  fit.acceptance_rate = j.at("acceptance_rate").get<double>();
  fit.final_scales = j.at("final_scales").get<std::vector<double>>();
  fit.data = data_from_json(j.at("data"));

  auto params = [](const Json& s) {
    HPParams p;
    p.A = optional_from_json<double>(s.at("A"));
    p.B = optional_from_json<double>(s.at("B"));
    p.C = optional_from_json<double>(s.at("C"));
    p.D = s.at("D").get<double>();
    p.E = s.at("E").get<double>();
    p.F = s.at("F").get<double>();
    p.G = s.at("G").get<double>();
    p.H = s.at("H").get<double>();
    p.K = optional_from_json<double>(s.at("K"));
    p.sigma2 = optional_from_json<double>(s.at("sigma2"));
    return p;
  };
  if (!c.at("inits").is_null()) fit.config.inits = params(c.at("inits"));
  for (const Json& s : j.at("samples")) fit.samples.push_back(params(s));
  return fit;
}

Json to_json(const DLMFit& fit, bool with_samples) {
  Json j = header("dlm");
  const DLMConfig& c = fit.config;
  j["config"] = {{"F", vector_to_json(c.F.transpose())},
                 {"G", matrix_to_json(c.G)},
                 {"delta", c.delta},
                 {"m0", vector_to_json(c.m0)},
                 {"C0", matrix_to_json(c.C0)},
                 {"sig2_shape", c.sig2_shape},
                 {"sig2_scale", c.sig2_scale},
                 {"iterations", c.iterations},
                 {"burn_in", c.burn_in},
                 {"thin", c.thin},
                 {"ages", c.ages},
                 {"seed", c.seed}};
  j["seed"] = c.seed;
  j["y"] = fit.y;
  j["summary"] = summary_to_json(dlm_summary(fit));
  if (with_samples) {
    Json states = Json::array(), w = Json::array();
    for (const auto& s : fit.states) states.push_back(matrix_to_json(s));
    for (const auto& m : fit.W_last) w.push_back(matrix_to_json(m));
    j["samples"] = {{"V", fit.V_samples}, {"states", states}, {"W_last", w}};
  }
  return j;
}

DLMFit dlm_fit_from_json(const Json& j) {
  expect_kind(j, "dlm");
  if (!j.contains("samples")) throw DataError("the DLM document was saved without samples");
  DLMFit fit;
  const Json& c = j.at("config");
  DLMConfig& cfg = fit.config;
  cfg.F = vector_from_json(c.at("F")).transpose();
  cfg.G = matrix_from_json(c.at("G"));
  cfg.delta = c.at("delta").get<double>();
  cfg.m0 = vector_from_json(c.at("m0"));
  cfg.C0 = matrix_from_json(c.at("C0"));
  cfg.sig2_shape = c.at("sig2_shape").get<double>();
  cfg.sig2_scale = c.at("sig2_scale").get<double>();
  cfg.iterations = c.at("iterations").get<int>();
  cfg.burn_in = c.at("burn_in").get<int>();
  cfg.thin = c.at("thin").get<int>();
  cfg.ages = c.at("ages").get<std::vector<int>>();
  cfg.seed = c.at("seed").get<std::uint64_t>();
  fit.y = j.at("y").get<std::vector<double>>();
  const Json& s = j.at("samples");
  fit.V_samples = s.at("V").get<std::vector<double>>();
  for (const Json& m : s.at("states")) fit.states.push_back(matrix_from_json(m));
  for (const Json& m : s.at("W_last")) fit.W_last.push_back(matrix_from_json(m));
  if (fit.states.size() != fit.V_samples.size() || fit.W_last.size() != fit.V_samples.size()) {
    throw DataError("DLM document has inconsistent sample counts");
  }
  return fit;
}

Json to_json(const BLCFit& fit, bool with_samples) {
  Json j = header("blc");
  j["data"] = {{"ages", fit.data.ages}, {"years", fit.data.years}, {"values", matrix_to_json(fit.data.values)}};
  j["summary"] = summary_to_json(blc_summary(fit));
  if (with_samples) {
    j["samples"] = {{"alpha", matrix_to_json(fit.alpha)},
                    {"beta", matrix_to_json(fit.beta)},
                    {"kappa", matrix_to_json(fit.kappa)},
                    {"theta", vector_to_json(fit.theta)},
                    {"sigma2_eps", vector_to_json(fit.sig2_eps)},
                    {"sigma2_omega", vector_to_json(fit.sig2_omega)}};
  }
  return j;
}

BLCFit blc_fit_from_json(const Json& j) {
  expect_kind(j, "blc");
  if (!j.contains("samples")) throw DataError("the Lee-Carter document was saved without samples");
  BLCFit fit;
  const Json& d = j.at("data");
  fit.data.ages = d.at("ages").get<std::vector<int>>();
  fit.data.years = d.at("years").get<std::vector<int>>();
  fit.data.values = matrix_from_json(d.at("values"));
  fit.data.validate();
  const Json& s = j.at("samples");
  const auto nA = static_cast<Eigen::Index>(fit.data.ages.size());
  const auto T = static_cast<Eigen::Index>(fit.data.years.size());
  fit.alpha = matrix_from_json(s.at("alpha"), nA);
  fit.beta = matrix_from_json(s.at("beta"), nA);
  fit.kappa = matrix_from_json(s.at("kappa"), T);
  fit.theta = vector_from_json(s.at("theta"));
  fit.sig2_eps = vector_from_json(s.at("sigma2_eps"));
  fit.sig2_omega = vector_from_json(s.at("sigma2_omega"));
  return fit;
}

Json to_json(const ClosedTable& table) {
  Json j = header("closed");
  j["method"] = to_string(table.method);
  j["source"] = table.source;
  j["x0"] = table.x0;
  j["k"] = table.k;
  j["ages"] = table.ages;
  j["qx"] = matrix_to_json(table.qx);
  return j;
}

ClosedTable closed_table_from_json(const Json& j) {
  expect_kind(j, "closed");
  ClosedTable t;
  t.method = parse_closing_method(j.at("method").get<std::string>());
  t.source = j.at("source").get<std::string>();
  t.x0 = j.at("x0").get<int>();
  t.k = j.at("k").get<int>();
  t.ages = j.at("ages").get<std::vector<int>>();
  t.qx = matrix_from_json(j.at("qx"), static_cast<Eigen::Index>(t.ages.size()));
  return t;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw DataError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
  if (!out) throw DataError("error writing '" + path + "'");
}

void write_tidy_csv(std::ostream& out, const std::vector<TidyRow>& rows) {
  bool with_year = false;
  for (const auto& r : rows) with_year = with_year || r.year.has_value();
  out << (with_year ? "age,year,statistic,value\n" : "age,statistic,value\n");
  for (const auto& r : rows) {
    out << r.age << ',';
    if (with_year) out << (r.year ? std::to_string(*r.year) : "") << ',';
    out << r.statistic << ',' << format_real(r.value) << '\n';
  }
}

}  // namespace graduate
