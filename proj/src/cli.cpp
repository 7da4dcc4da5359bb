#include "graduate/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "graduate/blc.hpp"
#include "graduate/closure.hpp"
#include "graduate/csv.hpp"
#include "graduate/dlm.hpp"
#include "graduate/errors.hpp"
#include "graduate/heatmap.hpp"
#include "graduate/hp.hpp"
#include "graduate/serialize.hpp"

namespace graduate {

namespace {

struct Options {
  // data
  std::string in;
  std::optional<int> year;
  std::string years;
  std::string ages;
  std::string series = "Total";
  // model
  std::string model = "lognormal";
  double delta = 0.85;
  std::optional<int> iterations;
  std::optional<int> burn_in;
  std::optional<int> thin;
  std::optional<std::uint64_t> seed;
  bool reduced = false;
  int chains = 1;
  bool summary_only = false;
  // closing / forecasting
  std::string method = "hp";
  std::optional<int> max_age;
  int k = 7;
  std::optional<int> x0;
  std::string new_ages;
  int sir_proposals = 100000;
  int h = 10;
  double prob = 0.95;
  // io
  std::vector<std::string> emit;
  std::string out;
  std::vector<std::string> fits;
  std::vector<std::string> labels;
  std::vector<int> at;
};

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("GRADUATE_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("GRADUATE_SEED must be a non-negative integer");
    return v;
  }
  return 1;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void print_summary(std::ostream& out, const std::vector<std::pair<std::string, PosteriorSummary>>& summary) {
  std::size_t width = 4;
  for (const auto& [name, s] : summary) width = std::max(width, name.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  out << pad("", width) << "  " << pad("mean", 12) << pad("sd", 12) << pad("2.5%", 12) << pad("50%", 12)
      << "97.5%\n";
  for (const auto& [name, s] : summary) {
    auto q = [&](double level) {
      const auto it = s.quantiles.find(level);
      return it == s.quantiles.end() ? std::string("NA") : fmt(it->second);
    };
    out << pad(name, width) << "  " << pad(fmt(s.mean), 12) << pad(fmt(s.sd), 12) << pad(q(0.025), 12)
        << pad(q(0.5), 12) << q(0.975) << '\n';
  }
}

void check_emit(const Options& o, const std::set<std::string>& allowed) {
  for (const auto& e : o.emit) {
    if (!allowed.count(e)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError("--emit " + e + " is not available here (choose from " + list + ")");
    }
  }
}

bool emits(const Options& o, const std::string& what) {
  return std::find(o.emit.begin(), o.emit.end(), what) != o.emit.end();
}

// Output goes to --out when given, stdout otherwise.
void deliver(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out.empty()) {
    out << text;
  } else {
    write_text_file(o.out, text);
  }
}

DatasetSpec dataset(const Options& o) {
  if (o.in.empty()) throw ConfigError("--in is required");
  DatasetSpec spec;
  spec.path = o.in;
  spec.year = o.year;
  if (!o.years.empty()) spec.years = parse_range(o.years);
  if (!o.ages.empty()) spec.ages = parse_range(o.ages);
  spec.series = parse_series(o.series);
  return spec;
}

std::vector<int> at_ages(const Options& o, const std::vector<int>& fitted) {
  return o.at.empty() ? fitted : o.at;
}

// Independent chains with seeds seed, seed + 1, ... run concurrently and are
// returned in seed order.
template <typename Fit, typename Run>
std::vector<Fit> run_chains(int chains, std::uint64_t seed, Run run) {
  if (chains < 1) throw ConfigError("--chains must be at least 1");
  std::vector<std::future<Fit>> jobs;
  for (int c = 0; c < chains; ++c) {
    jobs.push_back(std::async(chains > 1 ? std::launch::async : std::launch::deferred, run,
                              seed + static_cast<std::uint64_t>(c)));
  }
  std::vector<Fit> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

std::string expectancy_csv(const ExpectancyTable& e) {
  std::vector<TidyRow> rows;
  for (std::size_t i = 0; i < e.ages.size(); ++i) {
    rows.push_back({e.ages[i], std::nullopt, "expectancy", e.point[i]});
    rows.push_back({e.ages[i], std::nullopt, "lower", e.lower[i]});
    rows.push_back({e.ages[i], std::nullopt, "upper", e.upper[i]});
  }
  std::ostringstream os;
  write_tidy_csv(os, rows);
  return os.str();
}

std::string fitted_csv(const std::vector<std::pair<int, double>>& fitted) {
  std::vector<TidyRow> rows;
  for (const auto& [age, q] : fitted) rows.push_back({age, std::nullopt, "qx", q});
  std::ostringstream os;
  write_tidy_csv(os, rows);
  return os.str();
}

std::string intervals_csv(const std::vector<QxInterval>& iv) {
  std::vector<TidyRow> rows;
  for (const auto& r : iv) {
    rows.push_back({r.age, std::nullopt, "qx_lower", r.lower});
    rows.push_back({r.age, std::nullopt, "qx_upper", r.upper});
  }
  std::ostringstream os;
  write_tidy_csv(os, rows);
  return os.str();
}

std::string surface_csv(const BLCSurface& s) {
  std::vector<TidyRow> rows;
  for (std::size_t i = 0; i < s.ages.size(); ++i) {
    for (std::size_t t = 0; t < s.years.size(); ++t) {
      const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(t);
      rows.push_back({s.ages[i], s.years[t], "mean", s.mean(r, c)});
      rows.push_back({s.ages[i], s.years[t], "lower", s.lower(r, c)});
      rows.push_back({s.ages[i], s.years[t], "upper", s.upper(r, c)});
    }
  }
  std::ostringstream os;
  write_tidy_csv(os, rows);
  return os.str();
}

std::string blc_expectancy_csv(const BLCExpectancy& e) {
  std::vector<TidyRow> rows;
  for (std::size_t i = 0; i < e.ages.size(); ++i) {
    for (std::size_t t = 0; t < e.years.size(); ++t) {
      const auto r = static_cast<Eigen::Index>(i), c = static_cast<Eigen::Index>(t);
      rows.push_back({e.ages[i], e.years[t], "expectancy", e.point(r, c)});
      rows.push_back({e.ages[i], e.years[t], "lower", e.lower(r, c)});
      rows.push_back({e.ages[i], e.years[t], "upper", e.upper(r, c)});
    }
  }
  std::ostringstream os;
  write_tidy_csv(os, rows);
  return os.str();
}

std::string heatmap_csv(const std::vector<HeatmapCell>& cells) {
  std::ostringstream os;
  write_heatmap_csv(os, cells);
  return os.str();
}

// ---- subcommands ----

int cmd_fit_hp(const Options& o, std::ostream& out) {
  check_emit(o, {"summary", "fitted", "intervals", "expectancy", "heatmap"});
  const MortalityData data = load_mortality_csv(dataset(o));
  HPConfig cfg;
  cfg.model = parse_observation_model(o.model);
  if (o.iterations) cfg.iterations = *o.iterations;
  cfg.burn_in = o.burn_in;
  if (o.thin) cfg.thin = *o.thin;
  cfg.reduced_model = o.reduced;
  const std::uint64_t seed = resolve_seed(o);
  cfg.seed = seed;
  cfg.validate();

  auto chains = run_chains<HPFit>(o.chains, seed, [&](std::uint64_t s) {
    HPConfig c = cfg;
    c.seed = s;
    return fit_hp(data, c);
  });
  HPFit fit = std::move(chains.front());
  double acc = fit.acceptance_rate;
  for (std::size_t c = 1; c < chains.size(); ++c) {
    fit.samples.insert(fit.samples.end(), chains[c].samples.begin(), chains[c].samples.end());
    acc += chains[c].acceptance_rate;
  }
  fit.acceptance_rate = acc / static_cast<double>(chains.size());

  if (!o.out.empty()) write_text_file(o.out, to_json(fit, !o.summary_only).dump(1) + "\n");
  Rng rng(seed);
  if (emits(o, "summary")) {
    print_summary(out, hp_summary(fit));
    out << "acceptance rate: " << fmt(fit.acceptance_rate) << '\n';
  }
  if (emits(o, "fitted")) out << fitted_csv(hp_fitted(fit, data.ages));
  if (emits(o, "intervals")) out << intervals_csv(hp_qx_interval(fit, data.ages, std::nullopt, o.prob, rng));
  if (emits(o, "expectancy") || emits(o, "heatmap")) {
    const ExpectancyTable e = hp_expectancy(fit, at_ages(o, data.ages), o.max_age.value_or(110), o.prob);
    if (emits(o, "expectancy")) out << expectancy_csv(e);
    if (emits(o, "heatmap")) {
      const std::vector<ExpectancyTable> tables{e};
      const std::vector<std::string> labels{o.labels.empty() ? std::string("fit") : o.labels.front()};
      out << heatmap_csv(heatmap_grid(tables, labels));
    }
  }
  return 0;
}

int cmd_fit_dlm(const Options& o, std::ostream& out) {
  check_emit(o, {"summary", "fitted", "intervals", "expectancy", "heatmap", "forecast"});
  const MortalityData data = load_mortality_csv(dataset(o));
  DLMConfig cfg;
  cfg.delta = o.delta;
  if (o.iterations) cfg.iterations = *o.iterations;
  if (o.burn_in) cfg.burn_in = *o.burn_in;
  if (o.thin) cfg.thin = *o.thin;
  const std::uint64_t seed = resolve_seed(o);
  cfg.seed = seed;
  cfg.ages = data.ages;
  cfg.validate();
  const std::vector<double> y = data.log_rates();

  auto chains = run_chains<DLMFit>(o.chains, seed, [&](std::uint64_t s) {
    DLMConfig c = cfg;
    c.seed = s;
    return fit_dlm(y, c);
  });
  DLMFit fit = std::move(chains.front());
  for (std::size_t c = 1; c < chains.size(); ++c) {
    auto& other = chains[c];
    fit.states.insert(fit.states.end(), other.states.begin(), other.states.end());
    fit.V_samples.insert(fit.V_samples.end(), other.V_samples.begin(), other.V_samples.end());
    fit.W_last.insert(fit.W_last.end(), other.W_last.begin(), other.W_last.end());
  }

  if (!o.out.empty()) write_text_file(o.out, to_json(fit, !o.summary_only).dump(1) + "\n");
  Rng rng(seed);
  if (emits(o, "summary")) print_summary(out, dlm_summary(fit));
  if (emits(o, "fitted")) out << fitted_csv(dlm_fitted(fit, data.ages));
  if (emits(o, "intervals")) out << intervals_csv(dlm_qx_interval(fit, data.ages, o.prob, rng));
  if (emits(o, "expectancy") || emits(o, "heatmap")) {
    const ExpectancyTable e = dlm_expectancy(fit, at_ages(o, data.ages), o.max_age.value_or(110), o.prob);
    if (emits(o, "expectancy")) out << expectancy_csv(e);
    if (emits(o, "heatmap")) {
      const std::vector<ExpectancyTable> tables{e};
      const std::vector<std::string> labels{o.labels.empty() ? std::string("fit") : o.labels.front()};
      out << heatmap_csv(heatmap_grid(tables, labels));
    }
  }
  if (emits(o, "forecast")) {
    const DLMForecast fc = dlm_predict(fit, o.h, o.prob, rng);
    out << "age,qx_fitted,qx_lower,qx_upper\n";
    for (std::size_t i = 0; i < fc.ages.size(); ++i) {
      out << fc.ages[i] << ',' << format_real(fc.qx_fitted[i]) << ',' << format_real(fc.qx_lower[i]) << ','
          << format_real(fc.qx_upper[i]) << '\n';
    }
  }
  return 0;
}

int cmd_fit_blc(const Options& o, std::ostream& out) {
  check_emit(o, {"summary", "fitted", "improvement", "expectancy", "heatmap", "forecast"});
  const LogMortalityMatrix Y = load_log_mortality_matrix(dataset(o));
  BLCConfig cfg;
  if (o.iterations) cfg.numit = *o.iterations;
  if (o.burn_in) cfg.warmup = *o.burn_in;
  const std::uint64_t seed = resolve_seed(o);
  cfg.seed = seed;
  cfg.validate();

  auto chains = run_chains<BLCFit>(o.chains, seed, [&](std::uint64_t s) {
    BLCConfig c = cfg;
    c.seed = s;
    return fit_blc(Y, c);
  });
  BLCFit fit = std::move(chains.front());
  if (chains.size() > 1) {
    auto stack = [&](auto member) {
      Eigen::Index rows = 0;
      for (const auto& c : chains) rows += (c.*member).rows();
      std::decay_t<decltype(fit.*member)> m(rows, (fit.*member).cols());
      Eigen::Index r = 0;
      for (const auto& c : chains) {
        m.middleRows(r, (c.*member).rows()) = c.*member;
        r += (c.*member).rows();
      }
      return m;
    };
    auto stack_vec = [&](Eigen::VectorXd BLCFit::*member) {
      Eigen::Index n = 0;
      for (const auto& c : chains) n += (c.*member).size();
      Eigen::VectorXd v(n);
      Eigen::Index r = 0;
      for (const auto& c : chains) {
        v.segment(r, (c.*member).size()) = c.*member;
        r += (c.*member).size();
      }
      return v;
    };
    BLCFit merged;
    merged.data = fit.data;
    merged.alpha = stack(&BLCFit::alpha);
    merged.beta = stack(&BLCFit::beta);
    merged.kappa = stack(&BLCFit::kappa);
    merged.theta = stack_vec(&BLCFit::theta);
    merged.sig2_eps = stack_vec(&BLCFit::sig2_eps);
    merged.sig2_omega = stack_vec(&BLCFit::sig2_omega);
    fit = std::move(merged);
  }

  if (!o.out.empty()) write_text_file(o.out, to_json(fit, !o.summary_only).dump(1) + "\n");
  Rng rng(seed);
  const std::vector<int> at = at_ages(o, Y.ages);
  if (emits(o, "summary")) print_summary(out, blc_summary(fit));
  if (emits(o, "fitted")) out << surface_csv(blc_fitted(fit, o.prob));
  if (emits(o, "improvement")) {
    std::vector<TidyRow> rows;
    for (const auto& r : blc_improvement(fit, o.prob)) {
      rows.push_back({r.age, std::nullopt, "improvement", r.improvement});
      rows.push_back({r.age, std::nullopt, "lower", r.lower});
      rows.push_back({r.age, std::nullopt, "upper", r.upper});
    }
    write_tidy_csv(out, rows);
  }
  if (emits(o, "expectancy")) out << blc_expectancy_csv(blc_expectancy(fit, at, o.prob));
  if (emits(o, "heatmap")) out << heatmap_csv(heatmap_grid(blc_expectancy(fit, at, o.prob)));
  if (emits(o, "forecast")) out << surface_csv(blc_forecast_summary(blc_predict(fit, o.h, rng), o.prob));
  return 0;
}

int cmd_close(const Options& o, std::ostream& out) {
  check_emit(o, {"expectancy", "fitted"});
  if (o.fits.size() != 1) throw ConfigError("close needs exactly one --fit");
  const Json doc = read_json_file(o.fits.front());
  const std::string kind = document_kind(doc);
  ClosureConfig cfg;
  cfg.method = parse_closing_method(o.method);
  cfg.x0 = o.x0;
  if (o.max_age) cfg.max_age = *o.max_age;
  cfg.k = o.k;
  cfg.sir_proposals = o.sir_proposals;
  const std::uint64_t seed = resolve_seed(o);
  Rng rng(seed);

  std::optional<MortalityData> extra;
  if (!o.in.empty()) {
    DatasetSpec spec = dataset(o);
    if (!o.new_ages.empty()) spec.ages = parse_range(o.new_ages);
    extra = load_mortality_csv(spec);
    cfg.new_data_first_age = extra->first_age();
  }

  ClosedTable table;
  if (kind == "hp") {
    const HPFit fit = hp_fit_from_json(doc);
    if (extra) {
      cfg.new_exposures = extra->exposures;
      cfg.new_deaths = extra->deaths;
    }
    table = close_table(fit, cfg, rng);
  } else if (kind == "dlm") {
    const DLMFit fit = dlm_fit_from_json(doc);
    if (extra) cfg.new_log_rates = extra->log_rates();
    table = close_table(fit, cfg, rng);
  } else {
    throw ConfigError("close accepts HP or DLM fits, not '" + kind + "'");
  }

  if (!o.out.empty()) write_text_file(o.out, to_json(table).dump(1) + "\n");
  if (emits(o, "fitted")) {
    const Eigen::VectorXd med = column_quantile(table.qx, 0.5);
    std::vector<std::pair<int, double>> fitted;
    for (std::size_t j = 0; j < table.ages.size(); ++j) fitted.emplace_back(table.ages[j], med(static_cast<Eigen::Index>(j)));
    out << fitted_csv(fitted);
  }
  if (emits(o, "expectancy")) out << expectancy_csv(closed_expectancy(table, at_ages(o, {table.ages.front()}), o.prob));
  return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
  if (o.fits.size() != 1) throw ConfigError("predict needs exactly one --fit");
  const Json doc = read_json_file(o.fits.front());
  const std::string kind = document_kind(doc);
  Rng rng(resolve_seed(o));
  std::ostringstream os;
  if (kind == "dlm") {
    const DLMForecast fc = dlm_predict(dlm_fit_from_json(doc), o.h, o.prob, rng);
    os << "age,qx_fitted,qx_lower,qx_upper\n";
    for (std::size_t i = 0; i < fc.ages.size(); ++i) {
      os << fc.ages[i] << ',' << format_real(fc.qx_fitted[i]) << ',' << format_real(fc.qx_lower[i]) << ','
         << format_real(fc.qx_upper[i]) << '\n';
    }
  } else if (kind == "blc") {
    const BLCFit fit = blc_fit_from_json(doc);
    os << surface_csv(blc_forecast_summary(blc_predict(fit, o.h, rng), o.prob));
  } else {
    throw ConfigError("predict accepts DLM or Lee-Carter fits, not '" + kind + "'");
  }
  deliver(o, out, os.str());
  return 0;
}

// Expectancy table of any single-table document (hp, dlm, closed).
ExpectancyTable document_expectancy(const Json& doc, const Options& o) {
  const std::string kind = document_kind(doc);
  const int max_age = o.max_age.value_or(110);
  if (kind == "hp") {
    const HPFit fit = hp_fit_from_json(doc);
    return hp_expectancy(fit, at_ages(o, fit.data.ages), max_age, o.prob);
  }
  if (kind == "dlm") {
    const DLMFit fit = dlm_fit_from_json(doc);
    return dlm_expectancy(fit, at_ages(o, fit.ages()), max_age, o.prob);
  }
  if (kind == "closed") {
    const ClosedTable t = closed_table_from_json(doc);
    return closed_expectancy(t, at_ages(o, {t.ages.front()}), o.prob);
  }
  throw ConfigError("no single expectancy table for a '" + kind + "' document");
}

int cmd_expectancy(const Options& o, std::ostream& out) {
  if (o.fits.size() != 1) throw ConfigError("expectancy needs exactly one --fit");
  const Json doc = read_json_file(o.fits.front());
  if (document_kind(doc) == "blc") {
    const BLCFit fit = blc_fit_from_json(doc);
    const std::vector<int> at = at_ages(o, fit.data.ages);
    if (o.h > 0 && emits(o, "forecast")) {
      Rng rng(resolve_seed(o));
      deliver(o, out, blc_expectancy_csv(blc_expectancy(blc_predict(fit, o.h, rng), at, o.prob)));
    } else {
      deliver(o, out, blc_expectancy_csv(blc_expectancy(fit, at, o.prob)));
    }
    return 0;
  }
  deliver(o, out, expectancy_csv(document_expectancy(doc, o)));
  return 0;
}

int cmd_heatmap(const Options& o, std::ostream& out) {
  if (o.fits.empty()) throw ConfigError("heatmap needs at least one --fit");
  Options opt = o;
  if (!o.ages.empty() && o.at.empty()) {
    const auto [lo, hi] = parse_range(o.ages);
    for (int a = lo; a <= hi; ++a) opt.at.push_back(a);
  }
  if (o.fits.size() == 1) {
    const Json doc = read_json_file(o.fits.front());
    if (document_kind(doc) == "blc") {
      const BLCFit fit = blc_fit_from_json(doc);
      const std::vector<int> at = at_ages(opt, fit.data.ages);
      if (emits(o, "forecast")) {
        Rng rng(resolve_seed(o));
        deliver(o, out, heatmap_csv(heatmap_grid(blc_expectancy(blc_predict(fit, o.h, rng), at, o.prob))));
      } else {
        deliver(o, out, heatmap_csv(heatmap_grid(blc_expectancy(fit, at, o.prob))));
      }
      return 0;
    }
  }
  std::vector<ExpectancyTable> tables;
  for (const auto& path : o.fits) tables.push_back(document_expectancy(read_json_file(path), opt));
  std::vector<std::string> labels = o.labels;
  if (labels.empty()) labels = o.fits;
  deliver(o, out, heatmap_csv(heatmap_grid(tables, labels)));
  return 0;
}

int cmd_summary(const Options& o, std::ostream& out) {
  if (o.fits.size() != 1) throw ConfigError("summary needs exactly one --fit");
  const Json doc = read_json_file(o.fits.front());
  const std::string kind = document_kind(doc);
  if (kind == "closed") throw ConfigError("closed tables carry no parameter summary");
  print_summary(out, summary_from_json(doc));
  if (doc.contains("acceptance_rate")) out << "acceptance rate: " << fmt(doc.at("acceptance_rate").get<double>()) << '\n';
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian graduation of mortality tables", "graduate"};
  // --h is the forecast horizon, so help is long-form only
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  Options o;

  auto data_opts = [&](CLI::App* c) {
    c->add_option("--in", o.in, "CSV with Year, Age, Ex.<series>, Dx.<series> columns");
    c->add_option("--year", o.year, "Year to select");
    c->add_option("--ages", o.ages, "Inclusive age range a:b");
    c->add_option("--series", o.series, "Total, Male or Female");
  };
  auto run_opts = [&](CLI::App* c) {
    c->add_option("--iterations", o.iterations, "MCMC iterations");
    c->add_option("--burn-in", o.burn_in, "Iterations discarded");
    c->add_option("--seed", o.seed, "Random seed (fallback: GRADUATE_SEED)");
    c->add_option("--chains", o.chains, "Independent chains, run concurrently");
    c->add_flag("--summary-only", o.summary_only, "Store summaries without sample matrices");
    c->add_option("--emit", o.emit, "Outputs to print")->delimiter(',');
    c->add_option("--out", o.out, "Fit JSON path");
    c->add_option("--prob", o.prob, "Credible level");
    c->add_option("--at", o.at, "Ages for expectancy")->delimiter(',');
    c->add_option("--max-age", o.max_age, "Last age for expectancy");
    c->add_option("--labels", o.labels, "Heat-map label")->delimiter(',');
  };

  CLI::App* fit_hp_cmd = app.add_subcommand("fit-hp", "Fit a Heligman-Pollard curve");
  data_opts(fit_hp_cmd);
  run_opts(fit_hp_cmd);
  fit_hp_cmd->add_option("--model", o.model, "lognormal, binomial or poisson");
  fit_hp_cmd->add_option("--thin", o.thin, "Thinning interval");
  fit_hp_cmd->add_flag("--reduced", o.reduced, "Drop the infant term");

  CLI::App* fit_dlm_cmd = app.add_subcommand("fit-dlm", "Graduate with a dynamic linear model");
  data_opts(fit_dlm_cmd);
  run_opts(fit_dlm_cmd);
  fit_dlm_cmd->add_option("--delta", o.delta, "Discount factor in (0, 1]");
  fit_dlm_cmd->add_option("--thin", o.thin, "Thinning interval");
  fit_dlm_cmd->add_option("--h", o.h, "Forecast steps for --emit forecast");

  CLI::App* fit_blc_cmd = app.add_subcommand("fit-blc", "Fit a Bayesian Lee-Carter model");
  data_opts(fit_blc_cmd);
  run_opts(fit_blc_cmd);
  fit_blc_cmd->add_option("--years", o.years, "Inclusive year range a:b");
  fit_blc_cmd->add_option("--h", o.h, "Forecast years for --emit forecast");

  CLI::App* close_cmd = app.add_subcommand("close", "Close a fitted table at advanced ages");
  data_opts(close_cmd);
  close_cmd->add_option("--fit", o.fits, "HP or DLM fit JSON")->expected(1);
  close_cmd->add_option("--method", o.method, "hp, plateau, linear or gompertz");
  close_cmd->add_option("--max-age", o.max_age, "Last age of the closed table");
  close_cmd->add_option("--k", o.k, "Half-width of the blending window");
  close_cmd->add_option("--x0", o.x0, "Centre of the blending window");
  close_cmd->add_option("--new-ages", o.new_ages, "Ages of the new data a:b");
  close_cmd->add_option("--sir-proposals", o.sir_proposals, "Gompertz SIR proposals");
  close_cmd->add_option("--seed", o.seed, "Random seed (fallback: GRADUATE_SEED)");
  close_cmd->add_option("--out", o.out, "Closed table JSON path");
  close_cmd->add_option("--emit", o.emit, "fitted, expectancy")->delimiter(',');
  close_cmd->add_option("--at", o.at, "Ages for expectancy")->delimiter(',');
  close_cmd->add_option("--prob", o.prob, "Credible level");

  CLI::App* predict_cmd = app.add_subcommand("predict", "Forecast from a DLM or Lee-Carter fit");
  predict_cmd->add_option("--fit", o.fits, "Fit JSON")->expected(1)->required();
  predict_cmd->add_option("--h", o.h, "Forecast horizon")->required();
  predict_cmd->add_option("--prob", o.prob, "Credible level");
  predict_cmd->add_option("--seed", o.seed, "Random seed (fallback: GRADUATE_SEED)");
  predict_cmd->add_option("--out", o.out, "CSV path (default stdout)");

  CLI::App* exp_cmd = app.add_subcommand("expectancy", "Life expectancy with credible intervals");
  exp_cmd->add_option("--fit", o.fits, "Fit or closed-table JSON")->expected(1)->required();
  exp_cmd->add_option("--at", o.at, "Ages")->delimiter(',');
  exp_cmd->add_option("--max-age", o.max_age, "Extrapolate HP/DLM fits to this age");
  exp_cmd->add_option("--prob", o.prob, "Credible level");
  exp_cmd->add_option("--h", o.h, "Lee-Carter forecast years (with --emit forecast)");
  exp_cmd->add_option("--emit", o.emit, "forecast: use the Lee-Carter forecast")->delimiter(',');
  exp_cmd->add_option("--seed", o.seed, "Random seed (fallback: GRADUATE_SEED)");
  exp_cmd->add_option("--out", o.out, "CSV path (default stdout)");

  CLI::App* heat_cmd = app.add_subcommand("heatmap", "Expectancy grid for plotting");
  heat_cmd->add_option("--fit", o.fits, "Fit JSON files")->required();
  heat_cmd->add_option("--labels", o.labels, "Column labels")->delimiter(',');
  heat_cmd->add_option("--ages", o.ages, "Age range a:b");
  heat_cmd->add_option("--at", o.at, "Ages")->delimiter(',');
  heat_cmd->add_option("--max-age", o.max_age, "Extrapolate HP/DLM fits to this age");
  heat_cmd->add_option("--prob", o.prob, "Credible level");
  heat_cmd->add_option("--h", o.h, "Lee-Carter forecast years (with --emit forecast)");
  heat_cmd->add_option("--emit", o.emit, "forecast: use the Lee-Carter forecast")->delimiter(',');
  heat_cmd->add_option("--seed", o.seed, "Random seed (fallback: GRADUATE_SEED)");
  heat_cmd->add_option("--out", o.out, "CSV path (default stdout)");

  CLI::App* summary_cmd = app.add_subcommand("summary", "Print the stored parameter summary");
  summary_cmd->add_option("--fit", o.fits, "Fit JSON")->expected(1)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit_hp_cmd->parsed() && o.emit.empty()) o.emit = {"summary"};
    if (fit_dlm_cmd->parsed() && o.emit.empty()) o.emit = {"summary"};
    if (fit_blc_cmd->parsed() && o.emit.empty()) o.emit = {"summary"};
    if (!(o.prob > 0.0 && o.prob <= 1.0)) throw ConfigError("--prob must lie in (0, 1]");
    if (fit_hp_cmd->parsed()) return cmd_fit_hp(o, out);
    if (fit_dlm_cmd->parsed()) return cmd_fit_dlm(o, out);
    if (fit_blc_cmd->parsed()) return cmd_fit_blc(o, out);
    if (close_cmd->parsed()) return cmd_close(o, out);
    if (predict_cmd->parsed()) return cmd_predict(o, out);
    if (exp_cmd->parsed()) return cmd_expectancy(o, out);
    if (heat_cmd->parsed()) return cmd_heatmap(o, out);
    if (summary_cmd->parsed()) return cmd_summary(o, out);
  } catch (const std::invalid_argument& e) {  // ConfigError
    err << "graduate: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "graduate: numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "graduate: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    err << "graduate: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "graduate: malformed fit document: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "graduate: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace graduate
