#include "graduate/hp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "graduate/errors.hpp"

namespace graduate {

namespace {

constexpr double kQxCeiling = 1.0 - 1e-12;
constexpr double kDefaultPriorVariance = 100.0;
constexpr double kDefaultStep = 0.05;
constexpr int kAdaptBatch = 50;

double logit(double p) { return std::log(p / (1.0 - p)); }
double inv_logit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool unit_interval_slot(int slot) {
  return slot == kA || slot == kB || slot == kC || slot == kD || slot == kG;
}

double to_unconstrained(int slot, double value) {
  if (unit_interval_slot(slot)) return logit(value);
  if (slot == kF) return logit((value - 15.0) / 95.0);
  return std::log(value);  // E, H, K
}

double from_unconstrained(int slot, double z) {
  if (unit_interval_slot(slot)) return inv_logit(z);
  if (slot == kF) return 15.0 + 95.0 * inv_logit(z);
  return std::exp(z);
}

double infant_term(const HPParams& p, double x) {
  if (p.reduced()) return 0.0;
  return std::exp(std::log(*p.A) * std::pow(x + *p.B, *p.C));
}

double hump_term(const HPParams& p, double x) {
  if (x <= 0.0) return 0.0;
  const double l = std::log(x / p.F);
  return p.D * std::exp(-p.E * l * l);
}

double senescent_term(const HPParams& p, double x) { return p.G * std::exp(x * std::log(p.H)); }

std::array<double, kHPSlots> to_slots(const HPParams& p) {
  std::array<double, kHPSlots> v{};
  v[kA] = p.A.value_or(0.0);
  v[kB] = p.B.value_or(0.0);
  v[kC] = p.C.value_or(0.0);
  v[kD] = p.D;
  v[kE] = p.E;
  v[kF] = p.F;
  v[kG] = p.G;
  v[kH] = p.H;
  v[kK] = p.K.value_or(0.0);
  return v;
}

// Natural-scale parameters from the unconstrained vector; sigma2 is carried
// separately by the sampler.
HPParams from_state(const std::array<double, kHPSlots>& z, bool reduced, bool with_k) {
  HPParams p;
  if (!reduced) {
    p.A = from_unconstrained(kA, z[kA]);
    p.B = from_unconstrained(kB, z[kB]);
    p.C = from_unconstrained(kC, z[kC]);
  }
  p.D = from_unconstrained(kD, z[kD]);
  p.E = from_unconstrained(kE, z[kE]);
  p.F = from_unconstrained(kF, z[kF]);
  p.G = from_unconstrained(kG, z[kG]);
  p.H = from_unconstrained(kH, z[kH]);
  if (with_k) p.K = from_unconstrained(kK, z[kK]);
  return p;
}

double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

std::vector<double> raw_log_odds(const MortalityData& data) {
  std::vector<double> out(data.size());
  std::vector<int> bad;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data.exposures[i] > 0.0) || !(data.deaths[i] > 0.0)) {
      bad.push_back(data.ages[i]);
      continue;
    }
    const double q = mx_to_qx(data.deaths[i] / data.exposures[i]);
    out[i] = std::log(q / (1.0 - q));
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "lognormal model needs positive deaths and exposures; zero at age(s) ";
    for (std::size_t i = 0; i < bad.size(); ++i) os << (i ? ", " : "") << bad[i];
    os << "; restrict the age range";
    throw DataError(os.str());
  }
  return out;
}

}  // namespace

const char* hp_param_name(int slot) {
  static constexpr const char* names[] = {"A", "B", "C", "D", "E", "F", "G", "H", "K"};
  return (slot >= 0 && slot < kHPSlots) ? names[slot] : "?";
}

void HPParams::validate() const {
  auto unit = [](const char* name, double v) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError(std::string("HP parameter ") + name + " must lie in (0, 1)");
  };
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string("HP parameter ") + name + " must be positive");
  };
  if (A.has_value() != B.has_value() || A.has_value() != C.has_value()) {
    throw DomainError("HP parameters A, B, C must be all present or all absent");
  }
  if (A) {
    unit("A", *A);
    unit("B", *B);
    unit("C", *C);
  }
  unit("D", D);
  positive("E", E);
  if (!(F > 15.0 && F < 110.0)) throw DomainError("HP parameter F must lie in (15, 110)");
  unit("G", G);
  positive("H", H);
  // any K with 1 + K G H^x > 0 is a valid curve; that is checked where it is evaluated
  if (K && !std::isfinite(*K)) throw DomainError("HP parameter K must be finite");
  if (sigma2) positive("sigma2", *sigma2);
}

void HPConfig::validate() const {
  if (iterations <= 0) throw ConfigError("iterations must be positive");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  const int bn = effective_burn_in();
  if (bn < 0 || bn >= iterations) throw ConfigError("burn-in must satisfy 0 <= burn_in < iterations");
  for (const auto& v : prior_variances) {
    if (v && !(*v > 0.0)) throw ConfigError("prior variances must be positive");
  }
  if (proposal_scales) {
    if (proposal_scales->size() != 8 && proposal_scales->size() != kHPSlots) {
      throw ConfigError("proposal_scales needs 8 (A..H) or 9 (A..H, K) entries");
    }
    for (double s : *proposal_scales) {
      if (!(s > 0.0)) throw ConfigError("proposal scales must be positive");
    }
  }
  if (!(sigma2_shape > 0.0) || !(sigma2_scale > 0.0)) {
    throw ConfigError("sigma2 prior parameters must be positive");
  }
}

std::array<double, 3> hp_components(const HPParams& p, double x) {
  return {infant_term(p, x), hump_term(p, x), senescent_term(p, x)};
}

double hp_logodds_curve(const HPParams& p, double x) {
  if (!(x >= 0.0)) throw DomainError("HP curve: age must be non-negative");
  p.validate();
  return infant_term(p, x) + hump_term(p, x) + senescent_term(p, x);
}

double hp_qx_curve(const HPParams& p, double x) {
  if (!(x >= 0.0)) throw DomainError("HP curve: age must be non-negative");
  if (!p.K) throw DomainError("HP count-model curve needs K");
  p.validate();
  const double gh = senescent_term(p, x);
  const double denom = 1.0 + *p.K * gh;
  if (!(denom > 0.0)) throw DomainError("HP curve: 1 + K G H^x is not positive");
  const double q = infant_term(p, x) + hump_term(p, x) + gh / denom;
  return std::clamp(q, 0.0, kQxCeiling);
}

double hp_curve(ObservationModel model, const HPParams& p, double x) {
  return model == ObservationModel::lognormal ? hp_logodds_curve(p, x) : hp_qx_curve(p, x);
}

double hp_curve_to_qx(ObservationModel model, double curve_value) {
  if (model == ObservationModel::lognormal) return curve_value / (1.0 + curve_value);
  return mx_to_qx(std::max(curve_value, 0.0));
}

double hp_loglikelihood_curve(ObservationModel model, const MortalityData& data,
                              std::span<const double> curve, double sigma2) {
  if (curve.size() != data.size()) throw DataError("likelihood: curve length does not match data");
  double ll = 0.0;
  switch (model) {
    case ObservationModel::lognormal: {
      if (!(sigma2 > 0.0)) throw DomainError("lognormal likelihood needs sigma2 > 0");
      const std::vector<double> y = raw_log_odds(data);
      const double norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(curve[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        const double r = y[i] - std::log(curve[i]);
        ll += norm - y[i] - 0.5 * r * r / sigma2;
      }
      break;
    }
    case ObservationModel::binomial: {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double n = std::round(data.exposures[i]);
        const double d = data.deaths[i];
        const double q = curve[i];
        if (d > n || q < 0.0 || q > 1.0) return -std::numeric_limits<double>::infinity();
        ll += std::lgamma(n + 1.0) - std::lgamma(d + 1.0) - std::lgamma(n - d + 1.0) + xlogy(d, q) +
              xlogy(n - d, 1.0 - q);
      }
      break;
    }
    case ObservationModel::poisson: {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double lambda = data.exposures[i] * curve[i];
        const double d = data.deaths[i];
        if (lambda < 0.0) return -std::numeric_limits<double>::infinity();
        ll += xlogy(d, lambda) - lambda - std::lgamma(d + 1.0);
      }
      break;
    }
  }
  return std::isnan(ll) ? -std::numeric_limits<double>::infinity() : ll;
}

double hp_loglikelihood(ObservationModel model, const MortalityData& data, const HPParams& p) {
  data.validate();
  p.validate();
  std::vector<double> curve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) curve[i] = hp_curve(model, p, data.ages[i]);
  double sigma2 = 0.0;
  if (model == ObservationModel::lognormal) {
    if (!p.sigma2) throw DomainError("lognormal likelihood needs sigma2");
    sigma2 = *p.sigma2;
  }
  return hp_loglikelihood_curve(model, data, curve, sigma2);
}

HPParams hp_initial_values(ObservationModel model, const MortalityData& data, bool reduced) {
  data.validate();
  // Heuristic targets on the curve's own scale: odds for lognormal, the raw
  // central rate for count models.
  std::vector<double> ages, target;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data.exposures[i] > 0.0) || !(data.deaths[i] > 0.0)) continue;
    const double m = data.deaths[i] / data.exposures[i];
    double t = m;
    if (model == ObservationModel::lognormal) {
      const double q = mx_to_qx(m);
      t = q / (1.0 - q);
    }
    ages.push_back(data.ages[i]);
    target.push_back(t);
  }
  if (ages.size() < 3) throw DataError("too few ages with positive deaths to initialise the HP curve");

  HPParams p;
  auto clamp_unit = [](double v, double lo, double hi) { return std::clamp(v, lo, hi); };

  // Senescent term from a log-linear fit over the older ages.
  std::vector<std::size_t> old;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (ages[i] >= 50.0) old.push_back(i);
  }
  if (old.size() < 3) {
    old.clear();
    for (std::size_t i = ages.size() - std::max<std::size_t>(3, ages.size() / 3); i < ages.size(); ++i) old.push_back(i);
  }
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(old.size());
    for (std::size_t i : old) {
      const double x = ages[i], y = std::log(target[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    p.H = std::clamp(std::exp(slope), 1.001, 1.5);
    p.G = clamp_unit(std::exp(intercept), 1e-9, 0.5);
  }

  const bool has_infant = !reduced && ages.front() <= 10.0;
  if (!reduced) {
    p.B = 0.01;
    p.C = 0.1;
    double a = 1e-3;
    if (has_infant) {
      const double x0 = ages.front();
      const double t0 = std::max(target.front() - senescent_term(p, x0), 1e-8);
      a = std::exp(std::log(t0) / std::pow(x0 + *p.B, *p.C));
    }
    p.A = clamp_unit(a, 1e-8, 0.5);
  }

  // Accident hump from the residual over young adult ages.
  double best = -1.0, best_age = 25.0;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (ages[i] < 10.0 || ages[i] > 40.0) continue;
    const double r = target[i] - infant_term(p, ages[i]) - senescent_term(p, ages[i]);
    if (r > best) {
      best = r;
      best_age = ages[i];
    }
  }
  p.D = clamp_unit(best, 1e-5, 0.5);
  p.E = 10.0;
  p.F = std::clamp(best_age, 16.0, 109.0);

  if (model != ObservationModel::lognormal) {
    p.K = 1.0;
  } else {
    double ss = 0.0;
    for (std::size_t i = 0; i < ages.size(); ++i) {
      const double f = infant_term(p, ages[i]) + hump_term(p, ages[i]) + senescent_term(p, ages[i]);
      const double r = std::log(target[i]) - std::log(f);
      ss += r * r;
    }
    p.sigma2 = std::max(ss / static_cast<double>(ages.size()), 1e-4);
  }
  return p;
}

HPFit fit_hp(const MortalityData& data, const HPConfig& config) {
  data.validate();
  config.validate();
  const ObservationModel model = config.model;
  const bool reduced = config.reduced_model;
  const bool lognormal = model == ObservationModel::lognormal;
  const bool with_k = !lognormal;

  std::vector<int> active;
  for (int s = reduced ? kD : kA; s <= kH; ++s) active.push_back(s);
  if (with_k) active.push_back(kK);

  HPParams init = config.inits ? *config.inits : hp_initial_values(model, data, reduced);
  if (reduced) {
    init.A.reset();
    init.B.reset();
    init.C.reset();
  } else if (!init.A) {
    throw ConfigError("inits lack A, B, C but reduced_model is false");
  }
  if (with_k && !init.K) init.K = 1.0;
  if (!with_k) init.K.reset();
  if (lognormal && !init.sigma2) init.sigma2 = hp_initial_values(model, data, reduced).sigma2;
  if (!lognormal) init.sigma2.reset();
  init.validate();
  if (init.K && !(*init.K > 0.0)) throw ConfigError("initial K must be positive (it is sampled on the log scale)");

  std::vector<double> log_odds;
  if (lognormal) log_odds = raw_log_odds(data);

  std::array<double, kHPSlots> z{};
  {
    const auto v = to_slots(init);
    for (int s : active) z[s] = to_unconstrained(s, v[s]);
  }

  std::array<double, kHPSlots> prior_mean{};
  std::array<double, kHPSlots> prior_var{};
  for (int s = 0; s < kHPSlots; ++s) {
    prior_mean[s] = 0.0;
    prior_var[s] = kDefaultPriorVariance;
    if (s < 8) {
      if (config.prior_means[s]) prior_mean[s] = to_unconstrained(s, *config.prior_means[s]);
      if (config.prior_variances[s]) prior_var[s] = *config.prior_variances[s];
    }
  }

  std::array<double, kHPSlots> log_step{};
  for (int s = 0; s < kHPSlots; ++s) {
    double step = kDefaultStep;
    if (config.proposal_scales && static_cast<std::size_t>(s) < config.proposal_scales->size()) {
      step = (*config.proposal_scales)[s];
    }
    log_step[s] = std::log(step);
  }

  const std::size_t n = data.size();
  std::vector<double> curve(n);
  double sigma2 = lognormal ? *init.sigma2 : 0.0;

  auto evaluate_curve = [&](const HPParams& p) -> bool {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = data.ages[i];
      double c;
      if (lognormal) {
        c = infant_term(p, x) + hump_term(p, x) + senescent_term(p, x);
      } else {
        const double gh = senescent_term(p, x);
        const double denom = 1.0 + *p.K * gh;
        if (!(denom > 0.0)) return false;
        c = infant_term(p, x) + hump_term(p, x) + gh / denom;
        if (model == ObservationModel::binomial && c >= 1.0) return false;
      }
      if (!std::isfinite(c) || !(c > 0.0)) return false;
      curve[i] = c;
    }
    return true;
  };

  // Lognormal: sum of squared log residuals suffices given sigma2.
  auto residual_ss = [&]() {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = log_odds[i] - std::log(curve[i]);
      ss += r * r;
    }
    return ss;
  };

  auto log_target = [&](const std::array<double, kHPSlots>& state) -> double {
    const HPParams p = from_state(state, reduced, with_k);
    if (!evaluate_curve(p)) return -std::numeric_limits<double>::infinity();
    double lp = 0.0;
    for (int s : active) {
      const double d = state[s] - prior_mean[s];
      lp -= 0.5 * d * d / prior_var[s];
    }
    if (lognormal) return lp - 0.5 * residual_ss() / sigma2;
    return lp + hp_loglikelihood_curve(model, data, curve, 0.0);
  };

  double current = log_target(z);
  if (!std::isfinite(current)) {
    std::ostringstream os;
    os << "non-finite likelihood at the initial values (";
    const auto v = to_slots(init);
    for (std::size_t i = 0; i < active.size(); ++i) {
      os << (i ? ", " : "") << hp_param_name(active[i]) << "=" << v[active[i]];
    }
    os << "); the curve is not positive or exceeds 1 at some age";
    throw NumericalError(os.str());
  }

  Rng rng(config.seed);
  const int burn_in = config.effective_burn_in();
  HPFit fit;
  fit.data = data;
  fit.config = config;
  fit.samples.reserve(static_cast<std::size_t>((config.iterations - burn_in) / config.thin));

  std::array<int, kHPSlots> batch_accept{};
  long long accepted = 0, proposed = 0;
  int batch = 0;

  for (int it = 0; it < config.iterations; ++it) {
    for (int s : active) {
      auto proposal = z;
      proposal[s] += std::exp(log_step[s]) * rnorm(rng);
      const double cand = log_target(proposal);
      const bool accept = std::log(runif(rng)) < cand - current;
      if (accept) {
        z = proposal;
        current = cand;
        ++batch_accept[s];
      }
      if (it >= burn_in) {
        ++proposed;
        if (accept) ++accepted;
      }
    }

    if (lognormal) {
      const HPParams p = from_state(z, reduced, with_k);
      evaluate_curve(p);
      const double shape = config.sigma2_shape + 0.5 * static_cast<double>(n);
      const double scale = config.sigma2_scale + 0.5 * residual_ss();
      sigma2 = rinvgamma(rng, shape, scale);
      current = log_target(z);
    }

    if (config.adapt && it < burn_in && (it + 1) % kAdaptBatch == 0) {
      ++batch;
      const double delta = std::max(0.05, 1.0 / std::sqrt(static_cast<double>(batch)));
      for (int s : active) {
        const double rate = static_cast<double>(batch_accept[s]) / kAdaptBatch;
        if (rate > 0.4) log_step[s] += delta;
        if (rate < 0.2) log_step[s] -= delta;
        batch_accept[s] = 0;
      }
    }

    if (it >= burn_in && (it - burn_in + 1) % config.thin == 0) {
      HPParams p = from_state(z, reduced, with_k);
      if (lognormal) p.sigma2 = sigma2;
      fit.samples.push_back(p);
    }
  }

  fit.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  fit.final_scales.assign(kHPSlots, 0.0);
  for (int s : active) fit.final_scales[static_cast<std::size_t>(s)] = std::exp(log_step[s]);
  return fit;
}

Eigen::MatrixXd hp_qx_draws(const HPFit& fit, std::span<const int> ages) {
  const auto draws = static_cast<Eigen::Index>(fit.samples.size());
  Eigen::MatrixXd q(draws, static_cast<Eigen::Index>(ages.size()));
  for (Eigen::Index d = 0; d < draws; ++d) {
    const HPParams& p = fit.samples[static_cast<std::size_t>(d)];
    for (std::size_t j = 0; j < ages.size(); ++j) {
      if (ages[j] < 0) throw DomainError("HP fitted: negative age");
      const double c = hp_curve(fit.model(), p, ages[j]);
      q(d, static_cast<Eigen::Index>(j)) = std::min(hp_curve_to_qx(fit.model(), c), kQxCeiling);
    }
  }
  return q;
}

std::vector<std::pair<int, double>> hp_fitted(const HPFit& fit, std::span<const int> ages) {
  if (fit.samples.empty()) throw DomainError("HP fit has no samples");
  const Eigen::VectorXd median = column_quantile(hp_qx_draws(fit, ages), 0.5);
  std::vector<std::pair<int, double>> out;
  for (std::size_t j = 0; j < ages.size(); ++j) out.emplace_back(ages[j], median(static_cast<Eigen::Index>(j)));
  return out;
}

std::vector<QxInterval> hp_qx_interval(const HPFit& fit, std::span<const int> ages,
                                       std::optional<std::span<const double>> exposures, double level,
                                       Rng& rng) {
  if (fit.samples.empty()) throw DomainError("HP fit has no samples");
  const auto draws = static_cast<Eigen::Index>(fit.samples.size());
  Eigen::MatrixXd curve(draws, static_cast<Eigen::Index>(ages.size()));
  std::vector<double> sigma2(static_cast<std::size_t>(draws), 0.0);
  for (Eigen::Index d = 0; d < draws; ++d) {
    const HPParams& p = fit.samples[static_cast<std::size_t>(d)];
    if (p.sigma2) sigma2[static_cast<std::size_t>(d)] = *p.sigma2;
    for (std::size_t j = 0; j < ages.size(); ++j) {
      curve(d, static_cast<Eigen::Index>(j)) = hp_curve(fit.model(), p, ages[j]);
    }
  }

  std::vector<double> ex;
  if (fit.model() != ObservationModel::lognormal && !exposures) {
    // Default to the fitted exposures; ages outside the data are left at 0
    // so the composition step reports them.
    ex.assign(ages.size(), 0.0);
    for (std::size_t j = 0; j < ages.size(); ++j) {
      if (auto i = fit.data.index_of(ages[j])) ex[j] = fit.data.exposures[*i];
    }
    exposures = std::span<const double>(ex);
  }
  return composition_qx_interval(fit.model(), curve, sigma2, ages, exposures, level, rng);
}

ExpectancyTable hp_expectancy(const HPFit& fit, std::span<const int> from_ages, int max_age, double level) {
  if (from_ages.empty()) throw DomainError("expectancy: no ages requested");
  const int start = *std::min_element(from_ages.begin(), from_ages.end());
  if (start < 0) throw DomainError("expectancy: negative age");
  if (max_age < *std::max_element(from_ages.begin(), from_ages.end())) {
    throw DomainError("expectancy: max_age below a requested age");
  }
  std::vector<int> table_ages;
  for (int a = start; a <= max_age; ++a) table_ages.push_back(a);
  const Eigen::MatrixXd q = hp_qx_draws(fit, table_ages);
  return expectancy_posterior(q, table_ages, from_ages, level);
}

std::vector<std::pair<std::string, PosteriorSummary>> hp_summary(const HPFit& fit) {
  std::vector<std::pair<std::string, PosteriorSummary>> out;
  if (fit.samples.empty()) return out;
  std::vector<double> col(fit.samples.size());
  auto add = [&](const std::string& name, auto getter) {
    for (std::size_t d = 0; d < fit.samples.size(); ++d) col[d] = getter(fit.samples[d]);
    out.emplace_back(name, summarize_chain(col));
  };
  if (!fit.reduced()) {
    add("A", [](const HPParams& p) { return *p.A; });
    add("B", [](const HPParams& p) { return *p.B; });
    add("C", [](const HPParams& p) { return *p.C; });
  }
  add("D", [](const HPParams& p) { return p.D; });
  add("E", [](const HPParams& p) { return p.E; });
  add("F", [](const HPParams& p) { return p.F; });
  add("G", [](const HPParams& p) { return p.G; });
  add("H", [](const HPParams& p) { return p.H; });
  if (fit.model() != ObservationModel::lognormal) add("K", [](const HPParams& p) { return *p.K; });
  if (fit.model() == ObservationModel::lognormal) add("sigma2", [](const HPParams& p) { return *p.sigma2; });
  return out;
}

}  // namespace graduate
