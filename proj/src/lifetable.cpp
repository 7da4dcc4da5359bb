#include "graduate/lifetable.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "graduate/errors.hpp"

namespace graduate {

namespace {

std::string join_ages(const std::vector<int>& ages) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (i) os << ", ";
    os << ages[i];
  }
  return os.str();
}

}  // namespace

void MortalityData::validate() const {
  if (ages.empty()) throw DataError("mortality data is empty");
  if (exposures.size() != ages.size() || deaths.size() != ages.size()) {
    throw DataError("ages, exposures and deaths must have equal length");
  }
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (ages[i] < 0) throw DataError("negative age " + std::to_string(ages[i]));
    if (i > 0 && ages[i] != ages[i - 1] + 1) {
      throw DataError("ages must increase in steps of 1 (gap after age " +
                      std::to_string(ages[i - 1]) + ")");
    }
    if (!std::isfinite(deaths[i]) || deaths[i] < 0.0) {
      throw DataError("invalid death count at age " + std::to_string(ages[i]));
    }
    if (!std::isfinite(exposures[i]) || exposures[i] < 0.0) {
      throw DataError("invalid exposure at age " + std::to_string(ages[i]));
    }
  }
}

std::vector<double> MortalityData::raw_rates() const {
  std::vector<double> m(size());
  std::vector<int> bad;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(exposures[i] > 0.0)) {
      bad.push_back(ages[i]);
      continue;
    }
    m[i] = deaths[i] / exposures[i];
  }
  if (!bad.empty()) throw DataError("zero exposure at age(s) " + join_ages(bad));
  return m;
}

std::vector<double> MortalityData::log_rates() const {
  std::vector<double> y(size());
  std::vector<int> bad;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(exposures[i] > 0.0) || !(deaths[i] > 0.0)) {
      bad.push_back(ages[i]);
      continue;
    }
    y[i] = std::log(deaths[i] / exposures[i]);
  }
  if (!bad.empty()) {
    throw DataError("log rate undefined (zero deaths or exposure) at age(s) " + join_ages(bad) +
                    "; restrict the age range");
  }
  return y;
}

std::optional<std::size_t> MortalityData::index_of(int age) const {
  if (ages.empty() || age < ages.front() || age > ages.back()) return std::nullopt;
  return static_cast<std::size_t>(age - ages.front());
}

std::string to_string(ObservationModel model) {
  switch (model) {
    case ObservationModel::lognormal: return "lognormal";
    case ObservationModel::binomial: return "binomial";
    case ObservationModel::poisson: return "poisson";
  }
  return "?";
}

ObservationModel parse_observation_model(const std::string& name) {
  if (name == "lognormal") return ObservationModel::lognormal;
  if (name == "binomial") return ObservationModel::binomial;
  if (name == "poisson") return ObservationModel::poisson;
  throw ConfigError("unknown observation model '" + name + "'");
}

double mx_to_qx(double m) {
  if (!(m >= 0.0)) throw DomainError("mx_to_qx: rate must be non-negative");
  return -std::expm1(-m);
}

double qx_to_mx(double q) {
  if (!(q >= 0.0) || !(q < 1.0)) throw DomainError("qx_to_mx: probability must be in [0, 1)");
  return -std::log1p(-q);
}

double curtate_expectancy(std::span<const double> qx, std::size_t from) {
  if (from >= qx.size()) throw DomainError("curtate_expectancy: start age beyond the table");
  double survival = 1.0;
  double e = 0.0;
  for (std::size_t i = from; i < qx.size(); ++i) {
    const double q = qx[i];
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("curtate_expectancy: q outside [0, 1]");
    survival *= 1.0 - q;
    e += survival;
  }
  return e;
}

double sorted_quantile(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw DomainError("quantile level outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(std::vector<double> values, double level) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, level);
}

Interval equal_tailed(std::vector<double> values, double level) {
  if (!(level >= 0.0 && level <= 1.0)) throw DomainError("interval level outside [0, 1]");
  std::sort(values.begin(), values.end());
  return {sorted_quantile(values, 0.5 * (1.0 - level)), sorted_quantile(values, 0.5 * (1.0 + level))};
}

std::span<const double> default_levels() {
  static constexpr std::array<double, 5> levels{0.025, 0.25, 0.5, 0.75, 0.975};
  return levels;
}

PosteriorSummary summarize_chain(std::span<const double> samples, std::span<const double> levels) {
  if (samples.empty()) throw DomainError("summarize_chain: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());

  PosteriorSummary s;
  // Summing the sorted copy makes the result independent of sample order.
  const double n = static_cast<double>(sorted.size());
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  if (sorted.size() > 1) {
    double ss = 0.0;
    for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
  }
  for (double level : levels) s.quantiles[level] = sorted_quantile(sorted, level);
  return s;
}

Eigen::VectorXd column_quantile(const Eigen::MatrixXd& draws, double level) {
  Eigen::VectorXd out(draws.cols());
  std::vector<double> col(static_cast<std::size_t>(draws.rows()));
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    for (Eigen::Index d = 0; d < draws.rows(); ++d) col[static_cast<std::size_t>(d)] = draws(d, j);
    out(j) = quantile(col, level);
  }
  return out;
}

ExpectancyTable expectancy_posterior(const Eigen::MatrixXd& qx_draws,
                                     std::span<const int> table_ages,
                                     std::span<const int> from_ages, double level) {
  if (qx_draws.rows() == 0) throw DomainError("expectancy_posterior: no posterior draws");
  if (static_cast<std::size_t>(qx_draws.cols()) != table_ages.size() || table_ages.empty()) {
    throw DataError("expectancy_posterior: table ages do not match the q draws");
  }
  ExpectancyTable table;
  table.level = level;
  table.max_age = table_ages.back();

  std::vector<double> row(table_ages.size());
  std::vector<double> per_draw(static_cast<std::size_t>(qx_draws.rows()));
  for (int age : from_ages) {
    if (age < table_ages.front() || age > table_ages.back()) {
      throw DomainError("expectancy_posterior: age " + std::to_string(age) +
                        " outside the table");
    }
    const auto from = static_cast<std::size_t>(age - table_ages.front());
    for (Eigen::Index d = 0; d < qx_draws.rows(); ++d) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = qx_draws(d, static_cast<Eigen::Index>(j));
      per_draw[static_cast<std::size_t>(d)] = curtate_expectancy(row, from);
    }
    std::sort(per_draw.begin(), per_draw.end());
    table.ages.push_back(age);
    table.point.push_back(sorted_quantile(per_draw, 0.5));
    table.lower.push_back(sorted_quantile(per_draw, 0.5 * (1.0 - level)));
    table.upper.push_back(sorted_quantile(per_draw, 0.5 * (1.0 + level)));
  }
  return table;
}

std::vector<QxInterval> composition_qx_interval(ObservationModel model, const Eigen::MatrixXd& curve,
                                                std::span<const double> sigma2,
                                                std::span<const int> ages,
                                                std::optional<std::span<const double>> exposures,
                                                double level, Rng& rng) {
  const auto n_draws = curve.rows();
  if (n_draws == 0) throw DomainError("composition_qx_interval: no posterior draws");
  if (static_cast<std::size_t>(curve.cols()) != ages.size()) {
    throw DataError("composition_qx_interval: curve columns do not match ages");
  }
  if (model == ObservationModel::lognormal) {
    if (sigma2.size() != static_cast<std::size_t>(n_draws)) {
      throw DataError("composition_qx_interval: one sigma2 per draw is required");
    }
  } else {
    std::vector<int> missing;
    if (!exposures) {
      missing.assign(ages.begin(), ages.end());
    } else {
      for (std::size_t j = 0; j < ages.size(); ++j) {
        if (j >= exposures->size() || !((*exposures)[j] > 0.0)) missing.push_back(ages[j]);
      }
    }
    if (!missing.empty()) {
      std::ostringstream os;
      os << "exposures required for " << to_string(model) << " intervals; missing at age(s) ";
      for (std::size_t i = 0; i < missing.size(); ++i) os << (i ? ", " : "") << missing[i];
      throw DataError(os.str());
    }
  }

  Eigen::MatrixXd predictive(n_draws, curve.cols());
  for (Eigen::Index d = 0; d < n_draws; ++d) {
    for (Eigen::Index j = 0; j < curve.cols(); ++j) {
      const double c = curve(d, j);
      double q = 0.0;
      switch (model) {
        case ObservationModel::lognormal: {
          const double s2 = sigma2[static_cast<std::size_t>(d)];
          const double odds = std::exp(std::log(c) + std::sqrt(s2) * rnorm(rng));
          q = odds / (1.0 + odds);
          break;
        }
        case ObservationModel::binomial: {
          const double e = (*exposures)[static_cast<std::size_t>(j)];
          const auto trials = static_cast<long long>(std::llround(e));
          const double p = std::clamp(c, 0.0, 1.0);
          const auto deaths = trials > 0 ? std::binomial_distribution<long long>(trials, p)(rng) : 0;
          q = mx_to_qx(static_cast<double>(deaths) / e);
          break;
        }
        case ObservationModel::poisson: {
          const double e = (*exposures)[static_cast<std::size_t>(j)];
          const double mean = e * std::max(c, 0.0);
          const auto deaths = mean > 0.0 ? std::poisson_distribution<long long>(mean)(rng) : 0;
          q = mx_to_qx(static_cast<double>(deaths) / e);
          break;
        }
      }
      predictive(d, j) = q;
    }
  }

  std::vector<QxInterval> out;
  out.reserve(ages.size());
  std::vector<double> col(static_cast<std::size_t>(n_draws));
  for (Eigen::Index j = 0; j < curve.cols(); ++j) {
    for (Eigen::Index d = 0; d < n_draws; ++d) col[static_cast<std::size_t>(d)] = predictive(d, j);
    const Interval iv = equal_tailed(col, level);
    out.push_back({ages[static_cast<std::size_t>(j)], iv.lower, iv.upper, level});
  }
  return out;
}

Eigen::VectorXd rmvnorm(Rng& rng, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    sym.diagonal().array() += 1e-10;
    llt.compute(sym);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("covariance matrix is not positive definite");
    }
  }
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rnorm(rng);
  return mean + llt.matrixL() * z;
}

}  // namespace graduate
