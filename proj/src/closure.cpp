#include "graduate/closure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "graduate/errors.hpp"

namespace graduate {

namespace {

constexpr double kQxCeiling = 1.0 - 1e-12;
constexpr double kPriorShare = 0.1;  // defensive mixture weight on the prior
constexpr int kMaxSirRounds = 6;

double clamp_q(double q) { return std::clamp(q, 0.0, kQxCeiling); }

double effective_sample_size(const std::vector<double>& log_w) {
  const double top = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(top)) return 0.0;
  double s = 0.0, s2 = 0.0;
  for (double lw : log_w) {
    const double w = std::exp(lw - top);
    s += w;
    s2 += w * w;
  }
  return s * s / s2;
}

// Window of (age, E, D) or (age, log rate) from x0 - k onward, fit data first
// and new data overriding where ages overlap.
struct ClosingData {
  std::vector<int> ages;
  std::vector<double> exposures, deaths;  // HP sources
  std::vector<double> log_q;              // log q (HP) or log rate (DLM)
};

void check_new_lengths(const ClosureConfig& cfg) {
  if (cfg.new_exposures.has_value() != cfg.new_deaths.has_value()) {
    throw ConfigError("new exposures and new deaths must be given together");
  }
  if (cfg.new_exposures && cfg.new_exposures->size() != cfg.new_deaths->size()) {
    throw ConfigError("new exposures and new deaths differ in length");
  }
}

struct Geometry {
  int first, x0, k, max_age;
  std::vector<double> weights;
};

Geometry geometry(const ClosureConfig& cfg, int first, int last) {
  Geometry g;
  g.first = first;
  g.x0 = cfg.x0.value_or(last);
  g.k = cfg.k;
  g.max_age = cfg.max_age;
  if (g.k < 1) throw ConfigError("k must be positive");
  if (g.x0 - g.k < first) throw ConfigError("x0 - k falls below the first fitted age");
  if (g.max_age <= g.x0) throw ConfigError("max_age must exceed x0");
  if (cfg.weights) {
    if (cfg.weights->size() != static_cast<std::size_t>(2 * g.k + 1)) {
      throw ConfigError("weights need 2k + 1 entries");
    }
    for (double w : *cfg.weights) {
      if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("weights must lie in [0, 1]");
    }
    g.weights = *cfg.weights;
  } else {
    for (int i = 0; i <= 2 * g.k; ++i) g.weights.push_back(static_cast<double>(i) / (2.0 * g.k));
  }
  return g;
}

ClosingData hp_window(const HPFit& fit, const ClosureConfig& cfg, const Geometry& g) {
  ClosingData out;
  const int start = g.x0 - g.k;
  const int new_first = cfg.new_data_first_age.value_or(g.x0 + 1);
  const std::size_t n_new = cfg.new_exposures ? cfg.new_exposures->size() : 0;
  const int fit_last = fit.data.last_age();
  const int end = std::max(fit_last, new_first + static_cast<int>(n_new) - 1);
  for (int age = start; age <= end; ++age) {
    double e = 0.0, d = 0.0;
    bool have = false;
    if (n_new > 0 && age >= new_first && age < new_first + static_cast<int>(n_new)) {
      e = (*cfg.new_exposures)[static_cast<std::size_t>(age - new_first)];
      d = (*cfg.new_deaths)[static_cast<std::size_t>(age - new_first)];
      have = true;
    } else if (auto i = fit.data.index_of(age)) {
      e = fit.data.exposures[*i];
      d = fit.data.deaths[*i];
      have = true;
    }
    if (!have) continue;
    if (!(e > 0.0) || !(d >= 0.0)) throw DataError("closing data needs positive exposure at age " + std::to_string(age));
    out.ages.push_back(age);
    out.exposures.push_back(e);
    out.deaths.push_back(d);
    out.log_q.push_back(d > 0.0 ? std::log(mx_to_qx(d / e)) : -std::numeric_limits<double>::infinity());
  }
  return out;
}

ClosingData dlm_window(const DLMFit& fit, const ClosureConfig& cfg, const Geometry& g) {
  ClosingData out;
  const int start = g.x0 - g.k;
  const int new_first = cfg.new_data_first_age.value_or(g.x0 + 1);
  const std::size_t n_new = cfg.new_log_rates ? cfg.new_log_rates->size() : 0;
  const int fit_first = fit.ages().front();
  const int fit_last = fit.ages().back();
  const int end = std::max(fit_last, new_first + static_cast<int>(n_new) - 1);
  for (int age = start; age <= end; ++age) {
    if (n_new > 0 && age >= new_first && age < new_first + static_cast<int>(n_new)) {
      const double y = (*cfg.new_log_rates)[static_cast<std::size_t>(age - new_first)];
      if (!std::isfinite(y)) throw DataError("non-finite new log rate at age " + std::to_string(age));
      out.ages.push_back(age);
      out.log_q.push_back(y);
    } else if (age >= fit_first && age <= fit_last) {
      out.ages.push_back(age);
      out.log_q.push_back(fit.y[static_cast<std::size_t>(age - fit_first)]);
    }
  }
  return out;
}

// Per-draw closing curve over ages x0 - k .. max_age.
using ClosingCurve = std::function<double(Eigen::Index draw, int age)>;

ClosedTable assemble(const Eigen::MatrixXd& fit_q, const Geometry& g, ClosingMethod method,
                     const std::string& source, const ClosingCurve& close_q) {
  ClosedTable out;
  out.method = method;
  out.source = source;
  out.x0 = g.x0;
  out.k = g.k;
  for (int a = g.first; a <= g.max_age; ++a) out.ages.push_back(a);
  out.qx = fit_q;
  const Eigen::Index draws = fit_q.rows();
  const int blend_start = g.x0 - g.k;
  for (Eigen::Index d = 0; d < draws; ++d) {
    for (int age = blend_start; age <= g.max_age; ++age) {
      const Eigen::Index j = age - g.first;
      const int i = age - blend_start;
      const double c = close_q(d, age);
      if (i <= 2 * g.k) {
        const double w = g.weights[static_cast<std::size_t>(i)];
        out.qx(d, j) = clamp_q((1.0 - w) * fit_q(d, j) + w * c);
      } else {
        out.qx(d, j) = clamp_q(c);
      }
    }
  }
  return out;
}

ClosedTable plateau(const Eigen::MatrixXd& fit_q, const Geometry& g, const std::string& source) {
  ClosedTable out;
  out.method = ClosingMethod::plateau;
  out.source = source;
  out.x0 = g.x0;
  out.k = g.k;
  for (int a = g.first; a <= g.max_age; ++a) out.ages.push_back(a);
  out.qx = fit_q;
  const Eigen::Index j0 = g.x0 - g.first;
  for (Eigen::Index j = j0 + 1; j < out.qx.cols(); ++j) out.qx.col(j) = fit_q.col(j0);
  return out;
}

ClosedTable linear_closing(const Eigen::MatrixXd& fit_q, const Geometry& g, const std::string& source,
                           const ClosingData& data, Rng& rng) {
  std::vector<int> ages;
  std::vector<double> y;
  for (std::size_t i = 0; i < data.ages.size(); ++i) {
    if (std::isfinite(data.log_q[i])) {
      ages.push_back(data.ages[i]);
      y.push_back(data.log_q[i]);
    }
  }
  const auto draws = fit_q.rows();
  const std::vector<LinearClosingDraw> post = fit_linear_closing(ages, y, static_cast<int>(draws), rng);
  // Predictive draws, one per fit draw and age.
  const int start = g.x0 - g.k;
  Eigen::MatrixXd pred(draws, g.max_age - start + 1);
  for (Eigen::Index d = 0; d < draws; ++d) {
    const LinearClosingDraw& p = post[static_cast<std::size_t>(d)];
    for (int age = start; age <= g.max_age; ++age) {
      pred(d, age - start) = std::exp(p.beta0 + p.beta1 * age + std::sqrt(p.sigma2) * rnorm(rng));
    }
  }
  return assemble(fit_q, g, ClosingMethod::linear, source,
                  [&](Eigen::Index d, int age) { return pred(d, age - start); });
}

ClosedTable gompertz_closing(const Eigen::MatrixXd& fit_q, const Geometry& g, const std::string& source,
                             const std::vector<GompertzParams>& params) {
  return assemble(fit_q, g, ClosingMethod::gompertz, source, [&](Eigen::Index d, int age) {
    return gompertz_qx(params[static_cast<std::size_t>(d)], age);
  });
}

}  // namespace

std::string to_string(ClosingMethod method) {
  switch (method) {
    case ClosingMethod::hp: return "hp";
    case ClosingMethod::plateau: return "plateau";
    case ClosingMethod::linear: return "linear";
    case ClosingMethod::gompertz: return "gompertz";
  }
  return "?";
}

ClosingMethod parse_closing_method(const std::string& name) {
  if (name == "hp") return ClosingMethod::hp;
  if (name == "plateau") return ClosingMethod::plateau;
  if (name == "linear") return ClosingMethod::linear;
  if (name == "gompertz") return ClosingMethod::gompertz;
  throw ConfigError("unknown closing method '" + name + "'");
}

double gompertz_hazard(const GompertzParams& p, double x) { return p.A * std::exp(p.B * x); }

double gompertz_qx(const GompertzParams& p, double x) { return -std::expm1(-gompertz_hazard(p, x)); }

std::vector<std::size_t> sir_resample(std::span<const double> log_weights, std::size_t n, Rng& rng) {
  if (log_weights.empty()) throw NumericalError("no proposals to resample");
  double top = -std::numeric_limits<double>::infinity();
  for (double lw : log_weights) {
    if (std::isfinite(lw)) top = std::max(top, lw);
  }
  if (!std::isfinite(top)) {
    throw NumericalError("all importance weights are zero or non-finite; widen the prior");
  }
  std::vector<double> w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::isfinite(log_weights[i]) ? std::exp(log_weights[i] - top) : 0.0;
  }
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  std::vector<std::size_t> out(n);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<GompertzParams> fit_gompertz_sir(const std::function<double(const GompertzParams&)>& loglik,
                                             int n_proposals, int n_resample, Rng& rng,
                                             const GompertzPrior& prior) {
  if (n_proposals < 1 || n_resample < 1) throw ConfigError("SIR sizes must be positive");
  if (!(prior.log_A_max > prior.log_A_min) || !(prior.B_max > prior.B_min) ||
      prior.log_A_max >= 0.0 || prior.B_min <= 0.0) {
    throw ConfigError("Gompertz prior box must satisfy A in (0, 1), B > 0");
  }
  const double width_a = prior.log_A_max - prior.log_A_min;
  const double width_b = prior.B_max - prior.B_min;
  const double log_area = std::log(width_a * width_b);
  const auto n = static_cast<std::size_t>(n_proposals);

  std::vector<Eigen::Vector2d> z(n);
  std::vector<double> log_w(n);
  auto inside = [&](const Eigen::Vector2d& v) {
    return v(0) >= prior.log_A_min && v(0) <= prior.log_A_max && v(1) >= prior.B_min && v(1) <= prior.B_max;
  };
  auto evaluate = [&](const Eigen::Vector2d& v) {
    const double ll = loglik({std::exp(v(0)), v(1)});
    return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
  };

  for (std::size_t i = 0; i < n; ++i) {
    z[i] = {prior.log_A_min + width_a * runif(rng), prior.B_min + width_b * runif(rng)};
    log_w[i] = evaluate(z[i]);
  }

  const double target_ess = std::min<double>(n_resample, 0.05 * static_cast<double>(n));
  for (int round = 0; round < kMaxSirRounds && effective_sample_size(log_w) < target_ess; ++round) {
    const double top = *std::max_element(log_w.begin(), log_w.end());
    if (!std::isfinite(top)) break;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::exp(log_w[i] - top);
      mean += w * z[i];
      total += w;
    }
    mean /= total;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Vector2d r = z[i] - mean;
      cov += std::exp(log_w[i] - top) / total * r * r.transpose();
    }
    // Inflate, and keep a floor so a handful of dominant particles still
    // yields a usable proposal.
    cov *= 4.0;
    cov(0, 0) += std::pow(1e-3 * width_a, 2);
    cov(1, 1) += std::pow(1e-3 * width_b, 2);
    const Eigen::LLT<Eigen::Matrix2d> llt(cov);
    const Eigen::Matrix2d L = llt.matrixL();
    const double log_norm = -std::log(2.0 * std::numbers::pi) - std::log(L(0, 0) * L(1, 1));

    for (std::size_t i = 0; i < n; ++i) {
      if (runif(rng) < kPriorShare) {
        z[i] = {prior.log_A_min + width_a * runif(rng), prior.B_min + width_b * runif(rng)};
      } else {
        z[i] = mean + L * Eigen::Vector2d(rnorm(rng), rnorm(rng));
      }
      if (!inside(z[i])) {
        log_w[i] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const Eigen::Vector2d u = llt.matrixL().solve(z[i] - mean);
      const double gauss = std::exp(log_norm - 0.5 * u.squaredNorm());
      const double mixture = kPriorShare * std::exp(-log_area) + (1.0 - kPriorShare) * gauss;
      log_w[i] = evaluate(z[i]) - log_area - std::log(mixture);
    }
  }

  const auto idx = sir_resample(log_w, static_cast<std::size_t>(n_resample), rng);
  std::vector<GompertzParams> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back({std::exp(z[i](0)), z[i](1)});
  return out;
}

std::vector<GompertzParams> fit_gompertz_sir(std::span<const int> ages, std::span<const double> exposures,
                                             std::span<const double> deaths, int n_proposals, int n_resample,
                                             Rng& rng, const GompertzPrior& prior) {
  if (ages.size() != exposures.size() || ages.size() != deaths.size() || ages.empty()) {
    throw DataError("Gompertz closing needs matching, non-empty ages, exposures and deaths");
  }
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (!(exposures[i] > 0.0)) throw DataError("Gompertz closing needs positive exposure at age " + std::to_string(ages[i]));
    if (!(deaths[i] >= 0.0)) throw DataError("negative deaths at age " + std::to_string(ages[i]));
  }
  auto loglik = [&](const GompertzParams& p) {
    double ll = 0.0;
    for (std::size_t i = 0; i < ages.size(); ++i) {
      const double lambda = exposures[i] * gompertz_hazard(p, ages[i]);
      ll += (deaths[i] > 0.0 ? deaths[i] * std::log(lambda) : 0.0) - lambda;
    }
    return ll;
  };
  return fit_gompertz_sir(loglik, n_proposals, n_resample, rng, prior);
}

std::vector<LinearClosingDraw> fit_linear_closing(std::span<const int> ages, std::span<const double> log_q,
                                                  int n_draws, Rng& rng) {
  if (ages.size() != log_q.size()) throw DataError("linear closing: ages and log q differ in length");
  const std::size_t n = ages.size();
  if (n < 3) throw DataError("linear closing needs at least 3 points with positive deaths");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(log_q[i])) throw DataError("linear closing: non-finite log q at age " + std::to_string(ages[i]));
    X(static_cast<Eigen::Index>(i), 0) = 1.0;
    X(static_cast<Eigen::Index>(i), 1) = ages[i];
    y(static_cast<Eigen::Index>(i)) = log_q[i];
  }
  if (X.col(1).maxCoeff() == X.col(1).minCoeff()) throw DataError("linear closing needs two distinct ages");
  const Eigen::Matrix2d xtx = X.transpose() * X;
  const Eigen::Matrix2d xtx_inv = xtx.inverse();
  const Eigen::Vector2d beta_hat = X.colPivHouseholderQr().solve(y);
  double rss = (y - X * beta_hat).squaredNorm();
  // residuals at roundoff level mean the points are collinear
  const double eps = 16.0 * std::numeric_limits<double>::epsilon() * y.norm();
  if (rss <= static_cast<double>(n) * eps * eps) rss = 0.0;
  const double shape = 0.5 * static_cast<double>(n - 2);

  std::vector<LinearClosingDraw> out;
  out.reserve(static_cast<std::size_t>(std::max(n_draws, 0)));
  for (int d = 0; d < n_draws; ++d) {
    const double sigma2 = rss > 0.0 ? rinvgamma(rng, shape, 0.5 * rss) : 0.0;
    Eigen::Vector2d b = beta_hat;
    if (sigma2 > 0.0) b = rmvnorm(rng, beta_hat, sigma2 * xtx_inv);
    out.push_back({b(0), b(1), sigma2});
  }
  return out;
}

ClosedTable close_table(const HPFit& fit, const ClosureConfig& cfg, Rng& rng) {
  if (fit.samples.empty()) throw DomainError("HP fit has no samples");
  check_new_lengths(cfg);
  const int first = fit.data.first_age();
  const Geometry g = geometry(cfg, first, fit.data.last_age());
  std::vector<int> ages;
  for (int a = first; a <= g.max_age; ++a) ages.push_back(a);
  const Eigen::MatrixXd fit_q = hp_qx_draws(fit, ages);

  switch (cfg.method) {
    case ClosingMethod::hp: {
      ClosedTable out;
      out.ages = ages;
      out.qx = fit_q;
      out.method = ClosingMethod::hp;
      out.source = "hp";
      out.x0 = g.x0;
      out.k = g.k;
      return out;
    }
    case ClosingMethod::plateau:
      return plateau(fit_q, g, "hp");
    case ClosingMethod::linear: {
      if (fit.model() != ObservationModel::lognormal) {
        throw ConfigError("linear closing is only available for lognormal HP fits");
      }
      if (!cfg.new_exposures) throw ConfigError("linear closing needs new exposures and deaths");
      return linear_closing(fit_q, g, "hp", hp_window(fit, cfg, g), rng);
    }
    case ClosingMethod::gompertz: {
      if (!cfg.new_exposures) throw ConfigError("gompertz closing needs new exposures and deaths");
      const ClosingData data = hp_window(fit, cfg, g);
      const auto params = fit_gompertz_sir(data.ages, data.exposures, data.deaths, cfg.sir_proposals,
                                           static_cast<int>(fit_q.rows()), rng);
      return gompertz_closing(fit_q, g, "hp", params);
    }
  }
  throw ConfigError("unknown closing method");
}

ClosedTable close_table(const DLMFit& fit, const ClosureConfig& cfg, Rng& rng) {
  if (fit.states.empty()) throw DomainError("DLM fit has no draws");
  const int first = fit.ages().front();
  const Geometry g = geometry(cfg, first, fit.ages().back());
  const Eigen::MatrixXd fit_q = dlm_qx_draws(fit, g.max_age);

  switch (cfg.method) {
    case ClosingMethod::hp:
      throw ConfigError("closing method 'hp' is not available for DLM fits");
    case ClosingMethod::plateau:
      return plateau(fit_q, g, "dlm");
    case ClosingMethod::linear: {
      if (!cfg.new_log_rates) throw ConfigError("linear closing needs new log rates");
      return linear_closing(fit_q, g, "dlm", dlm_window(fit, cfg, g), rng);
    }
    case ClosingMethod::gompertz: {
      if (!cfg.new_log_rates) throw ConfigError("gompertz closing needs new log rates");
      const ClosingData data = dlm_window(fit, cfg, g);
      // Gaussian likelihood on log rates with V at its posterior mean.
      double v = 0.0;
      for (double s : fit.V_samples) v += s;
      v /= static_cast<double>(fit.V_samples.size());
      auto loglik = [&](const GompertzParams& p) {
        double ll = 0.0;
        for (std::size_t i = 0; i < data.ages.size(); ++i) {
          const double r = data.log_q[i] - std::log(gompertz_hazard(p, data.ages[i]));
          ll -= 0.5 * r * r / v;
        }
        return ll;
      };
      const auto params = fit_gompertz_sir(loglik, cfg.sir_proposals, static_cast<int>(fit_q.rows()), rng);
      return gompertz_closing(fit_q, g, "dlm", params);
    }
  }
  throw ConfigError("unknown closing method");
}

ExpectancyTable closed_expectancy(const ClosedTable& table, std::span<const int> from_ages, double level) {
  return expectancy_posterior(table.qx, table.ages, from_ages, level);
}

}  // namespace graduate
