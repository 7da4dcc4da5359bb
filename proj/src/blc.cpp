#include "graduate/blc.hpp"

#include <algorithm>
#include <cmath>

#include "graduate/errors.hpp"

namespace graduate {

namespace {

// Scalar FFBS for kappa: y_t - alpha = beta kappa_t + eps, kappa_t = kappa_{t-1} + theta + omega.
Eigen::VectorXd sample_kappa(const Eigen::MatrixXd& Y, const BLCState& s, double kappa1_var, Rng& rng) {
  const Eigen::Index T = Y.cols();
  Eigen::VectorXd m(T), C(T), a(T), R(T);
  const double btb = s.beta.squaredNorm() / s.sig2_eps;
  for (Eigen::Index t = 0; t < T; ++t) {
    a(t) = t == 0 ? 0.0 : m(t - 1) + s.theta;
    R(t) = t == 0 ? kappa1_var : C(t - 1) + s.sig2_omega;
    const double resid = s.beta.dot(Y.col(t) - s.alpha) / s.sig2_eps;
    C(t) = 1.0 / (1.0 / R(t) + btb);
    m(t) = C(t) * (a(t) / R(t) + resid);
  }
  Eigen::VectorXd kappa(T);
  kappa(T - 1) = rnorm(rng, m(T - 1), std::sqrt(C(T - 1)));
  for (Eigen::Index t = T - 1; t-- > 0;) {
    const double B = C(t) / R(t + 1);
    const double h = m(t) + B * (kappa(t + 1) - a(t + 1));
    const double H = std::max(C(t) - B * B * R(t + 1), 0.0);
    kappa(t) = rnorm(rng, h, std::sqrt(H));
  }
  return kappa;
}

double quantile_of(std::vector<double>& v, double level) {
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, level);
}

}  // namespace

void LogMortalityMatrix::validate() const {
  if (values.rows() != static_cast<Eigen::Index>(ages.size()) ||
      values.cols() != static_cast<Eigen::Index>(years.size())) {
    throw DataError("log mortality matrix dimensions do not match ages/years");
  }
  if (years.size() < 2) throw DataError("Lee-Carter needs at least two years");
  if (ages.size() < 2) throw DataError("Lee-Carter needs at least two ages");
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index t = 0; t < values.cols(); ++t) {
      if (!std::isfinite(values(i, t))) {
        throw DataError("non-finite log rate at age " + std::to_string(ages[static_cast<std::size_t>(i)]) +
                        ", year " + std::to_string(years[static_cast<std::size_t>(t)]));
      }
    }
  }
}

void BLCConfig::validate() const {
  if (numit <= 0) throw ConfigError("numit must be positive");
  if (warmup < 0 || warmup >= numit) throw ConfigError("warmup must satisfy 0 <= warmup < numit");
  const BLCPrior& p = prior;
  if (!(p.alpha_var > 0.0) || !(p.beta_var > 0.0) || !(p.theta_var > 0.0) || !(p.kappa1_var > 0.0)) {
    throw ConfigError("prior variances must be positive");
  }
  if (!(p.eps_shape > 0.0) || !(p.eps_scale > 0.0) || !(p.omega_shape > 0.0) || !(p.omega_scale > 0.0)) {
    throw ConfigError("inverse-gamma prior parameters must be positive");
  }
}

void blc_normalize(BLCState& s) {
  const double c = s.kappa.mean();
  s.kappa.array() -= c;
  s.alpha += s.beta * c;
  const double scale = s.beta.sum();
  if (scale == 0.0 || !std::isfinite(scale)) throw NumericalError("Lee-Carter loadings sum to zero");
  s.beta /= scale;
  s.kappa *= scale;
  s.theta *= scale;
  s.sig2_omega *= scale * scale;
}

BLCFit fit_blc(const LogMortalityMatrix& Y, const BLCConfig& cfg) {
  Y.validate();
  cfg.validate();
  const Eigen::Index nA = Y.values.rows();
  const Eigen::Index T = Y.values.cols();
  const BLCPrior& prior = cfg.prior;
  const Eigen::VectorXd row_mean = Y.values.rowwise().mean();
  const Eigen::VectorXd alpha_mean = prior.alpha_mean.value_or(row_mean);
  const Eigen::VectorXd beta_mean = prior.beta_mean.value_or(Eigen::VectorXd::Constant(nA, 1.0 / static_cast<double>(nA)));
  if (alpha_mean.size() != nA || beta_mean.size() != nA) throw ConfigError("prior means need one entry per age");

  BLCState s;
  s.alpha = cfg.init.alpha.value_or(row_mean);
  s.beta = cfg.init.beta.value_or(Eigen::VectorXd::Constant(nA, 1.0 / static_cast<double>(nA)));
  if (cfg.init.kappa) {
    s.kappa = *cfg.init.kappa;
  } else {
    s.kappa = (Y.values.colwise() - s.alpha).colwise().sum().transpose();
  }
  if (s.alpha.size() != nA || s.beta.size() != nA || s.kappa.size() != T) {
    throw ConfigError("initial values have the wrong length");
  }
  s.theta = cfg.init.theta.value_or((s.kappa(T - 1) - s.kappa(0)) / static_cast<double>(T - 1));
  {
    const Eigen::MatrixXd fitted = (s.beta * s.kappa.transpose()).colwise() + s.alpha;
    const double v = (Y.values - fitted).squaredNorm() / static_cast<double>(nA * T);
    s.sig2_eps = cfg.init.sig2_eps.value_or(std::max(v, 1e-6));
    double w = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) w += std::pow(s.kappa(t) - s.kappa(t - 1) - s.theta, 2);
    s.sig2_omega = cfg.init.sig2_omega.value_or(std::max(w / static_cast<double>(T - 1), 1e-6));
  }
  if (!(s.sig2_eps > 0.0) || !(s.sig2_omega > 0.0)) throw ConfigError("initial variances must be positive");

  Rng rng(cfg.seed);
  const Eigen::Index keep = cfg.numit - cfg.warmup;
  BLCFit fit;
  fit.data = Y;
  fit.alpha.resize(keep, nA);
  fit.beta.resize(keep, nA);
  fit.kappa.resize(keep, T);
  fit.theta.resize(keep);
  fit.sig2_eps.resize(keep);
  fit.sig2_omega.resize(keep);

  Eigen::Matrix2d prior_prec = Eigen::Matrix2d::Zero();
  prior_prec(0, 0) = 1.0 / prior.alpha_var;
  prior_prec(1, 1) = 1.0 / prior.beta_var;

  for (int it = 0; it < cfg.numit; ++it) {
    s.kappa = sample_kappa(Y.values, s, prior.kappa1_var, rng);

    // (alpha_x, beta_x) jointly: regression of row x on [1, kappa].
    const double sk = s.kappa.sum();
    const double skk = s.kappa.squaredNorm();
    Eigen::Matrix2d xtx;
    xtx << static_cast<double>(T), sk, sk, skk;
    const Eigen::Matrix2d prec = prior_prec + xtx / s.sig2_eps;
    const Eigen::Matrix2d cov = prec.inverse();
    for (Eigen::Index x = 0; x < nA; ++x) {
      Eigen::Vector2d rhs;
      rhs(0) = alpha_mean(x) / prior.alpha_var + Y.values.row(x).sum() / s.sig2_eps;
      rhs(1) = beta_mean(x) / prior.beta_var + Y.values.row(x).dot(s.kappa) / s.sig2_eps;
      const Eigen::VectorXd draw = rmvnorm(rng, cov * rhs, cov);
      s.alpha(x) = draw(0);
      s.beta(x) = draw(1);
    }

    // Drift from the increments of kappa.
    double inc_sum = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) inc_sum += s.kappa(t) - s.kappa(t - 1);
    const double theta_prec = 1.0 / prior.theta_var + static_cast<double>(T - 1) / s.sig2_omega;
    const double theta_mean = (prior.theta_mean / prior.theta_var + inc_sum / s.sig2_omega) / theta_prec;
    s.theta = rnorm(rng, theta_mean, std::sqrt(1.0 / theta_prec));

    const Eigen::MatrixXd fitted = (s.beta * s.kappa.transpose()).colwise() + s.alpha;
    const double sse = (Y.values - fitted).squaredNorm();
    s.sig2_eps = rinvgamma(rng, prior.eps_shape + 0.5 * static_cast<double>(nA * T), prior.eps_scale + 0.5 * sse);
    double ssw = 0.0;
    for (Eigen::Index t = 1; t < T; ++t) ssw += std::pow(s.kappa(t) - s.kappa(t - 1) - s.theta, 2);
    s.sig2_omega = rinvgamma(rng, prior.omega_shape + 0.5 * static_cast<double>(T - 1), prior.omega_scale + 0.5 * ssw);

    blc_normalize(s);

    if (it >= cfg.warmup) {
      const Eigen::Index r = it - cfg.warmup;
      fit.alpha.row(r) = s.alpha.transpose();
      fit.beta.row(r) = s.beta.transpose();
      fit.kappa.row(r) = s.kappa.transpose();
      fit.theta(r) = s.theta;
      fit.sig2_eps(r) = s.sig2_eps;
      fit.sig2_omega(r) = s.sig2_omega;
    }
  }
  return fit;
}

BLCSurface blc_fitted(const BLCFit& fit, double level) {
  const Eigen::Index nA = fit.alpha.cols();
  const Eigen::Index T = fit.kappa.cols();
  const Eigen::Index D = fit.draws();
  if (D == 0) throw DomainError("Lee-Carter fit has no draws");
  BLCSurface out;
  out.ages = fit.data.ages;
  out.years = fit.data.years;
  out.level = level;
  out.mean.resize(nA, T);
  out.lower.resize(nA, T);
  out.upper.resize(nA, T);
  std::vector<double> cell(static_cast<std::size_t>(D));
  for (Eigen::Index x = 0; x < nA; ++x) {
    for (Eigen::Index t = 0; t < T; ++t) {
      double sum = 0.0;
      for (Eigen::Index d = 0; d < D; ++d) {
        const double r = std::exp(fit.alpha(d, x) + fit.beta(d, x) * fit.kappa(d, t));
        cell[static_cast<std::size_t>(d)] = r;
        sum += r;
      }
      out.mean(x, t) = sum / static_cast<double>(D);
      out.lower(x, t) = quantile_of(cell, 0.5 * (1.0 - level));
      out.upper(x, t) = sorted_quantile(cell, 0.5 * (1.0 + level));
    }
  }
  return out;
}

std::vector<ImprovementRow> blc_improvement(const BLCFit& fit, double cred) {
  const Eigen::Index D = fit.draws();
  if (D == 0) throw DomainError("Lee-Carter fit has no draws");
  std::vector<ImprovementRow> out;
  std::vector<double> v(static_cast<std::size_t>(D));
  for (Eigen::Index x = 0; x < fit.beta.cols(); ++x) {
    double sum = 0.0;
    for (Eigen::Index d = 0; d < D; ++d) {
      const double imp = -std::expm1(fit.beta(d, x) * fit.theta(d));
      v[static_cast<std::size_t>(d)] = imp;
      sum += imp;
    }
    const double lo = quantile_of(v, 0.5 * (1.0 - cred));
    const double hi = sorted_quantile(v, 0.5 * (1.0 + cred));
    out.push_back({fit.data.ages[static_cast<std::size_t>(x)], sum / static_cast<double>(D), lo, hi});
  }
  return out;
}

namespace {

BLCForecast extend(const BLCFit& fit, const Eigen::VectorXd& kappa_start, int first_year, int h, Rng& rng) {
  const Eigen::Index D = fit.draws();
  const Eigen::Index nA = fit.alpha.cols();
  BLCForecast fc;
  fc.h = h;
  fc.ages = fit.data.ages;
  for (int j = 1; j <= h; ++j) fc.years.push_back(first_year + j);
  fc.y_draws.assign(static_cast<std::size_t>(D), Eigen::MatrixXd(nA, h));
  fc.kappa_last = kappa_start;
  for (int j = 0; j < h; ++j) {
    for (Eigen::Index d = 0; d < D; ++d) {
      double& k = fc.kappa_last(d);
      k = fit.theta(d) + k + std::sqrt(fit.sig2_omega(d)) * rnorm(rng);
      const double sd = std::sqrt(fit.sig2_eps(d));
      Eigen::MatrixXd& y = fc.y_draws[static_cast<std::size_t>(d)];
      for (Eigen::Index x = 0; x < nA; ++x) y(x, j) = fit.alpha(d, x) + fit.beta(d, x) * k + sd * rnorm(rng);
    }
  }
  return fc;
}

}  // namespace

BLCForecast blc_predict(const BLCFit& fit, int h, Rng& rng) {
  if (h < 1) throw DomainError("forecast horizon must be at least 1");
  if (fit.draws() == 0) throw DomainError("Lee-Carter fit has no draws");
  return extend(fit, fit.kappa.col(fit.kappa.cols() - 1), fit.data.years.back(), h, rng);
}

BLCForecast blc_predict_continue(const BLCFit& fit, const BLCForecast& previous, int h, Rng& rng) {
  if (h < 1) throw DomainError("forecast horizon must be at least 1");
  if (previous.kappa_last.size() != fit.draws()) throw DomainError("forecast does not belong to this fit");
  const int last_year = previous.years.empty() ? fit.data.years.back() : previous.years.back();
  return extend(fit, previous.kappa_last, last_year, h, rng);
}

BLCSurface blc_forecast_summary(const BLCForecast& fc, double level) {
  const auto D = fc.y_draws.size();
  if (D == 0) throw DomainError("forecast has no draws");
  const auto nA = static_cast<Eigen::Index>(fc.ages.size());
  BLCSurface out;
  out.ages = fc.ages;
  out.years = fc.years;
  out.level = level;
  out.mean.resize(nA, fc.h);
  out.lower.resize(nA, fc.h);
  out.upper.resize(nA, fc.h);
  std::vector<double> cell(D);
  for (Eigen::Index x = 0; x < nA; ++x) {
    for (Eigen::Index j = 0; j < fc.h; ++j) {
      double sum = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        cell[d] = std::exp(fc.y_draws[d](x, j));
        sum += cell[d];
      }
      out.mean(x, j) = sum / static_cast<double>(D);
      out.lower(x, j) = quantile_of(cell, 0.5 * (1.0 - level));
      out.upper(x, j) = sorted_quantile(cell, 0.5 * (1.0 + level));
    }
  }
  return out;
}

namespace {

// `log_rate(d, x, t)` gives the log rate of draw d.
template <typename LogRate>
BLCExpectancy expectancy_grid(const std::vector<int>& ages, const std::vector<int>& years, Eigen::Index draws,
                              std::span<const int> at_ages, double level, LogRate log_rate) {
  for (int a : at_ages) {
    if (a < ages.front() || a > ages.back()) {
      throw DomainError("expectancy age " + std::to_string(a) + " outside the fitted ages");
    }
  }
  const auto nA = static_cast<Eigen::Index>(ages.size());
  const auto T = static_cast<Eigen::Index>(years.size());
  BLCExpectancy out;
  out.ages.assign(at_ages.begin(), at_ages.end());
  out.years = years;
  out.level = level;
  const auto nAt = static_cast<Eigen::Index>(at_ages.size());
  out.point.resize(nAt, T);
  out.lower.resize(nAt, T);
  out.upper.resize(nAt, T);
  Eigen::MatrixXd q(draws, nA);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index d = 0; d < draws; ++d) {
      for (Eigen::Index x = 0; x < nA; ++x) q(d, x) = -std::expm1(-std::exp(log_rate(d, x, t)));
    }
    const ExpectancyTable e = expectancy_posterior(q, ages, at_ages, level);
    for (Eigen::Index i = 0; i < nAt; ++i) {
      out.point(i, t) = e.point[static_cast<std::size_t>(i)];
      out.lower(i, t) = e.lower[static_cast<std::size_t>(i)];
      out.upper(i, t) = e.upper[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

}  // namespace

BLCExpectancy blc_expectancy(const BLCFit& fit, std::span<const int> at_ages, double level) {
  if (fit.draws() == 0) throw DomainError("Lee-Carter fit has no draws");
  return expectancy_grid(fit.data.ages, fit.data.years, fit.draws(), at_ages, level,
                         [&](Eigen::Index d, Eigen::Index x, Eigen::Index t) {
                           return fit.alpha(d, x) + fit.beta(d, x) * fit.kappa(d, t);
                         });
}

BLCExpectancy blc_expectancy(const BLCForecast& fc, std::span<const int> at_ages, double level) {
  if (fc.y_draws.empty()) throw DomainError("forecast has no draws");
  return expectancy_grid(fc.ages, fc.years, static_cast<Eigen::Index>(fc.y_draws.size()), at_ages, level,
                         [&](Eigen::Index d, Eigen::Index x, Eigen::Index t) {
                           return fc.y_draws[static_cast<std::size_t>(d)](x, t);
                         });
}

std::vector<std::pair<std::string, PosteriorSummary>> blc_summary(const BLCFit& fit) {
  std::vector<std::pair<std::string, PosteriorSummary>> out;
  if (fit.draws() == 0) return out;
  auto column = [](const Eigen::MatrixXd& m, Eigen::Index j) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index d = 0; d < m.rows(); ++d) v[static_cast<std::size_t>(d)] = m(d, j);
    return v;
  };
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  for (Eigen::Index x = 0; x < fit.alpha.cols(); ++x) {
    out.emplace_back("alpha[" + std::to_string(fit.data.ages[static_cast<std::size_t>(x)]) + "]",
                     summarize_chain(column(fit.alpha, x)));
  }
  for (Eigen::Index x = 0; x < fit.beta.cols(); ++x) {
    out.emplace_back("beta[" + std::to_string(fit.data.ages[static_cast<std::size_t>(x)]) + "]",
                     summarize_chain(column(fit.beta, x)));
  }
  for (Eigen::Index t = 0; t < fit.kappa.cols(); ++t) {
    out.emplace_back("kappa[" + std::to_string(fit.data.years[static_cast<std::size_t>(t)]) + "]",
                     summarize_chain(column(fit.kappa, t)));
  }
  out.emplace_back("theta", summarize_chain(vec(fit.theta)));
  out.emplace_back("sigma2_eps", summarize_chain(vec(fit.sig2_eps)));
  out.emplace_back("sigma2_omega", summarize_chain(vec(fit.sig2_omega)));
  return out;
}

}  // namespace graduate
