#include "graduate/dlm.hpp"

#include <algorithm>
#include <cmath>

#include "graduate/errors.hpp"

namespace graduate {

namespace {

constexpr double kQxCeiling = 1.0 - 1e-12;

Eigen::MatrixXd symmetric(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

double clamp_q(double q) { return std::clamp(q, 0.0, kQxCeiling); }

}  // namespace

void DLMConfig::validate() const {
  const Eigen::Index p = G.rows();
  if (p == 0 || G.cols() != p) throw ConfigError("G must be square and non-empty");
  if (F.size() != p) throw ConfigError("F must have one entry per state");
  if (m0.size() != p) throw ConfigError("m0 must have one entry per state");
  if (C0.rows() != p || C0.cols() != p) throw ConfigError("C0 must be p x p");
  if ((C0 - C0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, C0.cwiseAbs().maxCoeff())) {
    throw ConfigError("C0 must be symmetric");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(C0).info() != Eigen::Success) throw ConfigError("C0 must be positive definite");
  if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
  if (!(sig2_shape > 0.0) || !(sig2_scale > 0.0)) throw ConfigError("variance prior parameters must be positive");
  if (iterations <= 0) throw ConfigError("iterations must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn-in must satisfy 0 <= burn_in < iterations");
  if (thin < 1) throw ConfigError("thin must be at least 1");
}

FilterMoments kalman_filter(std::span<const double> y, const DLMConfig& cfg, double V) {
  if (!(V >= 0.0)) throw DomainError("observational variance must be non-negative");
  const std::size_t n = y.size();
  FilterMoments out;
  out.a.reserve(n);
  out.m.reserve(n);
  out.R.reserve(n);
  out.C.reserve(n);
  out.f.reserve(n);
  out.Q.reserve(n);

  Eigen::VectorXd m = cfg.m0;
  Eigen::MatrixXd C = cfg.C0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(y[i])) throw DataError("non-finite observation at position " + std::to_string(i));
    Eigen::VectorXd a = cfg.G * m;
    Eigen::MatrixXd R = symmetric(cfg.G * C * cfg.G.transpose() / cfg.delta);
    const double f = cfg.F.dot(a);
    const double Q = (cfg.F * R * cfg.F.transpose())(0, 0) + V;
    if (!(Q > 0.0)) throw NumericalError("one-step forecast variance is not positive");
    const Eigen::VectorXd gain = R * cfg.F.transpose() / Q;
    m = a + gain * (y[i] - f);
    C = symmetric(R - gain * Q * gain.transpose());
    out.a.push_back(std::move(a));
    out.R.push_back(std::move(R));
    out.f.push_back(f);
    out.Q.push_back(Q);
    out.m.push_back(m);
    out.C.push_back(C);
  }
  return out;
}

Eigen::MatrixXd ffbs_sample(const FilterMoments& filt, const DLMConfig& cfg, Rng& rng) {
  const std::size_t n = filt.m.size();
  const Eigen::Index p = cfg.state_dim();
  Eigen::MatrixXd theta(static_cast<Eigen::Index>(n), p);
  if (n == 0) return theta;
  Eigen::VectorXd next = rmvnorm(rng, filt.m[n - 1], filt.C[n - 1]);
  theta.row(static_cast<Eigen::Index>(n - 1)) = next.transpose();
  for (std::size_t k = n - 1; k-- > 0;) {
    const Eigen::MatrixXd& C = filt.C[k];
    const Eigen::MatrixXd& R = filt.R[k + 1];
    // B = C G' R^{-1}, computed as (R^{-1} G C)' since R is symmetric.
    const Eigen::MatrixXd B = R.ldlt().solve(cfg.G * C).transpose();
    const Eigen::VectorXd h = filt.m[k] + B * (next - filt.a[k + 1]);
    const Eigen::MatrixXd H = symmetric(C - B * R * B.transpose());
    next = rmvnorm(rng, h, H);
    theta.row(static_cast<Eigen::Index>(k)) = next.transpose();
  }
  return theta;
}

DLMFit fit_dlm(std::span<const double> y, const DLMConfig& cfg) {
  cfg.validate();
  if (y.empty()) throw DataError("DLM needs at least one observation");
  if (cfg.ages.size() != y.size()) throw DataError("DLM: ages and observations differ in length");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw DataError("non-finite log rate at age " + std::to_string(cfg.ages[i]));
  }

  Rng rng(cfg.seed);
  const std::size_t n = y.size();
  DLMFit fit;
  fit.y.assign(y.begin(), y.end());
  fit.config = cfg;

  double V = 1.0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const FilterMoments filt = kalman_filter(y, cfg, V);
    Eigen::MatrixXd theta = ffbs_sample(filt, cfg, rng);

    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - cfg.F.dot(theta.row(static_cast<Eigen::Index>(i)));
      ss += r * r;
    }
    V = rinvgamma(rng, cfg.sig2_shape + 0.5 * static_cast<double>(n), cfg.sig2_scale + 0.5 * ss);

    if (it >= cfg.burn_in && (it - cfg.burn_in + 1) % cfg.thin == 0) {
      // W_n = R_n - G C_{n-1} G', the discount-implied evolution variance.
      const Eigen::MatrixXd& prev = n > 1 ? filt.C[n - 2] : cfg.C0;
      fit.W_last.push_back(symmetric(filt.R[n - 1] - cfg.G * prev * cfg.G.transpose()));
      fit.states.push_back(std::move(theta));
      fit.V_samples.push_back(V);
    }
  }
  return fit;
}

DLMFit fit_dlm(const MortalityData& data, DLMConfig cfg) {
  data.validate();
  const std::vector<double> y = data.log_rates();
  cfg.ages = data.ages;
  return fit_dlm(y, cfg);
}

Eigen::MatrixXd dlm_qx_draws(const DLMFit& fit, int max_age) {
  if (fit.states.empty()) throw DomainError("DLM fit has no draws");
  const auto& ages = fit.ages();
  const int first = ages.front();
  const int last = ages.back();
  if (max_age < first) throw DomainError("max_age below the first fitted age");
  const auto draws = static_cast<Eigen::Index>(fit.states.size());
  const Eigen::Index cols = max_age - first + 1;
  const Eigen::Index fitted_cols = std::min<Eigen::Index>(cols, static_cast<Eigen::Index>(ages.size()));
  const DLMConfig& cfg = fit.config;

  Eigen::MatrixXd q(draws, cols);
  for (Eigen::Index d = 0; d < draws; ++d) {
    const Eigen::MatrixXd& theta = fit.states[static_cast<std::size_t>(d)];
    for (Eigen::Index j = 0; j < fitted_cols; ++j) q(d, j) = clamp_q(std::exp(cfg.F.dot(theta.row(j))));
    Eigen::VectorXd state = theta.row(theta.rows() - 1).transpose();
    for (int age = last + 1; age <= max_age; ++age) {
      state = cfg.G * state;
      q(d, age - first) = clamp_q(std::exp(cfg.F.dot(state)));
    }
  }
  return q;
}

std::vector<std::pair<int, double>> dlm_fitted(const DLMFit& fit, std::span<const int> ages) {
  const auto& fitted_ages = fit.ages();
  std::vector<Eigen::Index> idx;
  for (int age : ages) {
    if (age < fitted_ages.front() || age > fitted_ages.back()) {
      throw DomainError("age " + std::to_string(age) + " outside the fitted range");
    }
    idx.push_back(age - fitted_ages.front());
  }
  const Eigen::MatrixXd q = dlm_qx_draws(fit, fitted_ages.back());
  std::vector<std::pair<int, double>> out;
  std::vector<double> col(static_cast<std::size_t>(q.rows()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    for (Eigen::Index d = 0; d < q.rows(); ++d) col[static_cast<std::size_t>(d)] = q(d, idx[j]);
    out.emplace_back(ages[j], quantile(col, 0.5));
  }
  return out;
}

std::vector<QxInterval> dlm_qx_interval(const DLMFit& fit, std::span<const int> ages, double level, Rng& rng) {
  if (fit.states.empty()) throw DomainError("DLM fit has no draws");
  const auto& fitted_ages = fit.ages();
  const DLMConfig& cfg = fit.config;
  std::vector<QxInterval> out;
  std::vector<double> col(fit.states.size());
  for (int age : ages) {
    if (age < fitted_ages.front() || age > fitted_ages.back()) {
      throw DomainError("age " + std::to_string(age) + " outside the fitted range");
    }
    const Eigen::Index j = age - fitted_ages.front();
    for (std::size_t d = 0; d < fit.states.size(); ++d) {
      const double mu = cfg.F.dot(fit.states[d].row(j));
      col[d] = clamp_q(std::exp(mu + std::sqrt(fit.V_samples[d]) * rnorm(rng)));
    }
    const Interval iv = equal_tailed(col, level);
    out.push_back({age, iv.lower, iv.upper, level});
  }
  return out;
}

ExpectancyTable dlm_expectancy(const DLMFit& fit, std::span<const int> from_ages, int max_age, double level) {
  if (from_ages.empty()) throw DomainError("expectancy: no ages requested");
  const int first = fit.ages().front();
  for (int age : from_ages) {
    if (age < first || age > max_age) throw DomainError("expectancy: age " + std::to_string(age) + " outside the table");
  }
  std::vector<int> table_ages;
  for (int a = first; a <= max_age; ++a) table_ages.push_back(a);
  return expectancy_posterior(dlm_qx_draws(fit, max_age), table_ages, from_ages, level);
}

DLMForecast dlm_predict(const DLMFit& fit, int h, double level, Rng& rng) {
  if (h < 0) throw DomainError("forecast horizon must be non-negative");
  if (fit.states.empty()) throw DomainError("DLM fit has no draws");
  const DLMConfig& cfg = fit.config;
  const auto draws = static_cast<Eigen::Index>(fit.states.size());
  DLMForecast out;
  out.level = level;
  out.log_mean.resize(draws, h);
  out.y_draws.resize(draws, h);
  if (h == 0) return out;

  for (Eigen::Index d = 0; d < draws; ++d) {
    const auto i = static_cast<std::size_t>(d);
    const Eigen::MatrixXd& theta = fit.states[i];
    Eigen::VectorXd mean_state = theta.row(theta.rows() - 1).transpose();
    Eigen::VectorXd state = mean_state;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(state.size());
    for (int j = 0; j < h; ++j) {
      mean_state = cfg.G * mean_state;
      state = cfg.G * state;
      if (!fit.W_last[i].isZero(0.0)) state += rmvnorm(rng, zero, fit.W_last[i]);
      out.log_mean(d, j) = cfg.F.dot(mean_state);
      out.y_draws(d, j) = cfg.F.dot(state) + std::sqrt(fit.V_samples[i]) * rnorm(rng);
    }
  }

  std::vector<double> col(static_cast<std::size_t>(draws));
  for (int j = 0; j < h; ++j) {
    for (Eigen::Index d = 0; d < draws; ++d) col[static_cast<std::size_t>(d)] = clamp_q(std::exp(out.y_draws(d, j)));
    std::sort(col.begin(), col.end());
    out.ages.push_back(fit.ages().back() + j + 1);
    out.qx_fitted.push_back(sorted_quantile(col, 0.5));
    out.qx_lower.push_back(sorted_quantile(col, 0.5 * (1.0 - level)));
    out.qx_upper.push_back(sorted_quantile(col, 0.5 * (1.0 + level)));
  }
  return out;
}

std::vector<std::pair<std::string, PosteriorSummary>> dlm_summary(const DLMFit& fit) {
  std::vector<std::pair<std::string, PosteriorSummary>> out;
  if (fit.states.empty()) return out;
  out.emplace_back("sigma2", summarize_chain(fit.V_samples));
  const Eigen::Index p = fit.config.state_dim();
  std::vector<double> col(fit.states.size());
  for (Eigen::Index k = 0; k < p; ++k) {
    const std::string name = k == 0 ? "mu" : (k == 1 ? "beta" : "theta" + std::to_string(k));
    for (std::size_t j = 0; j < fit.ages().size(); ++j) {
      for (std::size_t d = 0; d < fit.states.size(); ++d) col[d] = fit.states[d](static_cast<Eigen::Index>(j), k);
      out.emplace_back(name + "[" + std::to_string(fit.ages()[j]) + "]", summarize_chain(col));
    }
  }
  return out;
}

}  // namespace graduate
