#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graduate/lifetable.hpp"
#include "graduate/random.hpp"

namespace graduate {

// Dynamic linear model over ages: y_x = F theta_x + v_x, theta_x = G theta_{x-1} + w_x,
// with W_x implied by a single discount factor.
struct DLMConfig {
  Eigen::RowVectorXd F = Eigen::RowVector2d(1.0, 0.0);
  Eigen::MatrixXd G = (Eigen::Matrix2d() << 1.0, 1.0, 0.0, 1.0).finished();
  double delta = 0.85;
  Eigen::VectorXd m0 = Eigen::Vector2d::Zero();
  Eigen::MatrixXd C0 = 100.0 * Eigen::Matrix2d::Identity();
  double sig2_shape = 0.01;
  double sig2_scale = 0.01;
  int iterations = 5000;
  int burn_in = 3000;
  int thin = 1;
  std::vector<int> ages;
  std::uint64_t seed = 1;

  Eigen::Index state_dim() const { return G.rows(); }
  void validate() const;
};

// Moments of the forward filter, one entry per observation.
struct FilterMoments {
  std::vector<Eigen::VectorXd> a, m;
  std::vector<Eigen::MatrixXd> R, C;
  std::vector<double> f, Q;
};

FilterMoments kalman_filter(std::span<const double> y, const DLMConfig& cfg, double V);

// One path theta_{1:n} (n x p) from the joint smoothing distribution.
Eigen::MatrixXd ffbs_sample(const FilterMoments& filt, const DLMConfig& cfg, Rng& rng);

struct DLMFit {
  std::vector<Eigen::MatrixXd> states;   // per draw, n_ages x p
  std::vector<double> V_samples;
  std::vector<Eigen::MatrixXd> W_last;   // discount-implied W at the last age, per draw
  std::vector<double> y;
  DLMConfig config;

  std::size_t draws() const { return states.size(); }
  const std::vector<int>& ages() const { return config.ages; }
};

DLMFit fit_dlm(std::span<const double> y, const DLMConfig& cfg);
// Fits log(D/E); DataError naming ages with zero deaths or exposure. Ages in
// `cfg` are replaced by the data's ages.
DLMFit fit_dlm(const MortalityData& data, DLMConfig cfg);

// Per draw exp(mu_x) over ages first..max_age, clamped to (0, 1). Ages past the
// last fitted one follow the draw's expected state path G^j theta_n.
Eigen::MatrixXd dlm_qx_draws(const DLMFit& fit, int max_age);

std::vector<std::pair<int, double>> dlm_fitted(const DLMFit& fit, std::span<const int> ages);

// Predictive interval of exp(y_x) with y_x ~ N(mu_x, V) per draw.
std::vector<QxInterval> dlm_qx_interval(const DLMFit& fit, std::span<const int> ages, double level, Rng& rng);

ExpectancyTable dlm_expectancy(const DLMFit& fit, std::span<const int> from_ages, int max_age = 110,
                               double level = 0.95);

struct DLMForecast {
  std::vector<int> ages;
  std::vector<double> qx_fitted, qx_lower, qx_upper;
  double level = 0.95;
  Eigen::MatrixXd log_mean;  // draws x h, F G^j theta_n
  Eigen::MatrixXd y_draws;   // draws x h, predictive log rates
};

// h steps past the last age with W frozen at its last in-sample value.
DLMForecast dlm_predict(const DLMFit& fit, int h, double level, Rng& rng);

// Mean, sd and quantiles of V and of mu/beta at each age.
std::vector<std::pair<std::string, PosteriorSummary>> dlm_summary(const DLMFit& fit);

}  // namespace graduate
