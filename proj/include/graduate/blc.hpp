#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graduate/lifetable.hpp"
#include "graduate/random.hpp"

namespace graduate {

// Log central rates, ages in rows and years in columns.
struct LogMortalityMatrix {
  Eigen::MatrixXd values;
  std::vector<int> ages;
  std::vector<int> years;

  void validate() const;
};

struct BLCPrior {
  std::optional<Eigen::VectorXd> alpha_mean;  // default: row means of Y
  double alpha_var = 10.0;
  std::optional<Eigen::VectorXd> beta_mean;   // default: 1 / n_ages
  double beta_var = 10.0;
  double theta_mean = 0.0;
  double theta_var = 10.0;
  double kappa1_var = 1e4;  // diffuse prior on the first period index
  double eps_shape = 0.01, eps_scale = 0.01;
  double omega_shape = 0.01, omega_scale = 0.01;
};

struct BLCInit {
  std::optional<Eigen::VectorXd> alpha, beta, kappa;
  std::optional<double> theta, sig2_eps, sig2_omega;
};

struct BLCConfig {
  BLCPrior prior;
  BLCInit init;
  int numit = 2000;
  int warmup = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

struct BLCFit {
  Eigen::MatrixXd alpha;   // draws x ages
  Eigen::MatrixXd beta;    // draws x ages
  Eigen::MatrixXd kappa;   // draws x years
  Eigen::VectorXd theta;   // drift, per draw
  Eigen::VectorXd sig2_eps, sig2_omega;
  LogMortalityMatrix data;

  Eigen::Index draws() const { return alpha.rows(); }
};

// Parameters of one draw, used by the normalization helper.
struct BLCState {
  Eigen::VectorXd alpha, beta, kappa;
  double theta = 0.0;
  double sig2_eps = 1.0;
  double sig2_omega = 1.0;
};

// Shift kappa to sum 0 and scale beta to sum 1 with compensating changes to
// alpha, kappa, theta and sig2_omega; alpha + beta kappa' is unchanged.
void blc_normalize(BLCState& s);

BLCFit fit_blc(const LogMortalityMatrix& Y, const BLCConfig& cfg);

struct BLCSurface {
  Eigen::MatrixXd mean, lower, upper;  // ages x years, rate scale
  std::vector<int> ages, years;
  double level = 0.95;
};

// Mean and equal-tailed interval of exp(alpha_x + beta_x kappa_t) per cell.
BLCSurface blc_fitted(const BLCFit& fit, double level = 0.95);

struct ImprovementRow {
  int age;
  double improvement, lower, upper;
};

// 1 - exp(beta_x theta) per draw, summarized by mean and equal-tailed interval.
std::vector<ImprovementRow> blc_improvement(const BLCFit& fit, double cred = 0.95);

struct BLCForecast {
  int h = 0;
  std::vector<int> ages, years;
  std::vector<Eigen::MatrixXd> y_draws;  // per draw, ages x h
  Eigen::VectorXd kappa_last;            // per draw, kappa at the last forecast year
};

// Posterior predictive h years past the data. Draws are generated year by
// year across all posterior draws, so predicting a then continuing b years
// uses the stream exactly as predicting a + b does.
BLCForecast blc_predict(const BLCFit& fit, int h, Rng& rng);
BLCForecast blc_predict_continue(const BLCFit& fit, const BLCForecast& previous, int h, Rng& rng);

BLCSurface blc_forecast_summary(const BLCForecast& fc, double level = 0.95);

struct BLCExpectancy {
  std::vector<int> ages, years;
  Eigen::MatrixXd point, lower, upper;  // at_ages x years
  double level = 0.95;
};

// Curtate expectancy per year with q = 1 - exp(-rate), truncated at the last
// fitted age.
BLCExpectancy blc_expectancy(const BLCFit& fit, std::span<const int> at_ages, double level = 0.95);
BLCExpectancy blc_expectancy(const BLCForecast& fc, std::span<const int> at_ages, double level = 0.95);

std::vector<std::pair<std::string, PosteriorSummary>> blc_summary(const BLCFit& fit);

}  // namespace graduate
