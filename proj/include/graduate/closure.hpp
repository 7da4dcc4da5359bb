#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graduate/dlm.hpp"
#include "graduate/hp.hpp"
#include "graduate/lifetable.hpp"
#include "graduate/random.hpp"

namespace graduate {

enum class ClosingMethod { hp, plateau, linear, gompertz };

std::string to_string(ClosingMethod method);
ClosingMethod parse_closing_method(const std::string& name);

struct ClosureConfig {
  ClosingMethod method = ClosingMethod::hp;
  std::optional<int> x0;  // default: last fitted age
  int max_age = 120;
  int k = 7;
  std::optional<std::vector<double>> weights;  // 2k + 1 entries; default ramp 0..1
  // Data for ages new_data_first_age, new_data_first_age + 1, ...
  std::optional<std::vector<double>> new_exposures, new_deaths;
  std::optional<std::vector<double>> new_log_rates;  // DLM sources
  std::optional<int> new_data_first_age;             // default x0 + 1
  int sir_proposals = 100000;
};

struct ClosedTable {
  std::vector<int> ages;   // first fitted age .. max_age
  Eigen::MatrixXd qx;      // draws x ages
  ClosingMethod method = ClosingMethod::hp;
  std::string source;      // "hp" or "dlm"
  int x0 = 0;
  int k = 0;
};

struct GompertzParams {
  double A = 0.0;
  double B = 0.0;
};

// Force of mortality A e^{Bx} and q = 1 - exp(-A e^{Bx}).
double gompertz_hazard(const GompertzParams& p, double x);
double gompertz_qx(const GompertzParams& p, double x);

// Multinomial resampling of n indices with probabilities proportional to
// exp(log_weights). NumericalError when no weight is positive and finite.
std::vector<std::size_t> sir_resample(std::span<const double> log_weights, std::size_t n, Rng& rng);

struct GompertzPrior {
  double log_A_min = std::log(1e-7), log_A_max = std::log(1e-2);
  double B_min = 0.01, B_max = 0.25;
};

// SIR over the uniform prior box. A first batch comes from the prior; when
// its effective sample size is small, later batches come from a defensive
// mixture of a Gaussian fitted to the weighted batch and the prior, weighted
// by likelihood x prior / mixture density.
std::vector<GompertzParams> fit_gompertz_sir(const std::function<double(const GompertzParams&)>& loglik,
                                             int n_proposals, int n_resample, Rng& rng,
                                             const GompertzPrior& prior = {});

// Poisson likelihood of deaths given rates E_x mu(x).
std::vector<GompertzParams> fit_gompertz_sir(std::span<const int> ages, std::span<const double> exposures,
                                             std::span<const double> deaths, int n_proposals, int n_resample,
                                             Rng& rng, const GompertzPrior& prior = {});

struct LinearClosingDraw {
  double beta0, beta1, sigma2;
};

// Flat-prior Normal-inverse-gamma posterior for log q = b0 + b1 x + e.
// Returns `n_draws` posterior draws; needs at least 3 points and 2 distinct ages.
std::vector<LinearClosingDraw> fit_linear_closing(std::span<const int> ages, std::span<const double> log_q,
                                                  int n_draws, Rng& rng);

ClosedTable close_table(const HPFit& fit, const ClosureConfig& cfg, Rng& rng);
ClosedTable close_table(const DLMFit& fit, const ClosureConfig& cfg, Rng& rng);

ExpectancyTable closed_expectancy(const ClosedTable& table, std::span<const int> from_ages, double level = 0.95);

}  // namespace graduate
