#pragma once

#include <array>
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

// Heligman-Pollard parameters. The infant term (A, B, C) is absent for
// reduced fits; K only exists for count models and sigma2 only for lognormal.
struct HPParams {
  std::optional<double> A, B, C;
  double D = 0.0, E = 0.0, F = 0.0, G = 0.0, H = 0.0;
  std::optional<double> K;
  std::optional<double> sigma2;

  bool reduced() const { return !A.has_value(); }

  // DomainError naming the first parameter outside its domain.
  void validate() const;
};

// Parameter slots in sampler order. K follows H so the first eight match the
// order of user-supplied prior means/variances.
enum HPIndex : int { kA = 0, kB, kC, kD, kE, kF, kG, kH, kK, kHPSlots };
const char* hp_param_name(int slot);

struct HPConfig {
  ObservationModel model = ObservationModel::lognormal;
  int iterations = 50000;
  std::optional<int> burn_in;  // defaults to iterations / 5
  int thin = 10;
  // Prior means on the natural scale and variances on the unconstrained
  // (logit/log) scale, in A..H order. Unset entries use mean 0 on the
  // unconstrained scale and variance 100.
  std::array<std::optional<double>, 8> prior_means{};
  std::array<std::optional<double>, 8> prior_variances{};
  std::optional<HPParams> inits;
  // Random-walk step sizes on the unconstrained scale, A..H then K.
  std::optional<std::vector<double>> proposal_scales;
  bool adapt = true;  // tune step sizes during burn-in
  bool reduced_model = false;
  double sigma2_shape = 0.01;
  double sigma2_scale = 0.01;
  std::uint64_t seed = 1;

  int effective_burn_in() const { return burn_in.value_or(iterations / 5); }
  void validate() const;
};

struct HPFit {
  std::vector<HPParams> samples;
  MortalityData data;
  HPConfig config;
  double acceptance_rate = 0.0;
  std::vector<double> final_scales;

  ObservationModel model() const { return config.model; }
  bool reduced() const { return config.reduced_model; }
};

// Odds form: A^{(x+B)^C} + D exp(-E (ln(x/F))^2) + G H^x. The hump term is 0
// at x = 0 and the infant term is dropped for reduced parameter sets.
double hp_logodds_curve(const HPParams& p, double x);

// Count-model form with K: infant + hump + G H^x / (1 + K G H^x), clamped into
// [0, 1 - 1e-12]. DomainError if the denominator is not positive.
double hp_qx_curve(const HPParams& p, double x);

// The three additive components of the odds curve (infant, hump, senescent).
std::array<double, 3> hp_components(const HPParams& p, double x);

// Curve value appropriate to the model: odds for lognormal, the K-damped
// rate curve for binomial/poisson.
double hp_curve(ObservationModel model, const HPParams& p, double x);

// Map a curve value to a death probability: f/(1+f) for lognormal odds,
// 1 - exp(-m) for the count-model curve read as a central rate.
double hp_curve_to_qx(ObservationModel model, double curve_value);

// Log-likelihood given per-age curve values (odds for lognormal, q for count
// models). Exposed separately so likelihood code can be checked without a
// parameter vector that produces a particular curve.
double hp_loglikelihood_curve(ObservationModel model, const MortalityData& data,
                              std::span<const double> curve, double sigma2);

double hp_loglikelihood(ObservationModel model, const MortalityData& data, const HPParams& p);

// Deterministic starting values from the raw data.
HPParams hp_initial_values(ObservationModel model, const MortalityData& data, bool reduced);

HPFit fit_hp(const MortalityData& data, const HPConfig& config);

// Per-draw death probabilities at `ages` (draws x ages). Ages outside the
// fitted range are extrapolated with the same formula.
Eigen::MatrixXd hp_qx_draws(const HPFit& fit, std::span<const int> ages);

// Posterior median q per age.
std::vector<std::pair<int, double>> hp_fitted(const HPFit& fit, std::span<const int> ages);

// Composition-sampled predictive interval. For count models exposures default
// to the fitted data where the age is covered.
std::vector<QxInterval> hp_qx_interval(const HPFit& fit, std::span<const int> ages,
                                       std::optional<std::span<const double>> exposures,
                                       double level, Rng& rng);

// Curtate expectancy with the curve extrapolated to `max_age`.
ExpectancyTable hp_expectancy(const HPFit& fit, std::span<const int> from_ages, int max_age = 110,
                              double level = 0.95);

// Posterior summaries of the sampled parameters (sigma2/K included when present).
std::vector<std::pair<std::string, PosteriorSummary>> hp_summary(const HPFit& fit);

}  // namespace graduate
