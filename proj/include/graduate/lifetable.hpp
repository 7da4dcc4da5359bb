#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graduate/random.hpp"

namespace graduate {

// Deaths and exposures for one population and period. Deaths are reals since
// adjusted HMD counts are fractional.
struct MortalityData {
  std::vector<int> ages;
  std::vector<double> exposures;
  std::vector<double> deaths;

  std::size_t size() const { return ages.size(); }
  int first_age() const { return ages.front(); }
  int last_age() const { return ages.back(); }

  // Throws DataError unless ages are contiguous with step 1, lengths agree,
  // deaths are >= 0 and exposures are >= 0.
  void validate() const;

  // D/E per age; DataError naming the age when the exposure is not positive.
  std::vector<double> raw_rates() const;

  // log(D/E) per age; DataError naming every age with zero deaths or exposure.
  std::vector<double> log_rates() const;

  // Index of `age` in `ages`, or nullopt.
  std::optional<std::size_t> index_of(int age) const;
};

struct PosteriorSummary {
  double mean = 0.0;
  double sd = 0.0;
  std::map<double, double> quantiles;

  double quantile(double level) const { return quantiles.at(level); }
};

struct QxInterval {
  int age = 0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

struct ExpectancyTable {
  std::vector<int> ages;
  std::vector<double> point;
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
  int max_age = 0;
};

enum class ObservationModel { lognormal, binomial, poisson };

std::string to_string(ObservationModel model);
ObservationModel parse_observation_model(const std::string& name);

// q = 1 - exp(-m) under a constant force of mortality over the year of age.
double mx_to_qx(double m);
double qx_to_mx(double q);

// e_x = sum_{k>=1} prod_{i<k} (1 - q_{x+i}), truncated at the end of `qx`.
double curtate_expectancy(std::span<const double> qx, std::size_t from);

// Type-7 quantile (linear interpolation between order statistics) of an
// already sorted sample.
double sorted_quantile(std::span<const double> sorted, double level);
double quantile(std::vector<double> values, double level);

struct Interval {
  double lower;
  double upper;
};
// Equal-tailed interval: quantiles (1-level)/2 and (1+level)/2.
Interval equal_tailed(std::vector<double> values, double level);

// 0.025, 0.25, 0.5, 0.75, 0.975
std::span<const double> default_levels();

// Mean, sd (n-1 denominator) and type-7 quantiles at `levels`.
PosteriorSummary summarize_chain(std::span<const double> samples,
                                 std::span<const double> levels = default_levels());

// Median and equal-tailed interval of per-draw curtate expectancies.
// `qx_draws` is draws x ages over the table ages `table_ages` (contiguous);
// the table ends at its last column, which fixes omega.
ExpectancyTable expectancy_posterior(const Eigen::MatrixXd& qx_draws,
                                     std::span<const int> table_ages,
                                     std::span<const int> from_ages,
                                     double level = 0.95);

// Predictive q intervals by composition: one observation per draw and age
// from the observation model, mapped to the q scale.
//
// `curve` is draws x ages. For lognormal it holds fitted odds f and
// `sigma2` the per-draw variance; log odds ~ N(log f, sigma2) and q = o/(1+o).
// For binomial/poisson it holds the fitted curve value; deaths are drawn from
// Binomial(round E, curve) or Poisson(E * curve) and q = 1 - exp(-D/E).
// Count models need an exposure for every age; DataError otherwise.
std::vector<QxInterval> composition_qx_interval(ObservationModel model,
                                                const Eigen::MatrixXd& curve,
                                                std::span<const double> sigma2,
                                                std::span<const int> ages,
                                                std::optional<std::span<const double>> exposures,
                                                double level, Rng& rng);

// Per-column type-7 quantile of a draws x columns matrix.
Eigen::VectorXd column_quantile(const Eigen::MatrixXd& draws, double level);

}  // namespace graduate
