#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace graduate {

// Every stochastic routine takes its stream explicitly; nothing is global.
using Rng = std::mt19937_64;

inline double runif(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double rnorm(Rng& rng, double mean = 0.0, double sd = 1.0) {
  return mean + sd * std::normal_distribution<double>(0.0, 1.0)(rng);
}

// Inverse-gamma with density proportional to x^{-shape-1} exp(-scale/x).
inline double rinvgamma(Rng& rng, double shape, double scale) {
  return scale / std::gamma_distribution<double>(shape, 1.0)(rng);
}

// Draw from N(mean, cov). A covariance that fails Cholesky is symmetrised and
// given a 1e-10 diagonal jitter once; NumericalError if that is still not SPD.
Eigen::VectorXd rmvnorm(Rng& rng, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

}  // namespace graduate
