#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "graduate/errors.hpp"
#include "graduate/lifetable.hpp"
#include "oracles.hpp"

using namespace graduate;

TEST_CASE("mx_to_qx and qx_to_mx") {
  CHECK(mx_to_qx(0.0) == 0.0);
  CHECK(mx_to_qx(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(mx_to_qx(0.1) - oracle::one_minus_exp_neg(0.1)) < 1e-16);
  CHECK(qx_to_mx(0.0) == 0.0);
  CHECK(qx_to_mx(0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(mx_to_qx(-0.1), DomainError);
  CHECK_THROWS_AS(qx_to_mx(1.0), DomainError);
  CHECK_THROWS_AS(qx_to_mx(-0.01), DomainError);

  for (int i = 0; i <= 1000; ++i) {
    const double m = 10.0 * i / 1000.0;
    const double back = qx_to_mx(mx_to_qx(m));
    CHECK(std::abs(back - m) <= 1e-12 * std::max(m, 1e-300));
  }
}

TEST_CASE("curtate expectancy") {
  const std::vector<double> ones(5, 1.0);
  CHECK(curtate_expectancy(ones, 2) == 0.0);
  const std::vector<double> halves{0.5, 0.5, 0.5};
  CHECK(curtate_expectancy(halves, 0) == doctest::Approx(0.875));
  const std::vector<double> step{0.0, 0.0, 0.0, 1.0};
  CHECK(curtate_expectancy(step, 0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(curtate_expectancy(step, 4), DomainError);

  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const auto len = 1 + static_cast<std::size_t>(runif(rng) * 20);
    std::vector<double> q(len);
    for (auto& v : q) v = runif(rng);
    const auto from = static_cast<std::size_t>(runif(rng) * static_cast<double>(len));
    CHECK(std::abs(curtate_expectancy(q, from) - oracle::expectancy(q, from)) <= 1e-12);

    // Lowering any q never lowers the expectancy.
    auto lowered = q;
    const auto i = static_cast<std::size_t>(runif(rng) * static_cast<double>(len));
    lowered[i] *= runif(rng);
    CHECK(curtate_expectancy(lowered, from) >= curtate_expectancy(q, from));
  }
}

TEST_CASE("summaries") {
  const std::vector<double> c(10, 2.5);
  const PosteriorSummary s = summarize_chain(c);
  CHECK(s.mean == 2.5);
  CHECK(s.sd == 0.0);
  for (const auto& [level, v] : s.quantiles) CHECK(v == 2.5);

  const std::vector<double> five{1, 2, 3, 4, 5};
  const PosteriorSummary f = summarize_chain(five);
  CHECK(f.mean == 3.0);
  CHECK(f.sd == doctest::Approx(std::sqrt(10.0 / 4.0)));
  CHECK(f.quantile(0.5) == 3.0);
  CHECK(f.quantile(0.025) == doctest::Approx(1.1));

  const std::vector<double> pair{0, 1};
  const std::vector<double> half{0.5};
  CHECK(summarize_chain(pair, half).quantile(0.5) == 0.5);
  CHECK_THROWS(summarize_chain(std::vector<double>{}));

  Rng rng(3);
  std::vector<double> x(101);
  for (auto& v : x) v = rnorm(rng);
  const PosteriorSummary a = summarize_chain(x);
  std::shuffle(x.begin(), x.end(), rng);
  const PosteriorSummary b = summarize_chain(x);
  CHECK(a.mean == b.mean);
  CHECK(a.sd == b.sd);
  CHECK(a.quantiles == b.quantiles);
  CHECK(a.quantile(0.025) <= a.quantile(0.5));
  CHECK(a.quantile(0.5) <= a.quantile(0.975));
}

TEST_CASE("expectancy_posterior") {
  Eigen::MatrixXd one(1, 3);
  one << 0.1, 0.2, 1.0;
  const std::vector<int> ages{60, 61, 62};
  const std::vector<int> from{60};
  const ExpectancyTable t = expectancy_posterior(one, ages, from);
  CHECK(t.lower[0] == t.point[0]);
  CHECK(t.upper[0] == t.point[0]);
  CHECK(t.point[0] == doctest::Approx(0.9 + 0.9 * 0.8));

  Eigen::MatrixXd same(5, 3);
  for (int d = 0; d < 5; ++d) same.row(d) = one.row(0);
  const ExpectancyTable u = expectancy_posterior(same, ages, from);
  CHECK(u.upper[0] - u.lower[0] == 0.0);

  CHECK_THROWS(expectancy_posterior(Eigen::MatrixXd(0, 3), ages, from));
  const std::vector<int> outside{70};
  CHECK_THROWS_AS(expectancy_posterior(one, ages, outside), DomainError);
}

TEST_CASE("composition intervals") {
  Rng rng(5);
  const std::vector<int> ages{0, 1, 2};
  Eigen::MatrixXd curve(400, 3);
  std::vector<double> sigma2(400);
  for (int d = 0; d < 400; ++d) {
    curve.row(d) << 0.01 * (1 + 0.1 * rnorm(rng)), 0.002, 0.001;
    sigma2[static_cast<std::size_t>(d)] = 0.01;
  }

  SUBCASE("nesting") {
    Rng r1(9), r2(9);
    const auto wide = composition_qx_interval(ObservationModel::lognormal, curve, sigma2, ages, std::nullopt, 0.95, r1);
    const auto narrow = composition_qx_interval(ObservationModel::lognormal, curve, sigma2, ages, std::nullopt, 0.5, r2);
    for (std::size_t j = 0; j < ages.size(); ++j) {
      CHECK(wide[j].lower <= narrow[j].lower);
      CHECK(narrow[j].upper <= wide[j].upper);
      CHECK(narrow[j].lower <= narrow[j].upper);
    }
  }
  SUBCASE("level zero collapses to the median") {
    const auto iv = composition_qx_interval(ObservationModel::lognormal, curve, sigma2, ages, std::nullopt, 0.0, rng);
    for (const auto& r : iv) CHECK(r.lower == r.upper);
  }
  SUBCASE("zero variance and identical draws give the curve value") {
    Eigen::MatrixXd fixed = Eigen::MatrixXd::Constant(10, 3, 0.02);
    const std::vector<double> zero(10, 0.0);
    const auto iv = composition_qx_interval(ObservationModel::lognormal, fixed, zero, ages, std::nullopt, 0.95, rng);
    for (const auto& r : iv) {
      CHECK(r.lower == doctest::Approx(0.02 / 1.02).epsilon(1e-14));
      CHECK(r.upper == doctest::Approx(0.02 / 1.02).epsilon(1e-14));
    }
  }
  SUBCASE("count models need exposures") {
    CHECK_THROWS_AS(composition_qx_interval(ObservationModel::poisson, curve, sigma2, ages, std::nullopt, 0.95, rng),
                    DataError);
    const std::vector<double> partial{1000.0, 0.0, 1000.0};
    try {
      composition_qx_interval(ObservationModel::binomial, curve, sigma2, ages, std::span<const double>(partial), 0.95, rng);
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
    const std::vector<double> ex{1e5, 1e5, 1e5};
    const auto iv = composition_qx_interval(ObservationModel::poisson, curve, sigma2, ages, std::span<const double>(ex), 0.95, rng);
    for (const auto& r : iv) {
      CHECK(r.lower <= r.upper);
      CHECK(r.lower >= 0.0);
      CHECK(r.upper < 1.0);
    }
  }
}

TEST_CASE("mortality data validation") {
  MortalityData d{{0, 1, 3}, {1, 1, 1}, {0, 0, 0}};
  CHECK_THROWS_AS(d.validate(), DataError);
  MortalityData z{{0, 1, 2}, {10, 10, 10}, {1, 0, 2}};
  try {
    z.log_rates();
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("age(s) 1") != std::string::npos);
  }
}
