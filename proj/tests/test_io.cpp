#include <doctest.h>

#include <cmath>
#include <sstream>

#include "graduate/csv.hpp"
#include "graduate/errors.hpp"
#include "graduate/heatmap.hpp"
#include "graduate/serialize.hpp"

using namespace graduate;

namespace {

std::string hmd_like(int year_from, int year_to, int age_to, bool open_group = false) {
  std::ostringstream s;
  s << "Year,Age,Ex.Female,Ex.Male,Ex.Total,Dx.Female,Dx.Male,Dx.Total\n";
  for (int y = year_from; y <= year_to; ++y) {
    for (int a = 0; a <= age_to; ++a) {
      const double e = 1e5 * std::exp(-0.02 * a);
      const double d = e * std::exp(-9.0 + 0.085 * a - 0.01 * (y - year_from));
      s << y << ',' << a << (open_group && a == age_to ? "+" : "") << ',' << e / 2 << ',' << e / 2 << ',' << e << ','
        << d / 2 << ',' << d / 2 << ',' << d << '\n';
    }
  }
  return s.str();
}

template <typename F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("mortality CSV") {
  SUBCASE("one year") {
    std::istringstream in(hmd_like(2019, 2019, 80));
    const MortalityData d = parse_mortality_csv(in, DatasetSpec{});
    CHECK(d.size() == 81);
    CHECK(d.first_age() == 0);
    CHECK(d.exposures[0] == 1e5);
  }
  SUBCASE("open age group and filters") {
    std::istringstream in(hmd_like(2000, 2002, 110, true));
    DatasetSpec spec;
    spec.year = 2001;
    spec.series = Series::male;
    spec.ages = parse_range("100:110");
    const MortalityData d = parse_mortality_csv(in, spec);
    CHECK(d.ages.back() == 110);
    CHECK(d.size() == 11);
    CHECK(d.exposures[0] == doctest::Approx(5e4 * std::exp(-2.0)));
  }
  SUBCASE("several years need a selection") {
    std::istringstream in(hmd_like(2000, 2001, 5));
    CHECK_THROWS_AS(parse_mortality_csv(in, DatasetSpec{}), ConfigError);
  }
  SUBCASE("row numbers in errors") {
    std::istringstream bad("Year,Age,Ex.Total,Dx.Total\n2000,0,100,1\n2000,1,abc,1\n");
    CHECK(error_of([&] { parse_mortality_csv(bad, DatasetSpec{}); }).find("row 3") != std::string::npos);
    std::istringstream dup("Year,Age,Ex.Total,Dx.Total\n2000,0,100,1\n2000,0,100,1\n");
    CHECK(error_of([&] { parse_mortality_csv(dup, DatasetSpec{}); }).find("duplicate") != std::string::npos);
    std::istringstream missing("Year,Age,Ex.Total\n2000,0,100\n");
    CHECK_THROWS_AS(parse_mortality_csv(missing, DatasetSpec{}), DataError);
    std::istringstream gap("Year,Age,Ex.Total,Dx.Total\n2000,0,100,1\n2000,2,100,1\n");
    CHECK_THROWS_AS(parse_mortality_csv(gap, DatasetSpec{}), DataError);
  }
  SUBCASE("ranges") {
    CHECK(parse_range("60:89") == std::make_pair(60, 89));
    CHECK(parse_range("7") == std::make_pair(7, 7));
    CHECK_THROWS_AS(parse_range("9:3"), ConfigError);
    CHECK_THROWS_AS(parse_range("a:3"), ConfigError);
    CHECK_THROWS_AS(parse_series("Other"), ConfigError);
  }
  SUBCASE("log-rate matrix") {
    std::istringstream in(hmd_like(1990, 1999, 90));
    DatasetSpec spec;
    spec.ages = parse_range("60:89");
    const LogMortalityMatrix Y = parse_log_mortality_matrix(in, spec);
    CHECK(Y.values.rows() == 30);
    CHECK(Y.values.cols() == 10);
    CHECK(Y.values(0, 0) == doctest::Approx(-9.0 + 0.085 * 60));
    CHECK(Y.values(0, 9) == doctest::Approx(-9.0 + 0.085 * 60 - 0.09));
  }
  SUBCASE("zero deaths are reported by age") {
    std::istringstream in("Year,Age,Ex.Total,Dx.Total\n2000,0,100,1\n2000,1,100,0\n2000,2,100,1\n");
    const MortalityData d = parse_mortality_csv(in, DatasetSpec{});
    CHECK(error_of([&] { d.log_rates(); }).find("1") != std::string::npos);
  }
}

TEST_CASE("JSON documents") {
  SUBCASE("HP round trip is exact") {
    HPFit fit;
    fit.data = MortalityData{{0, 1, 2}, {100.25, 200.5, 300.125}, {1.5, 0.1, 1.0 / 3.0}};
    fit.config.iterations = 123;
    fit.config.seed = 99;
    fit.acceptance_rate = 0.3141592653589793;
    HPParams p;
    p.A = 1.0 / 3.0;
    p.B = 0.1;
    p.C = 0.2;
    p.D = 1e-4;
    p.E = 7.0;
    p.F = 22.0;
    p.G = std::nextafter(5e-5, 1.0);
    p.H = 1.1;
    p.sigma2 = 0.02;
    fit.samples = {p, p};
    const Json j = Json::parse(to_json(fit).dump());
    CHECK(document_kind(j) == "hp");
    const HPFit back = hp_fit_from_json(j);
    CHECK(back.samples.size() == 2);
    CHECK(back.samples[1].G == p.G);
    CHECK(back.samples[0].A == p.A);
    CHECK(!back.samples[0].K.has_value());
    CHECK(back.data.deaths == fit.data.deaths);
    CHECK(back.acceptance_rate == fit.acceptance_rate);
    CHECK(back.config.seed == 99);

    const Json lean = Json::parse(to_json(fit, false).dump());
    CHECK(lean.contains("summary"));
    CHECK_THROWS_AS(hp_fit_from_json(lean), DataError);
    CHECK(summary_from_json(lean.at("summary")).size() == hp_summary(fit).size());
  }
  SUBCASE("DLM and BLC round trips") {
    DLMFit d;
    d.config.ages = {50, 51};
    d.y = {-5.0, -4.9};
    d.states = {(Eigen::Matrix2d() << -5.0, 0.1, -4.9, 0.1).finished()};
    d.V_samples = {0.01};
    d.W_last = {Eigen::Matrix2d::Identity() * 1e-3};
    const DLMFit db = dlm_fit_from_json(Json::parse(to_json(d).dump()));
    CHECK(db.states[0] == d.states[0]);
    CHECK(db.W_last[0] == d.W_last[0]);
    CHECK(db.config.delta == d.config.delta);

    BLCFit b;
    b.alpha = Eigen::MatrixXd::Random(3, 2);
    b.beta = Eigen::MatrixXd::Random(3, 2);
    b.kappa = Eigen::MatrixXd::Random(3, 4);
    b.theta = Eigen::VectorXd::Random(3);
    b.sig2_eps = Eigen::VectorXd::Constant(3, 0.1);
    b.sig2_omega = Eigen::VectorXd::Constant(3, 0.2);
    b.data.values = Eigen::MatrixXd::Random(2, 4);
    b.data.ages = {60, 61};
    b.data.years = {1, 2, 3, 4};
    const BLCFit bb = blc_fit_from_json(Json::parse(to_json(b).dump()));
    CHECK(bb.kappa == b.kappa);
    CHECK(bb.data.values == b.data.values);
    CHECK_THROWS_AS(hp_fit_from_json(to_json(b)), DataError);
  }
  SUBCASE("closed tables") {
    ClosedTable t;
    t.ages = {90, 91};
    t.qx = Eigen::MatrixXd::Constant(2, 2, 0.3);
    t.method = ClosingMethod::gompertz;
    t.source = "dlm";
    t.x0 = 90;
    t.k = 1;
    const ClosedTable back = closed_table_from_json(Json::parse(to_json(t).dump()));
    CHECK(back.qx == t.qx);
    CHECK(back.method == ClosingMethod::gompertz);
  }
  SUBCASE("schema checks") {
    CHECK_THROWS_AS(document_kind(Json::object()), DataError);
    Json j = to_json(ClosedTable{{1}, Eigen::MatrixXd::Zero(1, 1)});
    j["schema_version"] = kSchemaVersion + 1;
    CHECK_THROWS_AS(document_kind(j), DataError);
  }
  SUBCASE("real formatting") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23}) CHECK(std::stod(format_real(v)) == v);
  }
  SUBCASE("tidy CSV") {
    std::ostringstream out;
    write_tidy_csv(out, {{60, std::nullopt, "q_median", 0.5}});
    CHECK(out.str().rfind("age,statistic,value\n", 0) == 0);
    std::ostringstream out2;
    write_tidy_csv(out2, {{60, 2020, "q_mean", 0.25}});
    CHECK(out2.str() == "age,year,statistic,value\n60,2020,q_mean,0.25\n");
  }
}

TEST_CASE("heat map grid") {
  ExpectancyTable t;
  t.ages = {60, 70};
  t.point = {20.0, 12.0};
  t.lower = {19.0, 11.0};
  t.upper = {21.0, 13.0};
  const std::vector<ExpectancyTable> one{t};
  const std::vector<std::string> label{"2019"};
  const auto cells = heatmap_grid(one, label);
  REQUIRE(cells.size() == 2);
  CHECK(cells[1].label == "2019");
  CHECK(cells[1].expectancy == 12.0);
  CHECK(cells[1].upper == 13.0);

  const std::vector<std::string> two{"a", "b"};
  CHECK_THROWS_AS(heatmap_grid(one, two), ConfigError);
  ExpectancyTable other = t;
  other.ages = {60, 75};
  const std::vector<ExpectancyTable> mixed{t, other};
  CHECK_THROWS_AS(heatmap_grid(mixed, two), DataError);

  BLCForecast fc;
  fc.h = 10;
  fc.ages = {60, 61, 62};
  for (int j = 1; j <= 10; ++j) fc.years.push_back(2020 + j);
  fc.y_draws.assign(4, Eigen::MatrixXd::Constant(3, 10, -2.0));
  const std::vector<int> at{60};
  const BLCExpectancy e = blc_expectancy(fc, at);
  const auto grid = heatmap_grid(e);
  CHECK(grid.size() == 10);
  CHECK(grid.front().label == "2021");
  const double p = std::exp(-std::exp(-2.0));
  CHECK(grid.front().expectancy == doctest::Approx(p + p * p + p * p * p));
  std::ostringstream csv;
  write_heatmap_csv(csv, grid);
  CHECK(csv.str().rfind("label,age,expectancy,lower,upper\n", 0) == 0);
}
