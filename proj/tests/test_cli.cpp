#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "graduate/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = graduate::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Scratch directory holding a small single-year and multi-year data set.
struct Workspace {
  fs::path dir;
  std::string one_year, many_years, zero_deaths;

  Workspace() {
    dir = fs::temp_directory_path() / ("graduate_cli_" + std::to_string(std::rand()));
    fs::create_directories(dir);
    one_year = (dir / "one.csv").string();
    many_years = (dir / "many.csv").string();
    zero_deaths = (dir / "zero.csv").string();
    std::ofstream a(one_year), b(many_years), z(zero_deaths);
    a << "Year,Age,Ex.Total,Dx.Total\n";
    b << "Year,Age,Ex.Total,Dx.Total\n";
    z << "Year,Age,Ex.Total,Dx.Total\n";
    for (int x = 0; x <= 90; ++x) {
      const double q = 5e-4 * std::pow(std::max(x, 1), -0.3) + 3e-5 * std::exp(0.095 * x);
      const double e = 1e5;
      a << 2019 << ',' << x << ',' << e << ',' << e * q * (1.0 + 0.02 * std::sin(x)) << '\n';
      z << 2019 << ',' << x << ',' << e << ',' << (x == 30 ? 0.0 : e * q) << '\n';
    }
    for (int y = 2000; y < 2010; ++y) {
      for (int x = 60; x <= 80; ++x) {
        const double m = std::exp(-9.5 + 0.09 * x - 0.015 * (y - 2000) + 0.01 * std::sin(x * y));
        b << y << ',' << x << ',' << 1e5 << ',' << 1e5 * m << '\n';
      }
    }
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("command line") {
  Workspace ws;

  SUBCASE("fit-hp prints a summary and writes a document") {
    const std::string fit = ws.path("hp.json");
    const Run r = run({"fit-hp", "--in", ws.one_year, "--iterations", "600", "--seed", "3", "--out", fit});
    CHECK(r.code == 0);
    CHECK(r.out.find("H") != std::string::npos);
    CHECK(r.out.find("acceptance rate") != std::string::npos);
    CHECK(fs::exists(fit));

    const Run again = run({"fit-hp", "--in", ws.one_year, "--iterations", "600", "--seed", "3"});
    CHECK(again.out == r.out);

    const Run e = run({"expectancy", "--fit", fit, "--at", "0,65"});
    CHECK(e.code == 0);
    CHECK(count_lines(e.out) == 1 + 6);

    const Run c = run({"close", "--fit", fit, "--method", "plateau", "--emit", "expectancy", "--at", "80"});
    CHECK(c.code == 0);
    CHECK(count_lines(c.out) == 1 + 3);

    const Run s = run({"summary", "--fit", fit});
    CHECK(s.code == 0);
    CHECK(s.out.find("acceptance rate") != std::string::npos);
  }
  SUBCASE("fit-dlm then predict") {
    const std::string fit = ws.path("dlm.json");
    const Run r = run({"fit-dlm", "--in", ws.one_year, "--ages", "40:90", "--iterations", "300", "--burn-in", "100",
                       "--out", fit, "--emit", "fitted"});
    CHECK(r.code == 0);
    CHECK(count_lines(r.out) == 1 + 51);
    const Run p = run({"predict", "--fit", fit, "--h", "20", "--seed", "4"});
    CHECK(p.code == 0);
    CHECK(count_lines(p.out) == 1 + 20);
    CHECK(p.out.rfind("age,qx_fitted,qx_lower,qx_upper\n91,", 0) == 0);
  }
  SUBCASE("fit-blc with forecast and heat map") {
    const std::string fit = ws.path("blc.json");
    const Run r = run({"fit-blc", "--in", ws.many_years, "--iterations", "200", "--burn-in", "100", "--out", fit,
                       "--emit", "improvement"});
    CHECK(r.code == 0);
    CHECK(count_lines(r.out) == 1 + 3 * 21);
    const Run h = run({"heatmap", "--fit", fit, "--at", "65,75", "--emit", "forecast", "--h", "10", "--seed", "2"});
    CHECK(h.code == 0);
    CHECK(count_lines(h.out) == 1 + 2 * 10);
  }
  SUBCASE("seed from the environment") {
    ::setenv("GRADUATE_SEED", "11", 1);
    const Run a = run({"fit-hp", "--in", ws.one_year, "--iterations", "300"});
    const Run b = run({"fit-hp", "--in", ws.one_year, "--iterations", "300", "--seed", "11"});
    ::unsetenv("GRADUATE_SEED");
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
  }
  SUBCASE("exit codes") {
    CHECK(run({"fit-hp", "--in", ws.one_year, "--bogus"}).code == 1);
    CHECK(run({"fit-hp", "--in", ws.path("missing.csv")}).code == 2);
    CHECK(run({"fit-hp", "--in", ws.one_year, "--emit", "forecast"}).code == 1);
    const Run z = run({"fit-dlm", "--in", ws.zero_deaths, "--iterations", "50", "--burn-in", "10"});
    CHECK(z.code == 2);
    CHECK(z.err.find("30") != std::string::npos);
    CHECK(run({"fit-hp", "--in", ws.one_year, "--prob", "1.5"}).code == 1);
    std::ofstream(ws.path("junk.json")) << "{not json";
    CHECK(run({"summary", "--fit", ws.path("junk.json")}).code == 2);
  }
}
