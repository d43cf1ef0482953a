#include <doctest.h>

#include <cmath>

#include "spdo/field.hpp"
#include "spdo/stochastic.hpp"

using namespace spdo;

TEST_SUITE("stochastic") {
  TEST_CASE("seeded ensembles are reproducible") {
    const TimeGrid tg(1.0, 20);
    const auto a = sample_brownian(5, tg, 42), b = sample_brownian(5, tg, 42), c = sample_brownian(5, tg, 43);
    bool same = true, differs = false;
    for (int m = 0; m < 5; ++m)
      for (int j = 0; j <= 20; ++j) {
        same = same && a.value(m, j) == b.value(m, j);
        differs = differs || a.value(m, j) != c.value(m, j);
      }
    CHECK(same);
    CHECK(differs);
    CHECK(a.value(0, 0) == 0.0);
  }

  TEST_CASE("increments have variance dt") {
    const TimeGrid tg(2.0, 10);
    const int paths = 20000;
    const auto w = sample_brownian(paths, tg, 5);
    double mean = 0.0, var = 0.0;
    for (int m = 0; m < paths; ++m) {
      const double d = w.increment(m, 3);
      mean += d / paths;
      var += d * d / paths;
    }
    CHECK(std::abs(mean) < 5.0 * std::sqrt(tg.dt() / paths));
    CHECK(var == doctest::Approx(tg.dt()).epsilon(0.05));
  }

  TEST_CASE("prefix exposes the past only") {
    const auto w = sample_brownian(2, TimeGrid(1.0, 8), 1);
    const PathPrefix p = w.prefix(1, 3);
    CHECK(p.now() == 3);
    CHECK(p.current() == w.value(1, 3));
  }

  TEST_CASE("Lp_F norm of a constant process") {
    const TimeGrid tg(2.0, 16);
    ScalarProcess x{3, 17, std::vector<double>(3 * 17, 1.5)};
    const LpfNorm n = lpf_norm(x, tg, 3.0);
    CHECK(n.raw == doctest::Approx(std::pow(1.5, 3.0) * 2.0).epsilon(1e-12));
    CHECK(n.norm == doctest::Approx(1.5 * std::cbrt(2.0)).epsilon(1e-12));
    CHECK(lpf_norm(x, tg, kInf).norm == doctest::Approx(1.5));
  }

  TEST_CASE("parallel_for covers every index once") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) CHECK(h == 1);
  }
}
