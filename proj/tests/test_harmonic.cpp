#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "spdo/bounds.hpp"
#include "spdo/field.hpp"
#include "spdo/harmonic.hpp"

using namespace spdo;

namespace {

// Maximal dyadic cubes with average >= r, found by testing every cube against its ancestors.
std::vector<Cube> brute_force_cubes(const Grid& g, const std::vector<double>& density, double r) {
  const int dim = g.dim();
  auto average = [&](const Cube& q) {
    double mass = 0.0;
    int count = 0;
    for (std::size_t s = 0; s < g.size(); ++s)
      if (q.contains(g.lattice(s), dim)) {
        mass += density[s];
        ++count;
      }
    return mass / count;
  };
  std::vector<Cube> out;
  for (int side = g.n() / 2; side >= 1; side /= 2) {
    const int per = g.n() / side;
    const int count = static_cast<int>(std::pow(per, dim));
    for (int c = 0; c < count; ++c) {
      Cube q;
      q.side = side;
      int rest = c;
      for (int d = dim - 1; d >= 0; --d) {
        q.lower[d] = (rest % per) * side;
        rest /= per;
      }
      if (average(q) < r) continue;
      bool maximal = true;
      for (int big = side * 2; big < g.n() && maximal; big *= 2) {
        Cube parent;
        parent.side = big;
        for (int d = 0; d < dim; ++d) parent.lower[d] = q.lower[d] / big * big;
        maximal = average(parent) < r;
      }
      if (maximal) out.push_back(q);
    }
  }
  std::sort(out.begin(), out.end(), [](const Cube& a, const Cube& b) { return a.lower < b.lower; });
  return out;
}

}  // namespace

TEST_SUITE("harmonic") {
  TEST_CASE("Littlewood-Paley blocks resum to the field") {
    for (double k_star : {1.5, 2.0, 4.0}) {
      const LPPartition lp = littlewood_paley_partition(k_star);
      const Grid g(1, 64);
      CVector u(64);
      for (int s = 0; s < 64; ++s) u[s] = std::exp(std::sin(g.point(s)[0])) + kI * std::cos(5 * g.point(s)[0]);
      const auto blocks = lp_blocks(lp, g, u);
      CVector sum = CVector::Zero(64);
      for (const auto& b : blocks) sum += b;
      CHECK((sum - u).norm() < 1e-12 * u.norm());
      // The partition itself sums to one.
      for (double r : {0.0, 0.7, 3.0, 17.0, 100.0}) {
        const Vec3 xi{r, 0, 0};
        double total = lp.low(xi);
        for (int k = 0; k < lp.blocks_for(200.0); ++k) {
          const Vec3 scaled{r / std::pow(2.0, k), 0, 0};
          total += lp.annulus(scaled);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("CZ cubes agree with a brute-force search") {
    for (int dim : {1, 2}) {
      for (unsigned seed = 0; seed < 10; ++seed) {
        const Grid g(dim, dim == 1 ? 32 : 16);
        const TimeGrid tg(1.0, 4);
        const auto w = sample_brownian(3, tg, seed);
        const SampledField u = random_adapted_field(g, w, 100 + seed, g.n() / 4);
        const std::vector<double> dens = site_lpf_density(u, tg, 2.0);
        double avg = 0.0;
        for (double d : dens) avg += d / dens.size();
        const double r = avg * (1.3 + 0.3 * seed);
        const CZDecomposition cz = cz_decompose(u, tg, r, 2.0);
        const auto oracle = brute_force_cubes(g, dens, r);
        REQUIRE(cz.bad.size() == oracle.size());
        for (std::size_t k = 0; k < oracle.size(); ++k) CHECK(cz.bad[k].cube == oracle[k]);
        CHECK(check_cz_properties(u, tg, cz).pass);
      }
    }
  }

  TEST_CASE("CZ needs a level above the average") {
    const Grid g(1, 16);
    const TimeGrid tg(1.0, 2);
    SampledField u(g, 1, 3);
    for (auto& v : u.raw()) v = 1.0;
    CHECK_THROWS_AS(cz_decompose(u, tg, 0.5, 2.0), ParameterError);
    // A constant field has no bad cubes above its own level.
    const CZDecomposition cz = cz_decompose(u, tg, 10.0, 2.0);
    CHECK(cz.bad.empty());
  }

  TEST_CASE("bad parts have mean zero and reconstruct the field") {
    const Grid g(1, 32);
    const TimeGrid tg(1.0, 4);
    const auto w = sample_brownian(2, tg, 8);
    SampledField u(g, 2, 5);
    for (int m = 0; m < 2; ++m)
      for (int j = 0; j < 5; ++j)
        for (std::size_t s = 0; s < g.size(); ++s) u.at(m, j, s) = (s >= 4 && s < 6) ? 10.0 + m + j : 0.1;
    const CZDecomposition cz = cz_decompose(u, tg, 1.0, 2.0);
    REQUIRE_FALSE(cz.bad.empty());
    const CZCheck c = check_cz_properties(u, tg, cz);
    CHECK(c.reconstruction_error < 1e-12);
    CHECK(c.mean_zero_error < 1e-12);
    CHECK(c.disjoint);
    CHECK(c.pass);
  }
}
