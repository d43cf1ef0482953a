#include <doctest.h>

#include <cmath>

#include "spdo/bounds.hpp"

using namespace spdo;

TEST_SUITE("bounds") {
  TEST_CASE("random fields are adapted") {
    const Grid g(1, 16);
    const TimeGrid tg(1.0, 8);
    const auto w = sample_brownian(1, tg, 4);
    std::vector<double> path(w.path(0).begin(), w.path(0).end());
    std::vector<double> changed = path;
    for (int j = 5; j <= 8; ++j) changed[j] += 1.0;
    const BrownianEnsemble a(tg, 0, path, 1), b(tg, 0, changed, 1);
    const SampledField ua = random_adapted_field(g, a, 9), ub = random_adapted_field(g, b, 9);
    for (int j = 0; j < 5; ++j) CHECK((ua.slice(0, j) - ub.slice(0, j)).norm() == 0.0);
    CHECK((ua.slice(0, 6) - ub.slice(0, 6)).norm() > 0.0);
  }

  TEST_CASE("mixed norms are homogeneous") {
    const Grid g(1, 16);
    const TimeGrid tg(1.0, 4);
    const auto w = sample_brownian(3, tg, 2);
    SampledField u = random_adapted_field(g, w, 5);
    const double n1 = mixed_norm(u, tg, 2.0, 3.0);
    for (auto& v : u.raw()) v *= 2.5;
    CHECK(mixed_norm(u, tg, 2.0, 3.0) == doctest::Approx(2.5 * n1).epsilon(1e-12));
  }

  TEST_CASE("constant field mixed norm") {
    const Grid g(1, 8, 1.0);
    const TimeGrid tg(2.0, 4);
    SampledField u(g, 2, 5);
    for (auto& v : u.raw()) v = 3.0;
    // (int_torus (E int_0^T 9 dt)^{p/2} dx)^{1/p} with |torus| = 1
    CHECK(mixed_norm(u, tg, 2.0, 2.0) == doctest::Approx(3.0 * std::sqrt(2.0)).epsilon(1e-12));
  }

  TEST_CASE("order-0 operators are L2 bounded uniformly in the grid") {
    const std::vector<Grid> grids{Grid(1, 16), Grid(1, 32), Grid(1, 64)};
    const auto w = sample_brownian(4, TimeGrid(1.0, 4), 1);
    const BoundReport r = l2_boundedness_check(Symbol::from_expr("(2+sin(x))*xi*(1+xi^2)^(-0.5)", 0.0), grids, w);
    CHECK(r.pass);
    CHECK(r.norms.size() == 3);
  }

  TEST_CASE("mixed Lp check rejects x-dependent symbols") {
    const std::vector<Grid> grids{Grid(1, 16)};
    const auto w = sample_brownian(2, TimeGrid(1.0, 4), 1);
    CHECK_THROWS_AS(mixed_lp_check(Symbol::from_expr("sin(x)*xi*(1+xi^2)^(-0.5)", 0.0), 1.5, grids, w),
                    HypothesisError);
  }

  TEST_CASE("Garding for the Laplacian holds with C at most 1") {
    const std::vector<Grid> grids{Grid(1, 16), Grid(1, 32)};
    const auto w = sample_brownian(4, TimeGrid(1.0, 4), 1);
    GardingOptions opt;
    opt.trials = 4;
    const GardingReport r = garding_check(Symbol::from_expr("xi^2", 2.0), grids, w, opt);
    CHECK(r.pass);
    CHECK(r.hypothesis_holds);
    for (double c : r.constants) CHECK(c <= 1.0);
  }
}
