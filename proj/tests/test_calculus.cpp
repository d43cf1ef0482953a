#include <doctest.h>

#include <cmath>
#include <random>

#include "spdo/calculus.hpp"
#include "spdo/quantize.hpp"

using namespace spdo;

namespace {
Sample at(double x, double xi) {
  Sample s;
  s.x = {x, 0, 0};
  s.y = s.x;
  s.xi = {xi, 0, 0};
  return s;
}
CVector op(const Symbol& a, const Grid& g, const CVector& u) {
  return apply_symbol_op(a, SpectralField(g, u, Representation::physical), 0.0, {}).values;
}
}  // namespace

TEST_SUITE("calculus") {
  TEST_CASE("xi after x") {
    const auto s = compose_symbols(Symbol::from_expr("xi", 1.0), Symbol::from_expr("x", 0.0), 3);
    CHECK(expr::to_string(*s.truncated_sum().expr()) == "x·ξ − i");
    CHECK(s.terms[0].order == 1.0);
    CHECK(s.terms[1].order == 0.0);
  }

  TEST_CASE("transpose and adjoint of sin(x) xi") {
    const Symbol a = Symbol::from_expr("sin(x)*xi", 1.0);
    const Symbol t = transpose_symbol(a, 2).truncated_sum();
    const Symbol adj = adjoint_symbol(a, 2).truncated_sum();
    for (double x : {0.3, 1.9})
      for (double xi : {-2.0, 5.0}) {
        CHECK(std::abs(t(at(x, xi)) - (-std::sin(x) * xi + kI * std::cos(x))) < 1e-13);
        CHECK(std::abs(adj(at(x, xi)) - (std::sin(x) * xi - kI * std::cos(x))) < 1e-13);
      }
  }

  TEST_CASE("transpose series agrees with the transposed operator") {
    const Grid g(1, 32);
    const Symbol a = Symbol::from_expr("(1+0.5*sin(x))*xi^2 + cos(2*x)*xi", 2.0);
    const Symbol t = transpose_symbol(a, 3).truncated_sum();
    CVector u = CVector::Zero(32);
    std::mt19937 rng(9);
    std::normal_distribution<double> n;
    for (int s = 0; s < 32; ++s)
      if (std::abs(g.wavenumber(s)[0]) <= 8) u[s] = cplx(n(rng), n(rng));
    fft_inverse_inplace(g, u);
    const CVector direct = apply_transpose(a, SpectralField(g, u, Representation::physical), 0.0, {}).values;
    CHECK((op(t, g, u) - direct).norm() < 1e-9 * direct.norm());
  }

  TEST_CASE("composition of xi-polynomials is exact on band-limited fields") {
    const Grid g(1, 64);
    const Symbol b = Symbol::from_expr("(1+0.3*cos(x))*xi^3 + sin(2*x)*xi", 3.0);
    const Symbol a = Symbol::from_expr("(2+sin(x))*xi^2 + cos(x)", 2.0);
    const Symbol c = compose_symbols(b, a, 4).truncated_sum();
    CVector u = CVector::Zero(64);
    for (int s = 0; s < 64; ++s)
      if (std::abs(g.wavenumber(s)[0]) <= 10) u[s] = cplx(std::cos(0.7 * s), std::sin(1.3 * s));
    fft_inverse_inplace(g, u);
    const CVector direct = op(b, g, op(a, g, u));
    CHECK((op(c, g, u) - direct).norm() < 1e-10 * direct.norm());
  }

  TEST_CASE("parametrix") {
    const Grid g(1, 64);
    const auto w = sample_brownian(2, TimeGrid(1.0, 4), 1);
    const Symbol a = Symbol::from_expr("(1+sin(x)^2)*(1+xi^2)", 2.0);
    const auto p = parametrix(a, 2, g, w);
    CHECK(p.size() == 3);
    CHECK(p.terms[0].order == -2.0);
    CHECK(p.terms[2].order == -4.0);
    // Leading term inverts the symbol away from the origin.
    CHECK(std::abs(p[0](at(0.4, 20.0)) * a(at(0.4, 20.0)) - 1.0) < 1e-12);
    CHECK_THROWS_AS(parametrix(Symbol::from_expr("sin(x)*xi^2", 2.0), 2, g, w), EllipticityError);
  }

  TEST_CASE("asymptotic sum equals the partial sum at high frequency") {
    const auto s = compose_symbols(Symbol::from_expr("(1+xi^2)^0.5", 1.0), Symbol::from_expr("sin(x)", 0.0), 3);
    const Symbol sum = asymptotic_sum(s);
    const Symbol partial = s.truncated_sum();
    CHECK(std::abs(sum(at(0.5, 1e4)) - partial(at(0.5, 1e4))) < 1e-9);
  }
}
