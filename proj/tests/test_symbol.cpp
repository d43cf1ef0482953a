#include <doctest.h>

#include <cmath>

#include "spdo/symbol.hpp"

using namespace spdo;

namespace {
Sample at(double x, double xi, double t = 0.0) {
  Sample s;
  s.t = t;
  s.x = {x, 0, 0};
  s.y = s.x;
  s.xi = {xi, 0, 0};
  return s;
}
}  // namespace

TEST_SUITE("symbol") {
  TEST_CASE("closed-form derivatives") {
    const Symbol a = Symbol::from_expr("sin(x)*xi^2", 2.0);
    Derivs d;
    d.xi = {1, 0, 0};
    d.x = {1, 0, 0};
    const Sample s = at(0.7, 3.0);
    CHECK(std::abs(a.derivative(s, d) - 2.0 * 3.0 * std::cos(0.7)) < 1e-13);
  }

  TEST_CASE("difference quotients for closure symbols") {
    const Symbol a([](const Sample& s) { return cplx(std::sin(s.x[0]) * std::pow(1.0 + s.xi[0] * s.xi[0], 0.5)); },
                   1.0);
    Derivs d;
    d.xi = {1, 0, 0};
    const Sample s = at(0.3, 2.0);
    const double exact = std::sin(0.3) * 2.0 / std::sqrt(5.0);
    CHECK(std::abs(a.derivative(s, d) - exact) < 1e-7);
    Derivs dx;
    dx.x = {2, 0, 0};
    CHECK(std::abs(a.derivative(s, dx) + std::sin(0.3) * std::sqrt(5.0)) < 1e-5);
  }

  TEST_CASE("algebra evaluates pointwise") {
    const Symbol a = Symbol::from_expr("1+xi^2", 2.0);
    const Symbol b = Symbol::from_expr("cos(x)", 0.0);
    const Sample s = at(1.2, 0.5);
    CHECK(std::abs(sum(a, b)(s) - (1.25 + std::cos(1.2))) < 1e-14);
    CHECK(std::abs(product(a, b)(s) - 1.25 * std::cos(1.2)) < 1e-14);
    CHECK(std::abs(reciprocal(a)(s) - 1.0 / 1.25) < 1e-14);
    CHECK(product(a, b).order() == 2.0);
    CHECK(reciprocal(a).order() == -2.0);
    CHECK(std::abs(conjugated(Symbol::from_expr("i*xi", 1.0))(s) - cplx(0, -0.5)) < 1e-15);
    CHECK(std::abs(reflected_xi(Symbol::from_expr("xi^3", 3.0))(s) + 0.125) < 1e-15);
  }

  TEST_CASE("multi-indices by total order") {
    const auto m = multi_indices(2, 2);
    CHECK(m.size() == 6);
    CHECK(total(m.front()) == 0);
    CHECK(total(m.back()) == 2);
  }

  TEST_CASE("symbol estimates") {
    const Grid g(1, 32);
    const auto w = sample_brownian(2, TimeGrid(1.0, 4), 3);
    SUBCASE("a genuine order-1 symbol passes") {
      const auto r = check_symbol_estimate(Symbol::from_expr("(2+sin(x)+0.3*sin(w))*(1+xi^2)^0.5", 1.0), 2, 1, g, w);
      CHECK_FALSE(r.violation);
      CHECK(r.entries.size() == 6);
    }
    SUBCASE("an understated order is caught") {
      const auto r = check_symbol_estimate(Symbol::from_expr("xi^2", 0.0), 1, 0, g, w);
      CHECK(r.violation);
    }
  }

  TEST_CASE("ellipticity") {
    const Grid g(1, 32);
    const auto w = sample_brownian(2, TimeGrid(1.0, 4), 3);
    const auto yes = ellipticity_check(Symbol::from_expr("(1+sin(x)^2)*(1+xi^2)", 2.0), g, w);
    CHECK(yes.elliptic);
    CHECK(yes.c_k > 0.0);
    CHECK_FALSE(ellipticity_check(Symbol::from_expr("sin(x)*xi^2", 2.0), g, w).elliptic);
  }
}
