#include <doctest.h>

#include <cmath>
#include <random>

#include "spdo/expr.hpp"
#include "spdo/grid.hpp"

using namespace spdo;

namespace {

CVector random_field(const Grid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  CVector u(static_cast<Eigen::Index>(g.size()));
  for (auto& v : u) v = cplx(n(rng), n(rng));
  return u;
}

// Direct DFT with the toolkit normalization: (L/N)^n sum u e^{-i x xi}.
CVector naive_forward(const Grid& g, const CVector& u) {
  CVector out = CVector::Zero(u.size());
  const double scale = std::pow(g.spacing(), g.dim());
  for (std::size_t f = 0; f < g.size(); ++f) {
    const Vec3 xi = g.frequency(f);
    cplx acc = 0.0;
    for (std::size_t s = 0; s < g.size(); ++s) {
      const Vec3 x = g.point(s);
      acc += u[static_cast<Eigen::Index>(s)] * std::exp(-kI * (x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2]));
    }
    out[static_cast<Eigen::Index>(f)] = scale * acc;
  }
  return out;
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("forward transform matches a direct DFT") {
    for (int dim : {1, 2}) {
      const Grid g(dim, dim == 1 ? 16 : 8, 3.0);
      const CVector u = random_field(g, 7);
      CVector h = u;
      fft_forward_inplace(g, h);
      CHECK((h - naive_forward(g, u)).norm() <= 1e-12 * h.norm());
      fft_inverse_inplace(g, h);
      CHECK((h - u).norm() <= 1e-12 * u.norm());
    }
  }

  TEST_CASE("Parseval with the volume normalization") {
    const Grid g(2, 16, 2.0 * kPi);
    const CVector u = random_field(g, 3);
    CVector h = u;
    fft_forward_inplace(g, h);
    const double physical = u.squaredNorm() * g.cell_volume();
    const double spectral = h.squaredNorm() * g.frequency_weight();
    CHECK(physical == doctest::Approx(spectral).epsilon(1e-12));
  }

  TEST_CASE("frequencies follow FFT order") {
    const Grid g(1, 8, 2.0 * kPi);
    CHECK(g.frequency(0)[0] == 0.0);
    CHECK(g.frequency(1)[0] == doctest::Approx(1.0));
    CHECK(g.frequency(7)[0] == doctest::Approx(-1.0));
    CHECK(g.point(1)[0] == doctest::Approx(2.0 * kPi / 8));
  }

  TEST_CASE("Sobolev norm of a single mode") {
    const Grid g(1, 32, 2.0 * kPi);
    CVector u(32);
    for (std::size_t s = 0; s < 32; ++s) u[static_cast<Eigen::Index>(s)] = std::exp(kI * 3.0 * g.point(s)[0]);
    // |e^{3ix}|^2_{H^1} = 2 pi (1 + 9)
    CHECK(sobolev_norm_sq(g, u, 1.0) == doctest::Approx(2.0 * kPi * 10.0).epsilon(1e-12));
  }

  TEST_CASE("bad grids are rejected") {
    CHECK_THROWS_AS(Grid(1, 12), ParameterError);
    CHECK_THROWS_AS(Grid(4, 8), ParameterError);
  }
}

TEST_SUITE("expr") {
  TEST_CASE("parse and evaluate") {
    const ExprPtr e = expr::parse("sin(x)*xi^2 + exp(t) - 3*i*w/2");
    ExprEnv env;
    env.t = 0.3;
    env.w = -0.7;
    env.x = {1.1, 0, 0};
    env.xi = {2.5, 0, 0};
    const cplx expected = std::sin(1.1) * 6.25 + std::exp(0.3) - 1.5 * kI * -0.7;
    CHECK(std::abs(expr::evaluate(*e, env) - expected) < 1e-14);
  }

  TEST_CASE("derivative agrees with a difference quotient") {
    const ExprPtr e = expr::parse("cos(x*xi)*(1+xi^2)^0.5 + abs(x)");
    ExprEnv env;
    env.x = {0.4, 0, 0};
    env.xi = {1.7, 0, 0};
    const ExprPtr d = expr::differentiate(e, var_xi);
    const double h = 1e-5;
    ExprEnv hi = env, lo = env;
    hi.xi[0] += h;
    lo.xi[0] -= h;
    const cplx fd = (expr::evaluate(*e, hi) - expr::evaluate(*e, lo)) / (2 * h);
    CHECK(std::abs(expr::evaluate(*d, env) - fd) < 1e-8);
  }

  TEST_CASE("polynomial degree and dependence") {
    CHECK(expr::xi_degree(*expr::parse("x*xi^3 + xi")) == 3);
    CHECK_FALSE(expr::xi_degree(*expr::parse("(1+xi^2)^0.5")).has_value());
    CHECK(expr::depends_on(*expr::parse("sin(w)"), var_w));
    CHECK_FALSE(expr::depends_on(*expr::parse("sin(w)"), var_x));
  }

  TEST_CASE("conjugate flips the imaginary unit") {
    ExprEnv env;
    env.x = {0.2, 0, 0};
    const ExprPtr e = expr::parse("i*sin(x) + 2");
    CHECK(std::abs(expr::evaluate(*expr::conjugate(e), env) - std::conj(expr::evaluate(*e, env))) < 1e-15);
  }

  TEST_CASE("malformed input") {
    CHECK_THROWS_AS(expr::parse("sin(x"), ParseError);
    CHECK_THROWS_AS(expr::parse("foo(x)"), ParseError);
    CHECK_THROWS_AS(expr::parse("x +"), ParseError);
  }
}
