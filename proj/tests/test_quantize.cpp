#include <doctest.h>

#include <cmath>
#include <random>

#include "spdo/quantize.hpp"

using namespace spdo;

namespace {

CVector band_limited(const Grid& g, unsigned seed, int band) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n;
  CVector h = CVector::Zero(static_cast<Eigen::Index>(g.size()));
  for (std::size_t s = 0; s < g.size(); ++s)
    if (std::abs(g.wavenumber(s)[0]) <= band) h[static_cast<Eigen::Index>(s)] = cplx(n(rng), n(rng));
  fft_inverse_inplace(g, h);
  return h;
}

// a(x, D) u(x) = L^{-1} sum_xi e^{i x xi} a(x, xi) u^(xi), with u^ by direct summation.
CVector naive_apply(const Symbol& a, const Grid& g, const CVector& u) {
  const double L = g.period();
  const int n = g.n();
  std::vector<cplx> hat(n);
  for (int f = 0; f < n; ++f) {
    const double xi = g.frequency(f)[0];
    cplx acc = 0.0;
    for (int s = 0; s < n; ++s) acc += u[s] * std::exp(-kI * g.point(s)[0] * xi);
    hat[f] = acc * (L / n);
  }
  CVector out(n);
  Sample smp;
  for (int s = 0; s < n; ++s) {
    smp.x = g.point(s);
    smp.y = smp.x;
    cplx acc = 0.0;
    for (int f = 0; f < n; ++f) {
      smp.xi = g.frequency(f);
      acc += std::exp(kI * smp.x[0] * smp.xi[0]) * a(smp) * hat[f];
    }
    out[s] = acc / L;
  }
  return out;
}

CVector op(const Symbol& a, const Grid& g, const CVector& u) {
  return apply_symbol_op(a, SpectralField(g, u, Representation::physical), 0.0, {}).values;
}

}  // namespace

TEST_SUITE("quantize") {
  TEST_CASE("x-dependent quantization matches the defining sum") {
    const Grid g(1, 32, 5.0);
    const Symbol a = Symbol::from_expr("(2+sin(x))*xi*(1+xi^2)^(-0.5) + cos(3*x)", 0.0);
    const CVector u = band_limited(g, 1, 15);
    CHECK((op(a, g, u) - naive_apply(a, g, u)).norm() <= 1e-11 * u.norm());
  }

  TEST_CASE("Fourier multipliers act diagonally") {
    const Grid g(1, 32);
    CVector u(32);
    for (int s = 0; s < 32; ++s) u[s] = std::exp(kI * 4.0 * g.point(s)[0]);
    const CVector v = op(Symbol::from_expr("xi^2+1", 2.0), g, u);
    CHECK((v - 17.0 * u).norm() < 1e-11);
  }

  TEST_CASE("symbol extraction from plane waves") {
    const Grid g(1, 32);
    const Symbol a = Symbol::from_expr("(1+0.5*sin(2*x))*(1+xi^2)^0.5", 1.0);
    for (int k : {-7, 0, 3, 12}) {
      CVector e(32);
      for (int s = 0; s < 32; ++s) e[s] = std::exp(kI * double(k) * g.point(s)[0]);
      const CVector v = op(a, g, e);
      Sample smp;
      smp.xi = {double(k), 0, 0};
      for (int s = 0; s < 32; ++s) {
        smp.x = g.point(s);
        CHECK(std::abs(v[s] / e[s] - a(smp)) < 1e-11);
      }
    }
  }

  TEST_CASE("adjoint and transpose pair correctly") {
    const Grid g(1, 32);
    const Symbol a = Symbol::from_expr("(2+sin(x))*xi + i*cos(x)", 1.0);
    const CVector u = band_limited(g, 2, 6), v = band_limited(g, 3, 6);
    const CVector au = op(a, g, u);
    const CVector astar_v = apply_adjoint(a, SpectralField(g, v, Representation::physical), 0.0, {}).values;
    const cplx lhs = au.dot(v), rhs = u.dot(astar_v);  // dot conjugates the left argument
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::abs(lhs));
    const CVector at_v = apply_transpose(a, SpectralField(g, v, Representation::physical), 0.0, {}).values;
    const cplx bl = (au.array() * v.array()).sum(), br = (u.array() * at_v.array()).sum();
    CHECK(std::abs(bl - br) < 1e-9 * std::abs(bl));
  }

  TEST_CASE("kernel of a smoothing operator") {
    const Grid g(1, 16, 2.0 * kPi);
    const Symbol a = Symbol::from_expr("(2+sin(x))*(1+xi^2)^(-1)", -2.0);
    const KernelMatrix k = compute_kernel(a, g, 0.0, {});
    CHECK(k.diagonal_valid);
    // Trapezoidal quadrature of the defining integral: K(x, y) = L^{-1} sum_xi a(x, xi) e^{i (x - y) xi}.
    double worst = 0.0;
    Sample smp;
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        smp.x = g.point(i);
        cplx acc = 0.0;
        for (int f = 0; f < 16; ++f) {
          smp.xi = g.frequency(f);
          acc += a(smp) * std::exp(kI * (g.point(i)[0] - g.point(j)[0]) * smp.xi[0]);
        }
        worst = std::max(worst, std::abs(k.entries(i, j) - acc / g.period()));
      }
    CHECK(worst < 1e-12);
    const CVector u = band_limited(g, 4, 7);
    CHECK((k.apply(u) - op(a, g, u)).norm() < 1e-11 * u.norm());
  }

  TEST_CASE("singular kernels need the off-diagonal form") {
    const Grid g(1, 16);
    const Symbol a = Symbol::from_expr("xi*(1+xi^2)^(-0.5)", 0.0);
    CHECK_THROWS_AS(compute_kernel(a, g, 0.0, {}), SingularKernelError);
    const KernelMatrix k = compute_kernel(a, g, 0.0, {}, {true});
    CHECK_FALSE(k.diagonal_valid);
    CHECK(std::isnan(k.entries(0, 0).real()));
  }

  TEST_CASE("amplitude operators reduce to symbol operators") {
    const Grid g(1, 16);
    const Amplitude a = make_amplitude(expr::parse("(1+0.5*cos(x))*xi"), 1.0);
    const CVector u = band_limited(g, 5, 5);
    const AmplitudeResult r = apply_amplitude_op(a, SpectralField(g, u, Representation::physical), 0.0, {});
    CHECK((r.value.values - op(Symbol::from_expr("(1+0.5*cos(x))*xi", 1.0), g, u)).norm() < 1e-10 * u.norm());
    // y-dependent amplitude: (1 + 0.5 cos y) xi acts as D composed after the multiplication.
    const Amplitude b = make_amplitude(expr::parse("(1+0.5*cos(y))*xi"), 1.0);
    const AmplitudeResult rb = apply_amplitude_op(b, SpectralField(g, u, Representation::physical), 0.0, {});
    CVector mu(16);
    for (int s = 0; s < 16; ++s) mu[s] = (1.0 + 0.5 * std::cos(g.point(s)[0])) * u[s];
    CHECK((rb.value.values - op(Symbol::from_expr("xi", 1.0), g, mu)).norm() < 1e-9 * u.norm());
  }
}
