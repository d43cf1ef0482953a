#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "spdo/cauchy.hpp"

using namespace spdo;

namespace {

// Durand-Kerner iteration for lambda^m - sum_k a_k lambda^k.
std::vector<cplx> durand_kerner(const std::vector<cplx>& a) {
  const int m = static_cast<int>(a.size());
  auto poly = [&](cplx z) {
    cplx v = std::pow(z, m);
    for (int k = 0; k < m; ++k) v -= a[k] * std::pow(z, k);
    return v;
  };
  std::vector<cplx> z(m);
  for (int k = 0; k < m; ++k) z[k] = std::pow(cplx(0.4, 0.9), k) * 2.0;
  for (int it = 0; it < 500; ++it) {
    for (int k = 0; k < m; ++k) {
      cplx den = 1.0;
      for (int j = 0; j < m; ++j)
        if (j != k) den *= z[k] - z[j];
      z[k] -= poly(z[k]) / den;
    }
  }
  return z;
}

double match_distance(std::vector<cplx> a, std::vector<cplx> b) {
  double worst = 0.0;
  for (const cplx& x : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](cplx p, cplx q) { return std::abs(p - x) < std::abs(q - x); });
    worst = std::max(worst, std::abs(*it - x));
    b.erase(it);
  }
  return worst;
}

Sample unit_xi(double xi) {
  Sample s;
  s.xi = {xi, 0, 0};
  return s;
}

}  // namespace

TEST_SUITE("cauchy") {
  TEST_CASE("roots agree with Durand-Kerner") {
    std::mt19937 rng(3);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
      EquationSpec spec;
      spec.m = 3;
      std::vector<cplx> a(3);
      for (auto& c : a) {
        c = cplx(n(rng), n(rng));
        spec.principal.push_back(Symbol::constant(c));
      }
      CHECK(match_distance(roots_at(spec, {}), durand_kerner(a)) < 1e-9);
    }
  }

  TEST_CASE("model equations") {
    const auto wave = roots_at(wave_spec(1), unit_xi(2.0));
    CHECK(match_distance(wave, {2.0, -2.0}) < 1e-12);
    const auto schr = roots_at(schrodinger_spec(1), unit_xi(2.0));
    CHECK(match_distance(schr, {cplx(0, 2), cplx(0, -2)}) < 1e-12);
  }

  TEST_CASE("companion symbol of the wave equation") {
    const MatrixSymbol c = build_companion_symbol(wave_spec(1));
    const Eigen::MatrixXcd m = c.at(unit_xi(3.0));
    CHECK(std::abs(m(0, 0)) < 1e-14);
    CHECK(std::abs(m(0, 1) - 3.0) < 1e-12);
    CHECK(std::abs(m(1, 0) - 3.0) < 1e-12);
    CHECK(std::abs(m(1, 1)) < 1e-14);
  }

  TEST_CASE("hypotheses") {
    const Grid g(1, 16);
    const auto w = sample_brownian(2, TimeGrid(1.0, 4), 1);
    SUBCASE("wave: simple real roots") {
      const auto spec = wave_spec(1);
      const auto h = check_hypotheses(characteristic_roots(spec, sphere_samples(spec, g, w)), 1e-6);
      CHECK(h.h1_simple);
      CHECK(h.h2_vacuous);
      CHECK(h.h3);
    }
    SUBCASE("elliptic in time") {
      const auto spec = schrodinger_spec(1);
      const auto h = check_hypotheses(characteristic_roots(spec, sphere_samples(spec, g, w)), 1e-6);
      CHECK(h.h1_simple);
      CHECK(h.h2);
      CHECK(h.min_abs_imag == doctest::Approx(1.0).epsilon(1e-9));
    }
    SUBCASE("double roots take the Jordan route") {
      const auto spec = double_root_spec(1);
      const auto h = check_hypotheses(characteristic_roots(spec, sphere_samples(spec, g, w)), 1e-6);
      CHECK_FALSE(h.h1_simple);
      CHECK(h.h1);
    }
  }

  TEST_CASE("diagonalization") {
    const MatrixSymbol wave = build_companion_symbol(wave_spec(1));
    const Diagonalization d = diagonalize_at(wave, unit_xi(1.0), false);
    CHECK_FALSE(d.jordan);
    CHECK(d.residual < 1e-10);
    CHECK((d.r * d.j * d.r_inv - wave.at(unit_xi(1.0))).norm() < 1e-10);
    const MatrixSymbol dbl = build_companion_symbol(double_root_spec(1));
    const Diagonalization j = diagonalize_at(dbl, unit_xi(1.0), true);
    CHECK(j.jordan);
    CHECK(j.residual < 1e-6);
    CHECK_THROWS_AS(diagonalize_at(dbl, unit_xi(1.0), false), DiagonalizationError);
  }

  TEST_CASE("Holmgren transform") {
    const Grid g(1, 16);
    const TimeGrid tg(1.0, 32);
    const auto w = sample_brownian(2, tg, 1);
    const SampledField z = pinned_semimartingale(g, w, 3, 4);
    const SampledField same = holmgren_transform(z, tg, 0.0);
    CHECK(same.raw() == z.raw());
    CHECK_THROWS_AS(holmgren_transform(z, tg, 1.0), WindowError);
    const SampledField shifted = holmgren_transform(z, tg, 0.05);
    // The centre site is not shifted.
    std::size_t centre = 0;
    for (std::size_t s = 0; s < g.size(); ++s)
      if (norm_sq(g.centered_point(s)) < norm_sq(g.centered_point(centre))) centre = s;
    for (int j = 0; j <= 32; ++j) CHECK(shifted.at(1, j, centre) == z.at(1, j, centre));
  }

  TEST_CASE("integrator preserves the norm for Hermitian drift") {
    const Grid g(1, 16);
    const auto w = sample_brownian(2, TimeGrid(1.0, 200), 1);
    SpdeSystem sys;
    sys.drift = MatrixSymbol(1, 1);
    sys.drift(0, 0) = Symbol::from_expr("xi", 1.0);
    CVector u0(16);
    for (int s = 0; s < 16; ++s) u0[s] = std::exp(kI * 3.0 * g.point(s)[0]);
    const auto out = integrate_spde_system(sys, g, w, {u0});
    // (1/i) du = D u dt: u(t) = e^{i 3 (x + t)} up to the Crank-Nicolson phase error.
    const cplx phase = out[0].at(0, 200, 0) / u0[0];
    CHECK(std::abs(std::abs(phase) - 1.0) < 1e-12);
    CHECK(std::abs(phase - std::exp(kI * 3.0)) < 1e-3);
  }

  TEST_CASE("integrator refuses unstable steps") {
    const Grid g(1, 64);
    const auto w = sample_brownian(1, TimeGrid(1.0, 4), 1);
    SpdeSystem sys;
    sys.drift = MatrixSymbol(1, 1);
    sys.drift(0, 0) = Symbol::from_expr("xi", 1.0);
    CHECK_THROWS_AS(integrate_spde_system(sys, g, w, {CVector::Zero(64)}), StabilityError);
  }

  TEST_CASE("Carleman report") {
    const Grid g(1, 16);
    const auto w = sample_brownian(4, TimeGrid(0.5, 32), 2);
    const SampledField z = pinned_semimartingale(g, w, 7, 4);
    const Symbol b1 = Symbol::from_expr("(1+xi^2)^0.5", 1.0);
    const CarlemanReport r = carleman_report(z, zero_symbol(1.0), b1, 100.0, w);
    CHECK(r.pass);
    CHECK(r.blocks.size() == 1);
    CHECK(r.lhs > 0.0);
    const CarlemanReport j = carleman_report_jordan(z, z, zero_symbol(1.0), b1, 100.0, w);
    CHECK(j.blocks.size() == 2);
    CHECK(j.jordan_constant == 4.0);
    SampledField open = z;
    open.at(0, 32, 3) = 1.0;
    CHECK_THROWS_AS(carleman_report(open, zero_symbol(1.0), b1, 100.0, w), HypothesisError);
  }
}
