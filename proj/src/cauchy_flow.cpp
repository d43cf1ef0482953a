#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "spdo/bounds.hpp"
#include "spdo/cauchy.hpp"
#include "spdo/cutoff.hpp"
#include "spdo/quantize.hpp"

namespace spdo {

namespace {

double inner_re(const Grid& g, const CVector& a, const CVector& b) {
  return (a.cwiseProduct(b.conjugate())).sum().real() * g.cell_volume();
}

cplx inner(const Grid& g, const CVector& a, const CVector& b) {
  return (a.cwiseProduct(b.conjugate())).sum() * g.cell_volume();
}

double norm2(const Grid& g, const CVector& a) { return a.squaredNorm() * g.cell_volume(); }

CVector apply(const Symbol& a, const Grid& g, const CVector& u, double t, const PathPrefix& path) {
  return apply_symbol_op(a, SpectralField(g, u, Representation::physical), t, path).values;
}

std::vector<CVector> apply_matrix(const MatrixSymbol& a, const Grid& g, const std::vector<CVector>& y, double t,
                                  const PathPrefix& path) {
  std::vector<CVector> out(a.rows, CVector::Zero(static_cast<Eigen::Index>(g.size())));
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c)
      if (!a.is_zero(r, c)) out[r] += apply(a(r, c), g, y[c], t, path);
  return out;
}

double binom(int n, int k) {
  double r = 1.0;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (1 + a) + 0xBF58476D1CE4E5B9ULL * (1 + b);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

SampledField holmgren_transform(const SampledField& u, const TimeGrid& tg, double delta) {
  const Grid& g = u.grid();
  double r2max = 0.0;
  for (std::size_t s = 0; s < g.size(); ++s) r2max = std::max(r2max, norm_sq(g.centered_point(s)));
  if (std::abs(delta) * r2max >= tg.horizon())
    throw WindowError("delta' max|x|^2 must stay below the time horizon");
  SampledField out(g, u.paths(), u.nodes(), u.adapted() && delta >= 0.0);
  const int last = tg.steps();
  parallel_for(g.size(), [&](std::size_t s) {
    const double shift = delta * norm_sq(g.centered_point(s));
    for (int m = 0; m < u.paths(); ++m) {
      auto value = [&](int j) -> cplx {
        if (j < 0) return 0.0;
        return u.at(m, std::min(j, last), s);
      };
      for (int j = 0; j <= last; ++j) {
        const double tau = tg.node(j) - shift;
        if (tau < -1e-12 * tg.horizon()) {
          out.at(m, j, s) = 0.0;
          continue;
        }
        const double q = std::max(0.0, tau) / tg.dt();
        const int i0 = static_cast<int>(std::floor(q));
        const double f = q - i0;
        if (f < 1e-12) {
          out.at(m, j, s) = value(i0);
          continue;
        }
        // Cubic Lagrange through i0-1, i0, i0+1, i0+2.
        const double w0 = -f * (f - 1) * (f - 2) / 6.0;
        const double w1 = (f + 1) * (f - 1) * (f - 2) / 2.0;
        const double w2 = -(f + 1) * f * (f - 2) / 2.0;
        const double w3 = (f + 1) * f * (f - 1) / 6.0;
        out.at(m, j, s) = w0 * value(i0 - 1) + w1 * value(i0) + w2 * value(i0 + 1) + w3 * value(i0 + 2);
      }
    }
  });
  return out;
}

void integrate_spde_system(const SpdeSystem& sys, const Grid& grid, const BrownianEnsemble& ensemble,
                           const std::vector<CVector>& initial, const SystemObserver& observe) {
  const int m = sys.drift.rows;
  if (m < 1 || static_cast<int>(initial.size()) != m) throw ParameterError("initial state has the wrong size");
  const bool with_noise = !sys.noise.empty();
  const TimeGrid& tg = ensemble.time_grid();
  const double dt = tg.dt();

  // Stability: dt max |sigma(A)| <= 1/2 over the band.
  double amax = 0.0;
  {
    Sample s;
    s.path = ensemble.prefix(0, 0);
    const int stride = std::max(1, grid.n() / 8);
    for (std::size_t x = 0; x < grid.size(); x += static_cast<std::size_t>(stride)) {
      s.x = grid.point(x);
      s.y = s.x;
      for (std::size_t f = 0; f < grid.size(); ++f) {
        s.xi = grid.frequency(f);
        const Eigen::MatrixXcd a = sys.drift.at(s);
        amax = std::max(amax, Eigen::JacobiSVD<Eigen::MatrixXcd>(a).singularValues()(0));
      }
      if (sys.drift.x_independent()) break;
    }
  }
  if (dt * amax > 0.5)
    throw StabilityError("dt max|sigma(A)| = " + std::to_string(dt * amax) + " exceeds 1/2; refine the time grid");

  const bool spectral = sys.drift.x_independent() && (!with_noise || sys.noise.x_independent());
  const auto size = static_cast<Eigen::Index>(grid.size());
  const cplx half = kI * 0.5 * dt;

  parallel_for(static_cast<std::size_t>(ensemble.paths()), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    std::vector<CVector> y = initial;
    if (observe) observe(p, 0, y);
    std::vector<CVector> f(m), F(m);
    for (int j = 0; j < tg.steps(); ++j) {
      const double t = tg.node(j);
      const PathPrefix prefix = ensemble.prefix(p, j);
      const double dw = ensemble.increment(p, j);
      for (int k = 0; k < m; ++k) {
        f[k] = CVector::Zero(size);
        F[k] = CVector::Zero(size);
      }
      if (sys.sources) sys.sources(p, j, t, prefix, f, F);
      if (spectral) {
        std::vector<CVector> yh = y, fh = f, Fh = F;
        for (int k = 0; k < m; ++k) {
          fft_forward_inplace(grid, yh[k]);
          fft_forward_inplace(grid, fh[k]);
          fft_forward_inplace(grid, Fh[k]);
        }
        Sample s;
        s.t = t;
        s.path = prefix;
        Eigen::VectorXcd v(m), fv(m), Fv(m);
        for (Eigen::Index q = 0; q < size; ++q) {
          s.xi = grid.frequency(static_cast<std::size_t>(q));
          const Eigen::MatrixXcd a = sys.drift.at(s);
          for (int k = 0; k < m; ++k) {
            v[k] = yh[k][q];
            fv[k] = fh[k][q];
            Fv[k] = Fh[k][q];
          }
          Eigen::VectorXcd rhs = v + half * (a * v) + kI * dt * fv + kI * dw * Fv;
          if (with_noise) rhs += kI * dw * (sys.noise.at(s) * v);
          const Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(m, m) - half * a;
          const Eigen::VectorXcd next = lhs.partialPivLu().solve(rhs);
          for (int k = 0; k < m; ++k) yh[k][q] = next[k];
        }
        for (int k = 0; k < m; ++k) {
          fft_inverse_inplace(grid, yh[k]);
          y[k] = std::move(yh[k]);
        }
      } else {
        const std::vector<CVector> ay = apply_matrix(sys.drift, grid, y, t, prefix);
        std::vector<CVector> base(m);
        for (int k = 0; k < m; ++k) base[k] = y[k] + half * ay[k] + kI * dt * f[k] + kI * dw * F[k];
        if (with_noise) {
          const std::vector<CVector> by = apply_matrix(sys.noise, grid, y, t, prefix);
          for (int k = 0; k < m; ++k) base[k] += kI * dw * by[k];
        }
        std::vector<CVector> next(m);
        for (int k = 0; k < m; ++k) next[k] = base[k] + half * ay[k];
        for (int it = 0; it < 100; ++it) {
          const std::vector<CVector> an = apply_matrix(sys.drift, grid, next, t, prefix);
          double change = 0.0, scale = 0.0;
          for (int k = 0; k < m; ++k) {
            const CVector upd = base[k] + half * an[k];
            change += (upd - next[k]).squaredNorm();
            scale += upd.squaredNorm();
            next[k] = upd;
          }
          if (change <= 1e-28 * std::max(scale, 1e-300)) break;
        }
        y = std::move(next);
      }
      if (observe) observe(p, j + 1, y);
    }
  });
}

std::vector<SampledField> integrate_spde_system(const SpdeSystem& sys, const Grid& grid,
                                                const BrownianEnsemble& ensemble,
                                                const std::vector<CVector>& initial) {
  const int nodes = ensemble.time_grid().steps() + 1;
  std::vector<SampledField> out(initial.size(), SampledField(grid, ensemble.paths(), nodes, true));
  integrate_spde_system(sys, grid, ensemble, initial, [&](int p, int j, const std::vector<CVector>& y) {
    for (std::size_t k = 0; k < y.size(); ++k) out[k].slice(p, j) = y[k];
  });
  return out;
}

SampledField pinned_semimartingale(const Grid& grid, const BrownianEnsemble& ensemble, std::uint64_t seed,
                                   int mode_cap) {
  const BrownianEnsemble still(ensemble.time_grid(), 0,
                               std::vector<double>(static_cast<std::size_t>(ensemble.time_grid().steps() + 1), 0.0), 1);
  const SampledField u0 = random_adapted_field(grid, still, mix(seed, 0, 0), mode_cap);
  const SampledField u1 = random_adapted_field(grid, still, mix(seed, 1, 0), mode_cap);
  const TimeGrid& tg = ensemble.time_grid();
  SampledField z(grid, ensemble.paths(), tg.steps() + 1, true);
  for (int m = 0; m < ensemble.paths(); ++m) {
    for (int j = 0; j <= tg.steps(); ++j) {
      const double env = (j == 0 || j == tg.steps()) ? 0.0 : std::sin(kPi * tg.node(j) / tg.horizon());
      z.slice(m, j) = env * (u0.slice(0, 0) + ensemble.value(m, j) * u1.slice(0, 0));
    }
  }
  return z;
}

namespace {

struct BlockInput {
  const SampledField* z;
  const SampledField* coupled;  // Lambda z2 enters the z1 bracket
};

CarlemanBlock evaluate_block(const SampledField& z, const SampledField* coupled, const Symbol& a1, const Symbol& b1,
                             double mu, const BrownianEnsemble& ensemble, double log_scale) {
  const Grid& g = z.grid();
  const TimeGrid& tg = ensemble.time_grid();
  const double T = tg.horizon();
  const double dt = tg.dt();
  double zmax = 0.0;
  for (const cplx& v : z.raw()) zmax = std::max(zmax, std::abs(v));
  for (int m = 0; m < z.paths(); ++m)
    for (int j : {0, tg.steps()})
      if (z.slice(m, j).cwiseAbs().maxCoeff() > 1e-10 * std::max(zmax, 1.0))
        throw HypothesisError("Carleman estimate needs z(0) = z(T) = 0");
  const bool a_zero = a1.expr() && expr::is_zero(*a1.expr());
  const bool b_zero = b1.expr() && expr::is_zero(*b1.expr());
  const Symbol lambda = bessel_symbol(g.dim(), 1.0);
  const auto size = static_cast<Eigen::Index>(g.size());

  std::vector<CarlemanBlock> per_path(z.paths());
  parallel_for(static_cast<std::size_t>(z.paths()), [&](std::size_t pi) {
    const int m = static_cast<int>(pi);
    CarlemanBlock acc;
    for (int j = 0; j < tg.steps(); ++j) {
      const double t = tg.node(j);
      const double w = std::exp(mu * (t - T) * (t - T) - log_scale);
      const PathPrefix path = ensemble.prefix(m, j);
      const CVector zj = z.slice(m, j);
      const CVector dz = z.slice(m, j + 1) - zj;
      const CVector bz = b_zero ? CVector::Zero(size) : apply(b1, g, zj, t, path);
      const CVector az = a_zero ? CVector::Zero(size) : apply(a1, g, zj, t, path);
      CVector e = -kI * dz - az * dt - kI * bz * dt;
      if (coupled) e += apply(lambda, g, CVector(coupled->slice(m, j)), t, path) * dt;
      const CVector gvec = kI * mu * (t - T) * zj - kI * bz;
      acc.mass += w * norm2(g, zj) * dt;
      acc.shifted += w * norm2(g, mu * (t - T) * zj - bz) * dt;
      acc.pairing += w * inner_re(g, e, gvec);
      if (!b_zero) {
        const CVector bstar = apply_adjoint(b1, SpectralField(g, zj, Representation::physical), t, path).values;
        acc.skew += w * inner(g, e, bz - bstar).imag();
        acc.energy += w * inner_re(g, dz, apply(b1, g, dz, t, path));
      }
      acc.variation += (t - T) * w * norm2(g, dz);
    }
    per_path[pi] = acc;
  });
  CarlemanBlock out;
  for (const auto& b : per_path) {
    out.mass += b.mass;
    out.shifted += b.shifted;
    out.pairing += b.pairing;
    out.skew += b.skew;
    out.variation += b.variation;
    out.energy += b.energy;
  }
  const double n = z.paths();
  out.mass /= n;
  out.shifted /= n;
  out.pairing /= n;
  out.skew /= n;
  out.variation /= n;
  out.energy /= n;
  return out;
}

void close_block(CarlemanBlock& b, double mu, double weight) {
  b.lhs = b.mass + b.shifted / mu;
  b.rhs = weight * (4.0 / mu * b.pairing - 2.0 / mu * b.skew - 2.0 * b.variation - 2.0 / mu * b.energy);
}

void finish(CarlemanReport& rep) {
  rep.lhs = rep.rhs = 0.0;
  for (const auto& b : rep.blocks) {
    rep.lhs += b.lhs;
    rep.rhs += b.rhs;
  }
  rep.margin = rep.rhs - rep.lhs;
  rep.pass = rep.margin >= -1e-9 * std::abs(rep.rhs);
}

}  // namespace

CarlemanReport carleman_report(const SampledField& z, const Symbol& a1, const Symbol& b1, double mu,
                               const BrownianEnsemble& ensemble) {
  CarlemanReport rep;
  rep.mu = mu;
  rep.horizon = ensemble.time_grid().horizon();
  rep.log_scale = mu * rep.horizon * rep.horizon;
  CarlemanBlock b = evaluate_block(z, nullptr, a1, b1, mu, ensemble, rep.log_scale);
  close_block(b, mu, 1.0);
  rep.blocks.push_back(b);
  finish(rep);
  return rep;
}

CarlemanReport carleman_report_jordan(const SampledField& z1, const SampledField& z2, const Symbol& a1,
                                      const Symbol& b1, double mu, const BrownianEnsemble& ensemble,
                                      double jordan_constant) {
  CarlemanReport rep;
  rep.mu = mu;
  rep.horizon = ensemble.time_grid().horizon();
  rep.log_scale = mu * rep.horizon * rep.horizon;
  rep.jordan_constant = jordan_constant;
  CarlemanBlock first = evaluate_block(z1, &z2, a1, b1, mu, ensemble, rep.log_scale);
  CarlemanBlock second = evaluate_block(z2, nullptr, a1, b1, mu, ensemble, rep.log_scale);
  close_block(first, mu, 2.0);
  close_block(second, mu, 2.0 * jordan_constant);
  rep.blocks = {first, second};
  finish(rep);
  return rep;
}

CalibrationResult calibrate_carleman(const Grid& grid, const Symbol& a1, const Symbol& b1,
                                     const std::vector<double>& horizons, const std::vector<double>& mus,
                                     int trials, int paths, int steps, std::uint64_t seed) {
  CalibrationResult res;
  res.horizons = horizons;
  res.mus = mus;
  for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
    std::vector<double> rates;
    for (std::size_t mi = 0; mi < mus.size(); ++mi) {
      int passed = 0;
      for (int trial = 0; trial < trials; ++trial) {
        const BrownianEnsemble ens = sample_brownian(paths, TimeGrid(horizons[hi], steps), mix(seed, hi, trial));
        const SampledField z = pinned_semimartingale(grid, ens, mix(seed, hi + 1000, trial));
        if (carleman_report(z, a1, b1, mus[mi], ens).pass) ++passed;
      }
      rates.push_back(static_cast<double>(passed) / trials);
    }
    res.pass_rates.insert(res.pass_rates.end(), rates.begin(), rates.end());
    if (res.found) continue;
    for (std::size_t mi = 0; mi < mus.size(); ++mi) {
      bool all = true;
      for (std::size_t k = mi; k < mus.size(); ++k) all = all && rates[k] == 1.0;
      if (all) {
        res.found = true;
        res.horizon = horizons[hi];
        res.mu = mus[mi];
        break;
      }
    }
  }
  return res;
}

namespace {

// zeta = 1 on [0, 2T/3], 0 on [T, inf); derivatives 0..order at t.
std::vector<double> cutoff_derivatives(double t, double T, int order) {
  std::vector<double> d(order + 1, 0.0);
  const double a = 2.0 / 3.0;
  if (t <= a * T) {
    d[0] = 1.0;
    return d;
  }
  if (t >= T) return d;
  static thread_local std::vector<ExprPtr> cache;
  static thread_local double cached_T = -1.0;
  if (cached_T != T || static_cast<int>(cache.size()) < order + 1) {
    cached_T = T;
    cache.clear();
    // u = (t/T - a)/(1 - a); zeta = e1 / (e1 + e2), e1 = exp(-1/(1-u)), e2 = exp(-1/u)
    const ExprPtr u = expr::add(expr::mul(expr::constant(1.0 / (T * (1 - a))), expr::variable(var_t)),
                                expr::constant(-a / (1 - a)));
    const ExprPtr e1 = expr::func(Op::exp, expr::neg(expr::pow(expr::add(expr::constant(1.0), expr::neg(u)), -1.0)));
    const ExprPtr e2 = expr::func(Op::exp, expr::neg(expr::pow(u, -1.0)));
    ExprPtr z = expr::mul(e1, expr::pow(expr::add(e1, e2), -1.0));
    for (int k = 0; k <= order; ++k) {
      cache.push_back(z);
      z = expr::differentiate(z, var_t);
    }
  }
  ExprEnv env;
  env.t = t;
  for (int k = 0; k <= order; ++k) d[k] = expr::evaluate(*cache[k], env).real();
  return d;
}

double log_weighted_integral(const std::vector<double>& density, const TimeGrid& tg, double mu) {
  const double T = tg.horizon();
  double top = -kInf;
  std::vector<double> logs(density.size(), -kInf);
  for (std::size_t j = 0; j < density.size(); ++j) {
    if (density[j] <= 0.0) continue;
    const double t = tg.node(static_cast<int>(j));
    logs[j] = mu * (t - T) * (t - T) + std::log(tg.weight(static_cast<int>(j)) * density[j]);
    top = std::max(top, logs[j]);
  }
  if (!std::isfinite(top)) return -kInf;
  double acc = 0.0;
  for (double l : logs)
    if (std::isfinite(l)) acc += std::exp(l - top);
  return top + std::log(acc);
}

}  // namespace

UniquenessReport uniqueness_experiment(const EquationSpec& spec, const Grid& grid, const BrownianEnsemble& ensemble,
                                       const UniquenessOptions& opt) {
  const int m = spec.m;
  if (m < 1 || static_cast<int>(spec.principal.size()) != m) throw ParameterError("malformed equation spec");
  UniquenessReport rep;
  const TimeGrid& tg = ensemble.time_grid();
  const double T = tg.horizon();
  rep.horizon = T;

  const RootField roots = characteristic_roots(spec, sphere_samples(spec, grid, ensemble));
  const HypothesisReport hyp = check_hypotheses(roots, 1e-6);
  if (hyp.h1_simple)
    rep.route = "simple roots";
  else if (hyp.h1 && hyp.h2 && hyp.h3 && hyp.h4)
    rep.route = "jordan";
  else
    throw HypothesisError("characteristic roots violate H1' and H1-H4");

  auto coefficient = [&](const std::vector<Symbol>& v, int k) -> const Symbol* {
    if (k >= static_cast<int>(v.size())) return nullptr;
    if (v[k].expr() && expr::is_zero(*v[k].expr())) return nullptr;
    return &v[k];
  };
  // Full coefficient a_k + b_k acting on D_t^k u.
  std::vector<std::optional<Symbol>> full(m);
  for (int k = 0; k < m; ++k) {
    const Symbol* a = coefficient(spec.principal, k);
    const Symbol* b = coefficient(spec.drift, k);
    if (a && b)
      full[k] = sum(*a, *b);
    else if (a)
      full[k] = *a;
    else if (b)
      full[k] = *b;
  }

  SpdeSystem sys;
  sys.drift = MatrixSymbol(m, m);
  sys.noise = MatrixSymbol(m, m);
  bool any_noise = false;
  for (int k = 0; k + 1 < m; ++k) sys.drift(k, k + 1) = bessel_symbol(spec.dim, 1.0);
  for (int k = 0; k < m; ++k) {
    const Symbol lift = bessel_symbol(spec.dim, -(m - 1 - k));
    if (full[k]) {
      Symbol e = product(*full[k], lift);
      e.set_order(1.0);
      sys.drift(m - 1, k) = e;
    }
    if (const Symbol* c = coefficient(spec.noise, k)) {
      sys.noise(m - 1, k) = product(*c, lift);
      any_noise = true;
    }
  }
  if (!any_noise) sys.noise = MatrixSymbol();

  const auto size = static_cast<Eigen::Index>(grid.size());
  CVector h(size);
  for (std::size_t s = 0; s < grid.size(); ++s) h[static_cast<Eigen::Index>(s)] = std::cos(grid.point(s)[0]);
  const double switch_on = 2.0 * T / 3.0;
  sys.sources = [&](int, int, double t, const PathPrefix&, std::vector<CVector>& f, std::vector<CVector>&) {
    if (t >= switch_on - 1e-12 * T) f[m - 1] = opt.forcing * h;
  };

  CVector mask = CVector::Ones(size);
  if (opt.radius > 0.0)
    for (std::size_t s = 0; s < grid.size(); ++s)
      mask[static_cast<Eigen::Index>(s)] =
          smooth_cutoff(std::sqrt(norm_sq(grid.centered_point(s))) / opt.radius, 0.5);

  // Spatial multi-index weights sum_{|beta| <= r} |xi^beta|^2 by frequency.
  std::vector<std::vector<double>> weight_by_r(m, std::vector<double>(grid.size(), 0.0));
  for (int r = 0; r < m; ++r)
    for (std::size_t f = 0; f < grid.size(); ++f) {
      const Vec3 xi = grid.frequency(f);
      for (const auto& beta : multi_indices(grid.dim(), r)) {
        double p = 1.0;
        for (int d = 0; d < 3; ++d) p *= std::pow(xi[d] * xi[d], beta[d]);
        weight_by_r[r][f] += p;
      }
    }

  const int nodes = tg.steps() + 1;
  std::vector<double> lhs_density(static_cast<std::size_t>(ensemble.paths()) * nodes, 0.0);
  std::vector<double> rhs_density(lhs_density.size(), 0.0);
  std::vector<double> early(lhs_density.size(), 0.0);
  std::vector<std::vector<double>> zeta(nodes);
  for (int j = 0; j < nodes; ++j) zeta[j] = cutoff_derivatives(tg.node(j), T, m);

  auto observer = [&](int p, int j, const std::vector<CVector>& y) {
    const double t = tg.node(j);
    const PathPrefix path = ensemble.prefix(p, j);
    const std::size_t slot = static_cast<std::size_t>(p) * nodes + j;
    // U_k = D_t^k u in frequency.
    std::vector<CVector> uh(m);
    for (int k = 0; k < m; ++k) {
      uh[k] = y[k];
      fft_forward_inplace(grid, uh[k]);
      for (Eigen::Index q = 0; q < size; ++q)
        uh[k][q] *= std::pow(1.0 + norm_sq(grid.frequency(static_cast<std::size_t>(q))), -(m - 1 - k) / 2.0);
    }
    std::vector<cplx> dz(m + 1);
    for (int i = 0; i <= m; ++i) dz[i] = std::pow(-kI, i) * zeta[j][i];  // D_t^i zeta

    auto masked_norm = [&](CVector hat) {
      fft_inverse_inplace(grid, hat);
      return hat.cwiseProduct(mask).squaredNorm() * grid.cell_volume();
    };
    if (t <= T / 2 + 1e-12 * T) {
      CVector u = uh[0];
      fft_inverse_inplace(grid, u);
      early[slot] = norm2(grid, u);
    }
    if (zeta[j][0] == 0.0 && dz[1] == cplx(0.0, 0.0) && t < switch_on - 1e-12 * T) return;

    double lhs = 0.0;
    for (int k = 0; k < m; ++k) {
      CVector dk = CVector::Zero(size);
      for (int i = 0; i <= k; ++i) dk += binom(k, i) * dz[i] * uh[k - i];
      if (opt.radius > 0.0) {
        for (const auto& beta : multi_indices(grid.dim(), m - 1 - k)) {
          CVector b = dk;
          for (Eigen::Index q = 0; q < size; ++q) {
            const Vec3 xi = grid.frequency(static_cast<std::size_t>(q));
            cplx mono = 1.0;
            for (int d = 0; d < 3; ++d) mono *= std::pow(xi[d], beta[d]);
            b[q] *= mono;
          }
          lhs += masked_norm(b);
        }
      } else {
        for (Eigen::Index q = 0; q < size; ++q)
          lhs += weight_by_r[m - 1 - k][static_cast<std::size_t>(q)] * std::norm(dk[q]) * grid.frequency_weight();
      }
    }
    lhs_density[slot] = lhs;

    // Sources of the equation for zeta u.
    CVector src = CVector::Zero(size), noise_src = CVector::Zero(size);
    if (t >= switch_on - 1e-12 * T) {
      CVector gh = opt.forcing * h;
      fft_forward_inplace(grid, gh);
      src += zeta[j][0] * gh;
    }
    for (int i = 1; i <= m; ++i) src += binom(m, i) * dz[i] * uh[m - i];
    Sample s;
    s.t = t;
    s.path = path;
    for (int k = 1; k < m; ++k) {
      CVector comm = CVector::Zero(size);
      for (int i = 1; i <= k; ++i) comm += binom(k, i) * dz[i] * uh[k - i];
      if (comm.squaredNorm() == 0.0) continue;
      auto act = [&](const Symbol& a) {
        if (a.flags().x_independent) {
          CVector out = comm;
          for (Eigen::Index q = 0; q < size; ++q) {
            s.xi = grid.frequency(static_cast<std::size_t>(q));
            out[q] *= a(s);
          }
          return out;
        }
        CVector phys = comm;
        fft_inverse_inplace(grid, phys);
        CVector out = apply(a, grid, phys, t, path);
        fft_forward_inplace(grid, out);
        return out;
      };
      if (full[k]) src -= act(*full[k]);
      if (const Symbol* c = coefficient(spec.noise, k)) noise_src -= act(*c);
    }
    rhs_density[slot] = masked_norm(src) + masked_norm(noise_src);
  };

  const std::vector<CVector> initial(m, CVector::Zero(size));
  integrate_spde_system(sys, grid, ensemble, initial, observer);

  std::vector<double> lhs_mean(nodes, 0.0), rhs_mean(nodes, 0.0);
  for (int p = 0; p < ensemble.paths(); ++p)
    for (int j = 0; j < nodes; ++j) {
      const std::size_t slot = static_cast<std::size_t>(p) * nodes + j;
      lhs_mean[j] += lhs_density[slot] / ensemble.paths();
      rhs_mean[j] += rhs_density[slot] / ensemble.paths();
      rep.early_energy += tg.weight(j) * early[slot] / ensemble.paths();
    }

  rep.target = -(T * T / 4.0 - T * T / 9.0);
  double log_c = -kInf;
  for (double mu : opt.mu_list) {
    rep.mu.push_back(mu);
    rep.log_lhs.push_back(log_weighted_integral(lhs_mean, tg, mu));
    rep.log_rhs.push_back(log_weighted_integral(rhs_mean, tg, mu));
    if (std::isfinite(rep.log_rhs.back()))
      log_c = std::max(log_c, rep.log_lhs.back() - std::log(T + 1.0 / mu) - rep.log_rhs.back());
  }
  if (!std::isfinite(log_c)) {
    // No source: u vanishes and the inequality reads 0 <= 0.
    rep.constant = 0.0;
    rep.pass = rep.early_energy == 0.0;
    rep.decreasing = true;
    return rep;
  }
  rep.constant = std::exp(log_c);
  for (std::size_t i = 0; i < rep.mu.size(); ++i)
    rep.log_bound.push_back(log_c + std::log(T + 1.0 / rep.mu[i]) + rep.log_rhs[i] - rep.mu[i] * T * T / 4.0);

  const double n = static_cast<double>(rep.mu.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < rep.mu.size(); ++i) {
    mx += rep.mu[i];
    my += rep.log_bound[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < rep.mu.size(); ++i) {
    sxy += (rep.mu[i] - mx) * (rep.log_bound[i] - my);
    sxx += (rep.mu[i] - mx) * (rep.mu[i] - mx);
  }
  rep.slope = sxx > 0 ? sxy / sxx : 0.0;
  rep.relative_error = std::abs(rep.slope - rep.target) / std::abs(rep.target);
  rep.decreasing = true;
  for (std::size_t i = 1; i < rep.log_bound.size(); ++i)
    rep.decreasing = rep.decreasing && rep.log_bound[i] < rep.log_bound[i - 1];
  rep.pass = rep.decreasing && rep.relative_error <= opt.tolerance;
  return rep;
}

}  // namespace spdo
