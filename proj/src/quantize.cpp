#include "spdo/quantize.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "spdo/cutoff.hpp"

namespace spdo {

namespace {

// e^{i x.xi} on the lattice is a product of N-th roots of unity.
class PhaseTable {
 public:
  explicit PhaseTable(const Grid& g) : grid_(g), roots_(g.n()) {
    for (int r = 0; r < g.n(); ++r) roots_[r] = std::polar(1.0, 2.0 * kPi * r / g.n());
  }
  cplx operator()(std::size_t x_site, std::size_t xi_site) const {
    const MultiIndex m = grid_.lattice(x_site);
    const MultiIndex k = grid_.wavenumber(xi_site);
    const int n = grid_.n();
    int r = 0;
    for (int d = 0; d < grid_.dim(); ++d) r += m[d] * k[d];
    return roots_[((r % n) + n) % n];
  }

 private:
  Grid grid_;
  std::vector<cplx> roots_;
};

void require_physical(const SpectralField& u) {
  if (u.rep != Representation::physical) throw RepresentationError("operator input must be in physical representation");
}

double band_epsilon(const Grid& g) { return 0.5 / (std::sqrt(static_cast<double>(g.dim())) * g.band_limit()); }

// Minimal-image separation x - y.
Vec3 separation(const Grid& g, std::size_t x_site, std::size_t y_site) {
  const MultiIndex a = g.lattice(x_site), b = g.lattice(y_site);
  Vec3 z{0.0, 0.0, 0.0};
  for (int d = 0; d < g.dim(); ++d) {
    int k = ((a[d] - b[d]) % g.n() + g.n()) % g.n();
    if (k >= g.n() / 2) k -= g.n();
    z[d] = k * g.spacing();
  }
  return z;
}

std::size_t difference_site(const Grid& g, std::size_t x_site, std::size_t y_site) {
  const MultiIndex a = g.lattice(x_site), b = g.lattice(y_site);
  MultiIndex m{0, 0, 0};
  for (int d = 0; d < g.dim(); ++d) m[d] = ((a[d] - b[d]) % g.n() + g.n()) % g.n();
  return g.flat(m);
}

CVector amplitude_pass(const Amplitude& a, const CVector& u, const Grid& g, double t, const PathPrefix& path,
                       double eps) {
  const auto size = static_cast<Eigen::Index>(g.size());
  auto chi = [&](std::size_t f) { return smooth_cutoff(eps * std::sqrt(norm_sq(g.frequency(f)))); };
  if (!a.flags().y_dependent) {
    Symbol cut(
        [&](const Sample& s) {
          return smooth_cutoff(eps * std::sqrt(norm_sq(s.xi))) * quantized_value(a, s);
        },
        a.order(), a.integrability(), a.flags());
    cut.flags().homogeneous_degree.reset();
    return apply_symbol_op(cut, SpectralField(g, u, Representation::physical), t, path).values;
  }
  const PhaseTable phase(g);
  if (a.flags().x_independent) {
    CVector w(size);
    parallel_for(g.size(), [&](std::size_t f) {
      Sample s;
      s.t = t;
      s.path = path;
      s.xi = g.frequency(f);
      const double c = chi(f);
      cplx acc = 0.0;
      if (c != 0.0) {
        for (std::size_t y = 0; y < g.size(); ++y) {
          s.y = g.point(y);
          acc += std::conj(phase(y, f)) * quantized_value(a, s) * u[static_cast<Eigen::Index>(y)];
        }
      }
      w[static_cast<Eigen::Index>(f)] = c * g.cell_volume() * acc;
    });
    fft_inverse_inplace(g, w);
    return w;
  }
  CVector out(size);
  parallel_for(g.size(), [&](std::size_t x) {
    Sample s;
    s.t = t;
    s.path = path;
    s.x = g.point(x);
    cplx total_sum = 0.0;
    for (std::size_t f = 0; f < g.size(); ++f) {
      const double c = chi(f);
      if (c == 0.0) continue;
      s.xi = g.frequency(f);
      cplx inner = 0.0;
      for (std::size_t y = 0; y < g.size(); ++y) {
        s.y = g.point(y);
        inner += std::conj(phase(y, f)) * quantized_value(a, s) * u[static_cast<Eigen::Index>(y)];
      }
      total_sum += c * phase(x, f) * inner;
    }
    out[static_cast<Eigen::Index>(x)] = g.cell_volume() * g.frequency_weight() * total_sum;
  });
  return out;
}

// Value of Lap_xi^k a (plain a when k = 0) with the origin patch applied.
cplx laplacian_power(const Symbol& a, const Sample& s, int k, int dim) {
  if (k == 0) return quantized_value(a, s);
  double patch = 1.0;
  if (a.flags().homogeneous_degree) {
    patch = 1.0 - smooth_cutoff(std::sqrt(norm_sq(s.xi)));
    if (patch == 0.0) return 0.0;
  }
  cplx acc = 0.0;
  for (const auto& g : multi_indices(dim, k)) {
    if (total(g) != k) continue;
    double coef = 1.0;
    for (int j = 2; j <= k; ++j) coef *= j;
    for (int d = 0; d < 3; ++d)
      for (int j = 2; j <= g[d]; ++j) coef /= j;
    Derivs dv;
    for (int d = 0; d < 3; ++d) dv.xi[d] = 2 * g[d];
    acc += coef * a.derivative(s, dv);
  }
  return patch * acc;
}

// Row x of L^{-n} sum_xi e^{i(x-y).xi} Lap^k a(x, y, xi), over all y.
CVector kernel_row_raw(const Amplitude& a, const Grid& g, double t, const PathPrefix& path, std::size_t x, int k,
                       const PhaseTable& phase) {
  CVector row(static_cast<Eigen::Index>(g.size()));
  Sample s;
  s.t = t;
  s.path = path;
  s.x = g.point(x);
  for (std::size_t y = 0; y < g.size(); ++y) {
    s.y = g.point(y);
    cplx acc = 0.0;
    for (std::size_t f = 0; f < g.size(); ++f) {
      s.xi = g.frequency(f);
      acc += phase(x, f) * std::conj(phase(y, f)) * laplacian_power(a, s, k, g.dim());
    }
    row[static_cast<Eigen::Index>(y)] = g.frequency_weight() * acc;
  }
  return row;
}

// Convolution kernel c(z) = L^{-n} sum_xi e^{i z.xi} Lap^k a(xi) for x-independent symbols.
CVector convolution_kernel(const Symbol& a, const Grid& g, double t, const PathPrefix& path, int k) {
  CVector c(static_cast<Eigen::Index>(g.size()));
  Sample s;
  s.t = t;
  s.path = path;
  for (std::size_t f = 0; f < g.size(); ++f) {
    s.xi = g.frequency(f);
    c[static_cast<Eigen::Index>(f)] = laplacian_power(a, s, k, g.dim());
  }
  fft_inverse_inplace(g, c);
  return c;
}

int ibp_power(const Symbol& a, int dim) {
  return static_cast<int>(std::floor((a.order() + dim) / 2.0)) + 1;
}

}  // namespace

cplx quantized_value(const Symbol& a, const Sample& s) {
  if (a.flags().homogeneous_degree) {
    const double patch = 1.0 - smooth_cutoff(std::sqrt(norm_sq(s.xi)));
    if (patch == 0.0) return 0.0;
    return patch * a(s);
  }
  return a(s);
}

SpectralField apply_symbol_op(const Symbol& a, const SpectralField& u, double t, const PathPrefix& path) {
  require_physical(u);
  if (a.flags().y_dependent) throw ParameterError("apply_symbol_op expects a symbol; use apply_amplitude_op");
  const Grid& g = u.grid;
  CVector uhat = u.values;
  fft_forward_inplace(g, uhat);
  Sample s;
  s.t = t;
  s.path = path;
  if (a.flags().x_independent) {
    for (std::size_t f = 0; f < g.size(); ++f) {
      s.xi = g.frequency(f);
      uhat[static_cast<Eigen::Index>(f)] *= quantized_value(a, s);
    }
    fft_inverse_inplace(g, uhat);
    return SpectralField(g, std::move(uhat), Representation::physical);
  }
  const PhaseTable phase(g);
  CVector out(static_cast<Eigen::Index>(g.size()));
  parallel_for(g.size(), [&](std::size_t x) {
    Sample q = s;
    q.x = g.point(x);
    q.y = q.x;
    cplx acc = 0.0;
    for (std::size_t f = 0; f < g.size(); ++f) {
      q.xi = g.frequency(f);
      acc += phase(x, f) * quantized_value(a, q) * uhat[static_cast<Eigen::Index>(f)];
    }
    out[static_cast<Eigen::Index>(x)] = g.frequency_weight() * acc;
  });
  return SpectralField(g, std::move(out), Representation::physical);
}

SampledField apply_symbol_op(const Symbol& a, const SampledField& u, const BrownianEnsemble& ensemble) {
  if (!u.adapted()) throw ParameterError("operator input must be adapted");
  if (u.paths() > ensemble.paths() || u.nodes() != ensemble.time_grid().steps() + 1)
    throw ParameterError("field and ensemble shapes differ");
  SampledField out(u.grid(), u.paths(), u.nodes(), true);
  const TimeGrid& tg = ensemble.time_grid();
  for (int m = 0; m < u.paths(); ++m)
    for (int j = 0; j < u.nodes(); ++j)
      out.slice(m, j) = apply_symbol_op(a, u.spectral(m, j), tg.node(j), ensemble.prefix(m, j)).values;
  return out;
}

AmplitudeResult apply_amplitude_op(const Amplitude& a, const SpectralField& u, double t, const PathPrefix& path,
                                   const AmplitudeOptions& opt) {
  require_physical(u);
  const double eps = opt.epsilon > 0.0 ? opt.epsilon : band_epsilon(u.grid);
  AmplitudeResult r{SpectralField(u.grid, amplitude_pass(a, u.values, u.grid, t, path, eps), Representation::physical),
                    SpectralField(u.grid), 0.0, true};
  if (eps <= band_epsilon(u.grid)) {
    r.refined = r.value;
    return r;
  }
  r.refined = SpectralField(u.grid, amplitude_pass(a, u.values, u.grid, t, path, eps / 2), Representation::physical);
  const double scale = std::max(r.refined.values.norm(), std::numeric_limits<double>::min());
  r.relative_change = (r.value.values - r.refined.values).norm() / scale;
  r.converged = r.relative_change <= opt.tolerance;
  if (!r.converged && opt.throw_on_warning)
    throw RegularizationWarning("cutoff refinement changed the result by " + std::to_string(r.relative_change));
  return r;
}

SpectralField apply_adjoint(const Amplitude& a, const SpectralField& u, double t, const PathPrefix& path) {
  return apply_amplitude_op(conjugated(swapped_xy(a)), u, t, path).value;
}

SpectralField apply_transpose(const Amplitude& a, const SpectralField& u, double t, const PathPrefix& path) {
  return apply_amplitude_op(reflected_xi(swapped_xy(a)), u, t, path).value;
}

KernelMatrix compute_kernel(const Amplitude& a_in, const Grid& g, double t, const PathPrefix& path,
                            const KernelOptions& opt) {
  Amplitude a = a_in;
  a.set_length_scale(g.period());
  const bool full = a.order() < -g.dim() || a.flags().xi_compact;
  if (!full && !opt.off_diagonal_only)
    throw SingularKernelError("kernel diagonal is singular for order >= -n; request off-diagonal entries only");
  const int k = full ? 0 : ibp_power(a, g.dim());
  KernelMatrix km{g, Eigen::MatrixXcd(g.size(), g.size()), full, k};
  const auto size = g.size();

  auto finish = [&](std::size_t x, std::size_t y, cplx raw) {
    if (k == 0) return raw;
    if (x == y) return cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    const double r2 = norm_sq(separation(g, x, y));
    return ((k % 2) ? -1.0 : 1.0) * raw / std::pow(r2, k);
  };

  if (a.flags().x_independent && !a.flags().y_dependent) {
    const CVector c = convolution_kernel(a, g, t, path, k);
    parallel_for(size, [&](std::size_t x) {
      for (std::size_t y = 0; y < size; ++y)
        km.entries(x, y) = finish(x, y, c[static_cast<Eigen::Index>(difference_site(g, x, y))]);
    });
    return km;
  }
  const PhaseTable phase(g);
  parallel_for(size, [&](std::size_t x) {
    const CVector row = kernel_row_raw(a, g, t, path, x, k, phase);
    for (std::size_t y = 0; y < size; ++y) km.entries(x, y) = finish(x, y, row[static_cast<Eigen::Index>(y)]);
  });
  return km;
}

void write_kernel_csv(const KernelMatrix& k, std::ostream& out) {
  out.precision(17);
  for (Eigen::Index i = 0; i < k.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.entries.cols(); ++j) {
      if (j) out << ',';
      out << k.entries(i, j).real() << ',' << k.entries(i, j).imag();
    }
    out << '\n';
  }
}

DecayReport kernel_decay_check(const Symbol& a_in, const Grid& g, double t, const PathPrefix& path) {
  Symbol a = a_in;
  a.set_length_scale(g.period());
  DecayReport rep;
  rep.threshold = -(g.dim() + 1) + 0.3;
  const bool full = a.order() < -g.dim() || a.flags().xi_compact;
  rep.off_diagonal_only = !full;
  const int k = full ? 0 : ibp_power(a, g.dim());

  CVector row;
  if (a.flags().x_independent && !a.flags().y_dependent) {
    row = convolution_kernel(a, g, t, path, k);  // c(z) = K(z, 0) = K(0, -z)
  } else {
    const PhaseTable phase(g);
    const CVector r = kernel_row_raw(a, g, t, path, 0, k, phase);
    row = CVector(r.size());
    for (std::size_t y = 0; y < g.size(); ++y)
      row[static_cast<Eigen::Index>(difference_site(g, 0, y))] = r[static_cast<Eigen::Index>(y)];
  }
  for (int d = 1; d < g.n() / 2; d *= 2) {
    MultiIndex m{0, 0, 0};
    m[0] = d;
    const std::size_t site = g.flat(m);
    const double dist = d * g.spacing();
    double mag = std::abs(row[static_cast<Eigen::Index>(site)]);
    if (k > 0) mag /= std::pow(dist, 2 * k);
    rep.separations.push_back(dist);
    rep.magnitudes.push_back(mag);
  }
  double peak = 0.0;
  for (double v : rep.magnitudes) peak = std::max(peak, v);
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < rep.magnitudes.size(); ++i) {
    if (rep.magnitudes[i] <= 1e-13 * peak || rep.magnitudes[i] == 0.0) continue;
    lx.push_back(std::log(1.0 + rep.separations[i]));
    ly.push_back(std::log(rep.magnitudes[i]));
  }
  if (lx.size() < 2) {
    rep.exponent = -std::numeric_limits<double>::infinity();
  } else {
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    rep.exponent = sxy / sxx;
  }
  rep.pass = rep.exponent <= rep.threshold;
  return rep;
}

}  // namespace spdo
