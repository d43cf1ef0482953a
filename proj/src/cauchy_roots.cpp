#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "spdo/cauchy.hpp"
#include "spdo/quantize.hpp"

namespace spdo {

namespace {

ExprPtr xi_norm_sq_expr(int dim) {
  std::vector<ExprPtr> terms;
  for (int d = 0; d < dim; ++d) terms.push_back(expr::pow(expr::variable(var_xi + d), 2.0));
  return expr::add(std::move(terms));
}

Symbol principal_term(const ExprPtr& e, double order) {
  Symbol s = Symbol::from_expr(e, order);
  return s;
}

double cluster_radius(double scale) { return 10.0 * std::sqrt(std::numeric_limits<double>::epsilon()) * scale; }

// Greedy clustering of roots: label per root.
std::vector<int> clusters(const std::vector<cplx>& r, double radius, int& count) {
  std::vector<int> label(r.size(), -1);
  count = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (label[i] >= 0) continue;
    label[i] = count;
    for (std::size_t k = i + 1; k < r.size(); ++k)
      if (label[k] < 0 && std::abs(r[k] - r[i]) <= radius) label[k] = count;
    ++count;
  }
  return label;
}

double root_scale(const std::vector<cplx>& r) {
  double s = 1.0;
  for (const cplx& v : r) s = std::max(s, 1.0 + std::abs(v));
  return s;
}

Sample interpolate(const Sample& a, const Sample& b) {
  Sample s = b;
  s.t = 0.5 * (a.t + b.t);
  for (int d = 0; d < 3; ++d) {
    s.x[d] = 0.5 * (a.x[d] + b.x[d]);
    s.xi[d] = 0.5 * (a.xi[d] + b.xi[d]);
  }
  const double r = std::sqrt(norm_sq(s.xi));
  if (r > 0)
    for (double& v : s.xi) v /= r;
  else
    s.xi = b.xi;
  return s;
}

struct Match {
  std::vector<cplx> ordered;
  double ratio = kInf;  // second-best / best cost over inequivalent assignments
};

Match match_roots(const std::vector<cplx>& prev, const std::vector<cplx>& cur) {
  const std::size_t m = cur.size();
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  const double radius = cluster_radius(root_scale(cur));
  std::vector<std::pair<double, std::vector<int>>> costs;
  do {
    double c = 0.0;
    for (std::size_t k = 0; k < m; ++k) c += std::abs(cur[perm[k]] - prev[k]);
    costs.emplace_back(c, perm);
  } while (std::next_permutation(perm.begin(), perm.end()));
  std::sort(costs.begin(), costs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Match out;
  const auto& best = costs.front().second;
  for (std::size_t k = 0; k < m; ++k) out.ordered.push_back(cur[best[k]]);
  for (std::size_t i = 1; i < costs.size(); ++i) {
    double diff = 0.0;
    for (std::size_t k = 0; k < m; ++k) diff = std::max(diff, std::abs(cur[costs[i].second[k]] - out.ordered[k]));
    if (diff <= radius) continue;
    out.ratio = costs.front().first > 0 ? costs[i].first / costs.front().first : kInf;
    break;
  }
  return out;
}

std::vector<cplx> continue_roots(const EquationSpec& spec, const Sample& a, const std::vector<cplx>& ra,
                                 const Sample& b, const std::vector<cplx>& rb, int depth, int& refinements) {
  Match m = match_roots(ra, rb);
  if (m.ratio >= 1.2 || depth >= 8) return m.ordered;
  ++refinements;
  const Sample mid = interpolate(a, b);
  const std::vector<cplx> rm = continue_roots(spec, a, ra, mid, roots_at(spec, mid), depth + 1, refinements);
  return continue_roots(spec, mid, rm, b, rb, depth + 1, refinements);
}

}  // namespace

Symbol xi_norm_symbol(int dim) {
  Symbol s = Symbol::from_expr(expr::pow(xi_norm_sq_expr(dim), 0.5), 1.0, kInf, "|xi|");
  s.flags().homogeneous_degree = 1.0;
  return s;
}

Symbol bessel_symbol(int dim, double s) {
  return Symbol::from_expr(expr::pow(expr::add(expr::constant(1.0), xi_norm_sq_expr(dim)), s / 2.0), s);
}

EquationSpec wave_spec(int dim, double noise) {
  EquationSpec e;
  e.name = "wave";
  e.m = 2;
  e.dim = dim;
  e.principal = {principal_term(xi_norm_sq_expr(dim), 2.0), zero_symbol(1.0)};
  e.noise = {Symbol::constant(noise), zero_symbol()};
  return e;
}

EquationSpec schrodinger_spec(int dim, double noise) {
  EquationSpec e;
  e.name = "schrodinger";
  e.m = 2;
  e.dim = dim;
  e.principal = {principal_term(expr::neg(xi_norm_sq_expr(dim)), 2.0), zero_symbol(1.0)};
  e.noise = {Symbol::constant(noise), zero_symbol()};
  return e;
}

EquationSpec double_root_spec(int dim) {
  EquationSpec e;
  e.name = "double-root";
  e.m = 4;
  e.dim = dim;
  const ExprPtr r2 = xi_norm_sq_expr(dim);
  e.principal = {principal_term(expr::neg(expr::pow(r2, 2.0)), 4.0), zero_symbol(3.0),
                 principal_term(expr::mul(expr::constant(-2.0), r2), 2.0), zero_symbol(1.0)};
  return e;
}

MatrixSymbol::MatrixSymbol(int r, int c) : rows(r), cols(c) {
  entries.assign(static_cast<std::size_t>(r) * c, zero_symbol());
}

bool MatrixSymbol::is_zero(int r, int c) const {
  const Symbol& s = (*this)(r, c);
  return s.expr() && expr::is_zero(*s.expr());
}

bool MatrixSymbol::x_independent() const {
  for (const auto& e : entries)
    if (!e.flags().x_independent || e.flags().y_dependent) return false;
  return true;
}

Eigen::MatrixXcd MatrixSymbol::at(const Sample& s) const {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (!is_zero(r, c)) out(r, c) = quantized_value((*this)(r, c), s);
  return out;
}

MatrixSymbol build_companion_symbol(const EquationSpec& spec) {
  if (spec.m < 1 || static_cast<int>(spec.principal.size()) != spec.m)
    throw ParameterError("equation needs m >= 1 principal coefficients");
  const int m = spec.m;
  MatrixSymbol out(m, m);
  const Symbol norm = xi_norm_symbol(spec.dim);
  for (int k = 0; k + 1 < m; ++k) out(k, k + 1) = norm;
  for (int k = 0; k < m; ++k) {
    const Symbol& a = spec.principal[k];
    if (a.expr() && expr::is_zero(*a.expr())) continue;
    Symbol entry;
    const double power = k + 1 - m;
    if (power == 0.0) {
      entry = a;
    } else if (a.expr()) {
      entry = Symbol::from_expr(expr::mul(a.expr(), expr::pow(xi_norm_sq_expr(spec.dim), power / 2.0)), 1.0);
    } else {
      Symbol scale = Symbol::from_expr(expr::pow(xi_norm_sq_expr(spec.dim), power / 2.0), power);
      entry = product(a, scale);
    }
    entry.set_order(1.0);
    entry.flags().homogeneous_degree = 1.0;
    out(m - 1, k) = entry;
  }
  return out;
}

std::vector<Sample> sphere_samples(const EquationSpec& spec, const Grid& grid, const BrownianEnsemble& ensemble,
                                   int directions, int x_points, int times, int paths) {
  std::vector<Vec3> dirs;
  if (spec.dim == 1) {
    dirs = {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};
  } else if (spec.dim == 2) {
    for (int k = 0; k < directions; ++k) {
      const double a = 2.0 * kPi * k / directions;
      dirs.push_back({std::cos(a), std::sin(a), 0.0});
    }
  } else {
    const int levels = std::max(2, directions / 2);
    for (int i = 0; i < levels; ++i) {
      const double th = kPi * (i + 0.5) / levels;
      for (int k = 0; k < directions; ++k) {
        const double ph = 2.0 * kPi * k / directions;
        dirs.push_back({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
      }
    }
  }
  const TimeGrid& tg = ensemble.time_grid();
  std::vector<Sample> out;
  const int np = std::min(paths, ensemble.paths());
  const int nt = std::max(1, times);
  const int nx = std::max(1, std::min(x_points, grid.n()));
  for (int m = 0; m < np; ++m) {
    for (int it = 0; it < nt; ++it) {
      const int j = nt == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(it) * tg.steps() / (nt - 1)));
      for (int ix = 0; ix < nx; ++ix) {
        MultiIndex site{ix * (grid.n() / nx), 0, 0};
        for (const Vec3& d : dirs) {
          Sample s;
          s.t = tg.node(j);
          s.path = ensemble.prefix(m, j);
          s.x = grid.point(grid.flat(site));
          s.y = s.x;
          s.xi = d;
          out.push_back(s);
        }
      }
    }
  }
  return out;
}

std::vector<cplx> roots_at(const EquationSpec& spec, const Sample& s) {
  const int m = spec.m;
  std::vector<cplx> a(m);
  for (int k = 0; k < m; ++k) a[k] = spec.principal[k](s);
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) c(i, i + 1) = 1.0;
  for (int k = 0; k < m; ++k) c(m - 1, k) = a[k];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(c, false);
  std::vector<cplx> roots(solver.eigenvalues().data(), solver.eigenvalues().data() + m);
  // Newton polish of simple roots.
  for (cplx& r : roots) {
    for (int it = 0; it < 2; ++it) {
      cplx p = 1.0, dp = 0.0;
      for (int k = 0; k < m; ++k) {
        dp = dp * r + p;
        p = p * r;
      }
      // p(lambda) = lambda^m - sum a_k lambda^k, dp = m lambda^{m-1} - sum k a_k lambda^{k-1}
      cplx q = 0.0, dq = 0.0;
      for (int k = m - 1; k >= 0; --k) {
        dq = dq * r + q;
        q = q * r + a[k];
      }
      p -= q;
      dp -= dq;
      if (std::abs(dp) < 1e-6 * root_scale(roots)) break;
      r -= p / dp;
    }
  }
  return roots;
}

RootField characteristic_roots(const EquationSpec& spec, const std::vector<Sample>& samples) {
  RootField f;
  f.samples = samples;
  f.roots.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { f.roots[i] = roots_at(spec, samples[i]); });
  for (std::size_t i = 1; i < samples.size(); ++i)
    f.roots[i] = continue_roots(spec, samples[i - 1], f.roots[i - 1], samples[i], f.roots[i], 0, f.refinements);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double amax = 0.0;
    std::vector<cplx> a(spec.m);
    for (int k = 0; k < spec.m; ++k) {
      a[k] = spec.principal[k](samples[i]);
      amax = std::max(amax, std::abs(a[k]));
    }
    for (const cplx& r : f.roots[i]) {
      cplx p = std::pow(r, spec.m);
      for (int k = 0; k < spec.m; ++k) p -= a[k] * std::pow(r, k);
      f.max_residual = std::max(f.max_residual, std::abs(p) / (1.0 + amax));
    }
  }
  return f;
}

HypothesisReport check_hypotheses(const RootField& roots, double eps_tol) {
  HypothesisReport h;
  h.h1 = h.h1_simple = h.h2 = h.h3 = h.h4 = true;
  h.min_abs_imag = kInf;
  bool any_complex = false;
  std::vector<int> first_kind;
  std::vector<int> first_pattern;
  auto witness = [&](const std::string& tag, std::size_t i) {
    if (h.witnesses.size() < 12) {
      const Sample& s = roots.samples[i];
      h.witnesses.push_back(tag + " at t=" + std::to_string(s.t) + " x=" + std::to_string(s.x[0]) + " xi=(" +
                            std::to_string(s.xi[0]) + "," + std::to_string(s.xi[1]) + "," + std::to_string(s.xi[2]) +
                            ")");
    }
  };
  for (std::size_t i = 0; i < roots.roots.size(); ++i) {
    const auto& r = roots.roots[i];
    const double radius = cluster_radius(root_scale(r));
    int count = 0;
    const auto label = clusters(r, radius, count);
    std::vector<int> size(count, 0);
    for (int l : label) ++size[l];
    std::vector<int> kind(r.size());
    std::vector<int> pattern;
    bool h1 = true, h1s = true, h2 = true;
    for (std::size_t k = 0; k < r.size(); ++k) {
      const bool real = std::abs(r[k].imag()) <= radius;
      kind[k] = real ? 0 : 1;
      const int mult = size[label[k]];
      if (mult > 1) h1s = false;
      if (real && mult > 1) h1 = false;
      if (!real && mult > 2) h1 = false;
      if (!real) {
        any_complex = true;
        h.min_abs_imag = std::min(h.min_abs_imag, std::abs(r[k].imag()));
        if (std::abs(r[k].imag()) < eps_tol - 1e-12) h2 = false;
      }
    }
    for (int c = 0; c < count; ++c) {
      std::size_t rep = 0;
      while (label[rep] != c) ++rep;
      if (kind[rep]) pattern.push_back(size[c]);
    }
    std::sort(pattern.begin(), pattern.end());
    if (i == 0) {
      first_kind = kind;
      first_pattern = pattern;
    }
    if (!h1 && h.h1) witness("H1 fails", i);
    if (!h1s && h.h1_simple) witness("H1' fails", i);
    if (!h2 && h.h2) witness("H2 fails", i);
    h.h1 = h.h1 && h1;
    h.h1_simple = h.h1_simple && h1s;
    h.h2 = h.h2 && h2;
    if (kind != first_kind && h.h3) {
      witness("H3 fails", i);
      h.h3 = false;
    }
    if (pattern != first_pattern && h.h4) {
      witness("H4 fails", i);
      h.h4 = false;
    }
  }
  h.h2_vacuous = !any_complex;
  if (!any_complex) h.min_abs_imag = 0.0;
  return h;
}

Diagonalization diagonalize_at(const MatrixSymbol& sigma, const Sample& s, bool jordan_allowed) {
  const double rho = std::sqrt(norm_sq(s.xi));
  if (rho == 0.0) throw ParameterError("diagonalization needs xi != 0");
  Sample unit = s;
  for (double& v : unit.xi) v /= rho;
  const Eigen::MatrixXcd m = sigma.at(unit);
  const int n = static_cast<int>(m.rows());
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m);
  std::vector<cplx> ev(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  const double scale = std::max(1.0, m.norm());
  int count = 0;
  const auto label = clusters(ev, cluster_radius(root_scale(ev)), count);

  Diagonalization out;
  Eigen::MatrixXcd v(n, n);
  Eigen::MatrixXcd ideal = Eigen::MatrixXcd::Zero(n, n);
  auto fix_phase = [](Eigen::VectorXcd c) {
    c.normalize();
    Eigen::Index k;
    c.cwiseAbs().maxCoeff(&k);
    return Eigen::VectorXcd(c * (std::abs(c[k]) / c[k]));
  };
  int col = 0;
  for (int c = 0; c < count; ++c) {
    std::vector<int> members;
    cplx mean = 0.0;
    for (int k = 0; k < n; ++k)
      if (label[k] == c) {
        members.push_back(k);
        mean += ev[k];
      }
    mean /= static_cast<double>(members.size());
    if (members.size() == 1) {
      v.col(col) = fix_phase(solver.eigenvectors().col(members[0]));
      ideal(col, col) = ev[members[0]];
      ++col;
      continue;
    }
    if (members.size() > 2) throw DiagonalizationError("eigenvalue multiplicity above two");
    const Eigen::MatrixXcd shifted = m - mean * Eigen::MatrixXcd::Identity(n, n);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int nullity = 0;
    for (int k = 0; k < n; ++k)
      if (sv[k] <= 1e-6 * scale) ++nullity;
    if (nullity >= 2) {
      for (int k = 0; k < 2; ++k) {
        v.col(col) = fix_phase(svd.matrixV().col(n - 1 - k));
        ideal(col, col) = mean;
        ++col;
      }
      continue;
    }
    if (!jordan_allowed) throw DiagonalizationError("defective double eigenvalue and Jordan blocks are not allowed");
    const Eigen::VectorXcd v1 = fix_phase(svd.matrixV().col(n - 1));
    Eigen::VectorXcd v2 = shifted.completeOrthogonalDecomposition().solve(v1);
    v2 -= v1 * v1.dot(v2);
    v.col(col) = v1;
    v.col(col + 1) = v2;
    ideal(col, col) = mean;
    ideal(col + 1, col + 1) = mean;
    ideal(col, col + 1) = 1.0;
    out.jordan = true;
    col += 2;
  }
  out.r_inv = v;
  out.r = v.inverse();
  const Eigen::MatrixXcd full = sigma.at(s);
  out.j = out.r * full * out.r_inv;
  out.residual = (out.r * m * out.r_inv - ideal).norm() / scale;
  if (out.residual > 1e-9) {
    if (!jordan_allowed || !out.jordan)
      throw DiagonalizationError("diagonalization residual " + std::to_string(out.residual) + " above tolerance");
  }
  return out;
}

std::vector<Diagonalization> diagonalize_symbol(const MatrixSymbol& sigma, const std::vector<Sample>& samples,
                                                bool jordan_allowed) {
  std::vector<Diagonalization> out(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { out[i] = diagonalize_at(sigma, samples[i], jordan_allowed); });
  return out;
}

}  // namespace spdo
