#include "spdo/harmonic.hpp"

#include <algorithm>
#include <cmath>

#include "spdo/cutoff.hpp"

namespace spdo {

LPPartition::LPPartition(double k_star) : k_star_(k_star), a_(std::max(0.5, 1.0 / k_star)) {
  if (!(k_star > 1.0)) throw ParameterError("annulus parameter k* must exceed 1");
}

double LPPartition::low(const Vec3& xi) const { return smooth_cutoff(std::sqrt(norm_sq(xi)), a_); }

double LPPartition::annulus(const Vec3& xi) const {
  const double r = std::sqrt(norm_sq(xi));
  return smooth_cutoff(r / 2.0, a_) - smooth_cutoff(r, a_);
}

int LPPartition::blocks_for(double radius) const {
  if (radius <= a_) return 0;
  return std::max(0, static_cast<int>(std::ceil(std::log2(radius / a_))));
}

LPPartition littlewood_paley_partition(double k_star) { return LPPartition(k_star); }

std::vector<CVector> lp_blocks(const LPPartition& lp, const Grid& grid, const CVector& physical) {
  const double radius = std::sqrt(static_cast<double>(grid.dim())) * grid.band_limit();
  const int blocks = lp.blocks_for(radius);
  std::vector<CVector> out;
  out.push_back(apply_multiplier(grid, physical, [&](const Vec3& xi) { return lp.low(xi); }));
  for (int j = 0; j <= blocks; ++j) {
    const double s = std::ldexp(1.0, -j);
    out.push_back(apply_multiplier(grid, physical, [&](const Vec3& xi) {
      return lp.annulus({s * xi[0], s * xi[1], s * xi[2]});
    }));
  }
  return out;
}

bool Cube::contains(const MultiIndex& m, int dim) const {
  for (int d = 0; d < dim; ++d)
    if (m[d] < lower[d] || m[d] >= lower[d] + side) return false;
  return true;
}

SampledField CZDecomposition::expanded(std::size_t k) const {
  SampledField w(good.grid(), good.paths(), good.nodes(), good.adapted());
  const BadPart& b = bad[k];
  const std::size_t cells = b.sites.size();
  for (int m = 0; m < good.paths(); ++m)
    for (int j = 0; j < good.nodes(); ++j)
      for (std::size_t c = 0; c < cells; ++c)
        w.at(m, j, b.sites[c]) = b.values[(static_cast<std::size_t>(m) * good.nodes() + j) * cells + c];
  return w;
}

namespace {

std::vector<std::size_t> cube_sites(const Grid& g, const Cube& q) {
  std::vector<std::size_t> out;
  const int dim = g.dim();
  MultiIndex m{0, 0, 0};
  const int count = static_cast<int>(std::pow(q.side, dim));
  for (int c = 0; c < count; ++c) {
    int rest = c;
    for (int d = dim - 1; d >= 0; --d) {
      m[d] = q.lower[d] + rest % q.side;
      rest /= q.side;
    }
    out.push_back(g.flat(m));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

CZDecomposition cz_decompose(const SampledField& u, const TimeGrid& tg, double r, double p) {
  if (!(r > 0.0)) throw ParameterError("level r must be positive");
  const Grid& g = u.grid();
  CZDecomposition cz{r, p, u, {}, site_lpf_density(u, tg, p), 0.0};
  for (double d : cz.density) cz.total_mass += d * g.cell_volume();
  auto average = [&](const Cube& q) {
    double mass = 0.0;
    const auto sites = cube_sites(g, q);
    for (std::size_t s : sites) mass += cz.density[s];
    return mass / static_cast<double>(sites.size());  // cell volumes cancel
  };
  const Cube root{{0, 0, 0}, g.n()};
  if (average(root) >= r)
    throw ParameterError("average density over the torus is >= r; raise the level r");

  std::vector<Cube> stopped;
  std::vector<Cube> stack{root};
  while (!stack.empty()) {
    const Cube q = stack.back();
    stack.pop_back();
    if (q.side == 1) continue;
    const int half = q.side / 2;
    const int children = 1 << g.dim();
    for (int c = children - 1; c >= 0; --c) {
      Cube child{q.lower, half};
      for (int d = 0; d < g.dim(); ++d)
        if (c & (1 << (g.dim() - 1 - d))) child.lower[d] += half;
      if (average(child) >= r)
        stopped.push_back(child);
      else
        stack.push_back(child);
    }
  }
  std::sort(stopped.begin(), stopped.end(), [](const Cube& a, const Cube& b) { return a.lower < b.lower; });

  const int nodes = u.nodes();
  for (const Cube& q : stopped) {
    BadPart b{q, cube_sites(g, q), {}};
    const std::size_t cells = b.sites.size();
    b.values.resize(static_cast<std::size_t>(u.paths()) * nodes * cells);
    for (int m = 0; m < u.paths(); ++m) {
      for (int j = 0; j < nodes; ++j) {
        cplx mean = 0.0;
        for (std::size_t s : b.sites) mean += u.at(m, j, s);
        mean /= static_cast<double>(cells);
        for (std::size_t c = 0; c < cells; ++c) {
          const std::size_t s = b.sites[c];
          b.values[(static_cast<std::size_t>(m) * nodes + j) * cells + c] = u.at(m, j, s) - mean;
          cz.good.at(m, j, s) = mean;
        }
      }
    }
    cz.bad.push_back(std::move(b));
  }
  return cz;
}

CZCheck check_cz_properties(const SampledField& u, const TimeGrid& tg, const CZDecomposition& cz) {
  const Grid& g = u.grid();
  const int dim = g.dim();
  CZCheck chk;
  const int nodes = u.nodes();

  std::vector<int> owner(g.size(), -1);
  double bad_volume = 0.0;
  for (std::size_t k = 0; k < cz.bad.size(); ++k) {
    bad_volume += std::pow(cz.bad[k].cube.side * g.spacing(), dim);
    for (std::size_t s : cz.bad[k].sites) {
      if (owner[s] >= 0) chk.disjoint = false;
      owner[s] = static_cast<int>(k);
      if (!cz.bad[k].cube.contains(g.lattice(s), dim)) chk.disjoint = false;
    }
  }
  chk.measure_bound = cz.total_mass > 0 ? cz.level * bad_volume / cz.total_mass : 0.0;

  for (int m = 0; m < u.paths(); ++m) {
    for (int j = 0; j < nodes; ++j) {
      double u1 = 0.0, v1 = 0.0, w1 = 0.0;
      for (std::size_t s = 0; s < g.size(); ++s) {
        cplx rebuilt = cz.good.at(m, j, s);
        if (owner[s] >= 0) {
          const BadPart& b = cz.bad[owner[s]];
          const auto c = static_cast<std::size_t>(std::lower_bound(b.sites.begin(), b.sites.end(), s) - b.sites.begin());
          const cplx w = b.values[(static_cast<std::size_t>(m) * nodes + j) * b.sites.size() + c];
          rebuilt += w;
          w1 += std::abs(w);
        } else {
          chk.outside_error = std::max(chk.outside_error, std::abs(cz.good.at(m, j, s) - u.at(m, j, s)));
        }
        chk.reconstruction_error = std::max(chk.reconstruction_error, std::abs(rebuilt - u.at(m, j, s)));
        u1 += std::abs(u.at(m, j, s));
        v1 += std::abs(cz.good.at(m, j, s));
      }
      if (u1 > 0) chk.l1_ratio = std::max(chk.l1_ratio, (v1 + w1) / u1);
      for (const BadPart& b : cz.bad) {
        cplx integral = 0.0;
        double mass = 0.0;
        const std::size_t cells = b.sites.size();
        for (std::size_t c = 0; c < cells; ++c) {
          const cplx w = b.values[(static_cast<std::size_t>(m) * nodes + j) * cells + c];
          integral += w;
          mass += std::abs(w);
        }
        if (mass > 0) chk.mean_zero_error = std::max(chk.mean_zero_error, std::abs(integral) / mass);
      }
    }
  }
  const auto good_density = site_lpf_density(cz.good, tg, cz.p);
  for (double d : good_density) chk.good_bound = std::max(chk.good_bound, d / (std::pow(2.0, dim) * cz.level));

  double peak = 0.0;
  for (const cplx& v : u.raw()) peak = std::max(peak, std::abs(v));
  chk.pass = chk.reconstruction_error <= 1e-12 * (1.0 + peak) && chk.disjoint &&
             chk.measure_bound <= 1.0 + 1e-12 && chk.mean_zero_error <= 1e-12 && chk.good_bound <= 1.0 + 1e-12 &&
             chk.l1_ratio <= 3.0 + 1e-12 && chk.outside_error == 0.0;
  return chk;
}

}  // namespace spdo
