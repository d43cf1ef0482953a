#pragma once

// Littlewood-Paley partition of unity and the stochastic Calderon-Zygmund
// decomposition on the lattice.

#include <vector>

#include "spdo/field.hpp"

namespace spdo {

class LPPartition {
 public:
  explicit LPPartition(double k_star);

  double k_star() const { return k_star_; }
  /// Plateau radius: psi* = 1 for |xi| <= a.
  double plateau() const { return a_; }
  double low(const Vec3& xi) const;
  double annulus(const Vec3& xi) const;
  /// Number of annulus blocks j = 0..J needed to cover |xi| <= radius.
  int blocks_for(double radius) const;

 private:
  double k_star_;
  double a_;
};

LPPartition littlewood_paley_partition(double k_star);

/// psi*-block followed by the phi*(2^{-j} .) blocks of u, j = 0..J (J covers the band).
std::vector<CVector> lp_blocks(const LPPartition& lp, const Grid& grid, const CVector& physical);

/// Lattice-aligned half-open cube [lower, lower + side)^n in cell units.
struct Cube {
  MultiIndex lower{0, 0, 0};
  int side = 0;

  bool contains(const MultiIndex& m, int dim) const;
  bool operator==(const Cube&) const = default;
};

struct BadPart {
  Cube cube;
  std::vector<std::size_t> sites;  // lattice sites of the cube, increasing
  std::vector<cplx> values;        // w_k on the cube, (path, node, site) with site fastest
};

struct CZDecomposition {
  double level = 0.0;
  double p = 2.0;
  SampledField good;
  std::vector<BadPart> bad;
  std::vector<double> density;  // |u(., ., x)|_{L^p_F} per site
  double total_mass = 0.0;      // |u|_{L^1(L^p_F)}

  /// w_k extended by zero to the whole lattice.
  SampledField expanded(std::size_t k) const;
};

CZDecomposition cz_decompose(const SampledField& u, const TimeGrid& tg, double r, double p);

struct CZCheck {
  double reconstruction_error = 0.0;  // max |u - v - sum w_k|
  bool disjoint = true;               // (i)
  double measure_bound = 0.0;         // (ii) r sum|I_k| / |u|_{L^1(L^p_F)}
  double mean_zero_error = 0.0;       // (iii) max |int w_k| / |w_k|_{L^1}
  double good_bound = 0.0;            // (iv) max |v|_{L^p_F} / (2^n r)
  double l1_ratio = 0.0;              // (v) max over (t, path) of (|v|_1 + sum |w_k|_1) / |u|_1
  double outside_error = 0.0;         // (vi) max |v - u| off the cubes
  bool pass = false;
};

CZCheck check_cz_properties(const SampledField& u, const TimeGrid& tg, const CZDecomposition& cz);

}  // namespace spdo
