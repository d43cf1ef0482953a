#pragma once

// Periodic spatial lattice, its dual frequency lattice, and the discrete
// Fourier transforms between them.
//
// Normalization: the forward transform carries the cell weight (L/N)^n,
//   uhat(xi) = (L/N)^n sum_x exp(-i x.xi) u(x),
// so that uhat approximates the continuum integral over the torus. The
// inverse carries 1/L per axis,
//   u(x) = L^{-n} sum_xi exp(i x.xi) uhat(xi),
// the discrete analogue of (2 pi)^{-n} integral dxi. With these choices
//   sum_x |u|^2 (L/N)^n = L^{-n} sum_xi |uhat|^2.

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "spdo/errors.hpp"

namespace spdo {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;
using MultiIndex = std::array<int, 3>;
using CVector = Eigen::VectorXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

inline int total(const MultiIndex& a) { return a[0] + a[1] + a[2]; }

/// Periodic lattice on [0, L)^n with N points per axis (N a power of two, N >= 8).
class Grid {
 public:
  Grid(int dim, int points_per_axis, double period = 2.0 * kPi);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double period() const { return period_; }
  std::size_t size() const { return size_; }
  double spacing() const { return period_ / n_; }
  /// Volume of one lattice cell, (L/N)^n.
  double cell_volume() const { return cell_volume_; }
  /// Volume of the torus, L^n.
  double volume() const { return volume_; }
  /// Frequency-space weight, L^{-n}.
  double frequency_weight() const { return 1.0 / volume_; }

  /// Lattice coordinates of a flat index (last axis fastest).
  MultiIndex lattice(std::size_t idx) const;
  std::size_t flat(const MultiIndex& m) const;

  /// Position x in [0, L)^n.
  Vec3 point(std::size_t idx) const;
  /// Position in the centered window [-L/2, L/2)^n.
  Vec3 centered_point(std::size_t idx) const;
  /// Integer wave numbers k in [-N/2, N/2) stored in FFT order.
  MultiIndex wavenumber(std::size_t idx) const;
  /// Physical frequency xi = 2 pi k / L.
  Vec3 frequency(std::size_t idx) const;
  /// Largest resolved |xi| along one axis, pi N / L.
  double band_limit() const { return kPi * n_ / period_; }

  bool operator==(const Grid& o) const {
    return dim_ == o.dim_ && n_ == o.n_ && period_ == o.period_;
  }

 private:
  int dim_;
  int n_;
  double period_;
  std::size_t size_;
  double cell_volume_;
  double volume_;
};

/// Uniform partition of [0, T] into K steps.
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);
  double horizon() const { return horizon_; }
  int steps() const { return steps_; }
  double dt() const { return horizon_ / steps_; }
  double node(int j) const { return j == steps_ ? horizon_ : j * dt(); }
  /// Trapezoidal quadrature weight of node j.
  double weight(int j) const { return (j == 0 || j == steps_) ? 0.5 * dt() : dt(); }

 private:
  double horizon_;
  int steps_;
};

enum class Representation { physical, frequency };

/// Values over the spatial lattice, tagged with their representation.
struct SpectralField {
  Grid grid;
  CVector values;
  Representation rep = Representation::physical;

  SpectralField(const Grid& g, Representation r = Representation::physical)
      : grid(g), values(CVector::Zero(static_cast<Eigen::Index>(g.size()))), rep(r) {}
  SpectralField(const Grid& g, CVector v, Representation r)
      : grid(g), values(std::move(v)), rep(r) {}
};

/// In-place transforms on a raw lattice vector (no representation checks).
void fft_forward_inplace(const Grid& grid, CVector& values);
void fft_inverse_inplace(const Grid& grid, CVector& values);

SpectralField fft_forward(const SpectralField& f);
SpectralField fft_inverse(const SpectralField& f);

/// Discrete L^2 norm of a field in either representation.
double l2_norm(const SpectralField& f);
/// (sum_xi (1+|xi|^2)^delta |uhat|^2 L^{-n})^{1/2}.
double sobolev_norm(const SpectralField& f, double delta);
/// Squared Sobolev norm of a raw physical vector.
double sobolev_norm_sq(const Grid& grid, const CVector& physical, double delta);

/// Fourier multiplier applied to a physical vector: inverse(m(xi) * forward(u)).
template <class Multiplier>
CVector apply_multiplier(const Grid& grid, const CVector& physical, Multiplier&& m) {
  CVector v = physical;
  fft_forward_inplace(grid, v);
  for (std::size_t s = 0; s < grid.size(); ++s) v[static_cast<Eigen::Index>(s)] *= m(grid.frequency(s));
  fft_inverse_inplace(grid, v);
  return v;
}

inline double norm_sq(const Vec3& v) { return v[0] * v[0] + v[1] * v[1] + v[2] * v[2]; }

}  // namespace spdo
