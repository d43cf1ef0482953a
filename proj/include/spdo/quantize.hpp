#pragma once

// Operators from symbols and amplitudes on the periodic lattice.
//
// Discrete Kohn-Nirenberg quantization
//   (Au)(x) = L^{-n} sum_xi e^{i x.xi} a(t, w, x, xi) uhat(xi),
// amplitude operators
//   (Au)(x) = L^{-n} sum_xi sum_y (L/N)^n chi(eps xi) e^{i (x-y).xi} a(x, y, xi) u(y),
// and the kernels K(x, y) with (Au)(x) = sum_y (L/N)^n K(x, y) u(y).

#include <iosfwd>
#include <vector>

#include "spdo/field.hpp"
#include "spdo/symbol.hpp"

namespace spdo {

/// a, with homogeneous symbols patched near the origin by (1 - psi*).
cplx quantized_value(const Symbol& a, const Sample& s);

/// Au for one (t, path); u and the result are in physical representation.
SpectralField apply_symbol_op(const Symbol& a, const SpectralField& u, double t, const PathPrefix& path);

/// Au at every (path, time) of an adapted ensemble.
SampledField apply_symbol_op(const Symbol& a, const SampledField& u, const BrownianEnsemble& ensemble);

struct AmplitudeOptions {
  /// Cutoff scale; 0 picks the largest eps with chi(eps xi) = 1 on the whole band.
  double epsilon = 0.0;
  double tolerance = 1e-3;
  bool throw_on_warning = true;
};

struct AmplitudeResult {
  SpectralField value;    // at eps
  SpectralField refined;  // at eps / 2
  double relative_change = 0.0;
  bool converged = true;
};

AmplitudeResult apply_amplitude_op(const Amplitude& a, const SpectralField& u, double t, const PathPrefix& path,
                                   const AmplitudeOptions& opt = {});

/// A* u with A* given by the amplitude conj(a(y, x, xi)).
SpectralField apply_adjoint(const Amplitude& a, const SpectralField& u, double t, const PathPrefix& path);
/// (^t A) u with ^t A given by the amplitude a(y, x, -xi).
SpectralField apply_transpose(const Amplitude& a, const SpectralField& u, double t, const PathPrefix& path);

struct KernelMatrix {
  Grid grid;
  Eigen::MatrixXcd entries;
  /// False when only the off-diagonal part was assembled (diagonal entries are NaN).
  bool diagonal_valid = true;
  int ibp_power = 0;

  /// Ku = sum_y (L/N)^n K(., y) u(y).
  CVector apply(const CVector& u) const { return grid.cell_volume() * (entries * u); }
};

struct KernelOptions {
  bool off_diagonal_only = false;
};

/// Kernel of the operator at (t, path). Symbols of order >= -n that are not
/// xi-compact only admit the off-diagonal integration-by-parts form
///   K(x, y) = (-1)^k |x - y|^{-2k} L^{-n} sum_xi e^{i(x-y).xi} Lap_xi^k a.
KernelMatrix compute_kernel(const Amplitude& a, const Grid& grid, double t, const PathPrefix& path,
                            const KernelOptions& opt = {});

void write_kernel_csv(const KernelMatrix& k, std::ostream& out);

struct DecayReport {
  std::vector<double> separations;
  std::vector<double> magnitudes;
  double exponent = 0.0;
  double threshold = 0.0;
  bool pass = false;
  bool off_diagonal_only = false;
};

/// Fits log|K(x, y)| against log(1 + |x - y|) on dyadic separations along the first axis.
DecayReport kernel_decay_check(const Symbol& a, const Grid& grid, double t, const PathPrefix& path);

}  // namespace spdo
