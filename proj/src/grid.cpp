#include "spdo/grid.hpp"

#include <cmath>
#include <unsupported/Eigen/FFT>

namespace spdo {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Unnormalized transform along every axis; sign < 0 is the forward direction.
void transform_axes(const Grid& grid, CVector& values, bool forward) {
  const int n = grid.n();
  const int dim = grid.dim();
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cplx> in(n), out(n);
  std::size_t stride = 1;
  for (int axis = dim - 1; axis >= 0; --axis) {
    const std::size_t block = stride * n;
    for (std::size_t outer = 0; outer < grid.size(); outer += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        const std::size_t base = outer + inner;
        for (int k = 0; k < n; ++k) in[k] = values[static_cast<Eigen::Index>(base + k * stride)];
        if (forward)
          fft.fwd(out, in);
        else
          fft.inv(out, in);
        for (int k = 0; k < n; ++k) values[static_cast<Eigen::Index>(base + k * stride)] = out[k];
      }
    }
    stride = block;
  }
}

}  // namespace

Grid::Grid(int dim, int points_per_axis, double period)
    : dim_(dim), n_(points_per_axis), period_(period) {
  if (dim < 1 || dim > 3) throw ParameterError("grid dimension must be 1, 2 or 3");
  if (!is_power_of_two(points_per_axis) || points_per_axis < 8)
    throw ParameterError("points per axis must be a power of two >= 8");
  if (!(period > 0.0)) throw ParameterError("grid period must be positive");
  size_ = 1;
  for (int d = 0; d < dim; ++d) size_ *= static_cast<std::size_t>(n_);
  cell_volume_ = std::pow(period_ / n_, dim_);
  volume_ = std::pow(period_, dim_);
}

MultiIndex Grid::lattice(std::size_t idx) const {
  MultiIndex m{0, 0, 0};
  for (int d = dim_ - 1; d >= 0; --d) {
    m[d] = static_cast<int>(idx % n_);
    idx /= n_;
  }
  return m;
}

std::size_t Grid::flat(const MultiIndex& m) const {
  std::size_t idx = 0;
  for (int d = 0; d < dim_; ++d) idx = idx * n_ + static_cast<std::size_t>(((m[d] % n_) + n_) % n_);
  return idx;
}

Vec3 Grid::point(std::size_t idx) const {
  const MultiIndex m = lattice(idx);
  Vec3 x{0.0, 0.0, 0.0};
  for (int d = 0; d < dim_; ++d) x[d] = m[d] * spacing();
  return x;
}

Vec3 Grid::centered_point(std::size_t idx) const {
  const MultiIndex m = lattice(idx);
  Vec3 x{0.0, 0.0, 0.0};
  for (int d = 0; d < dim_; ++d) x[d] = (m[d] < n_ / 2 ? m[d] : m[d] - n_) * spacing();
  return x;
}

MultiIndex Grid::wavenumber(std::size_t idx) const {
  MultiIndex m = lattice(idx);
  for (int d = 0; d < dim_; ++d)
    if (m[d] >= n_ / 2) m[d] -= n_;
  return m;
}

Vec3 Grid::frequency(std::size_t idx) const {
  const MultiIndex k = wavenumber(idx);
  Vec3 xi{0.0, 0.0, 0.0};
  for (int d = 0; d < dim_; ++d) xi[d] = 2.0 * kPi * k[d] / period_;
  return xi;
}

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0)) throw ParameterError("time horizon must be positive");
  if (steps < 2) throw ParameterError("time grid needs at least two steps");
}

void fft_forward_inplace(const Grid& grid, CVector& values) {
  transform_axes(grid, values, true);
  values *= grid.cell_volume();
}

void fft_inverse_inplace(const Grid& grid, CVector& values) {
  transform_axes(grid, values, false);
  values *= grid.frequency_weight();
}

SpectralField fft_forward(const SpectralField& f) {
  if (f.rep != Representation::physical)
    throw RepresentationError("forward transform expects a physical-space field");
  SpectralField out = f;
  fft_forward_inplace(out.grid, out.values);
  out.rep = Representation::frequency;
  return out;
}

SpectralField fft_inverse(const SpectralField& f) {
  if (f.rep != Representation::frequency)
    throw RepresentationError("inverse transform expects a frequency-space field");
  SpectralField out = f;
  fft_inverse_inplace(out.grid, out.values);
  out.rep = Representation::physical;
  return out;
}

double l2_norm(const SpectralField& f) {
  if (f.rep == Representation::physical)
    return std::sqrt(f.values.squaredNorm() * f.grid.cell_volume());
  return std::sqrt(f.values.squaredNorm() * f.grid.frequency_weight());
}

double sobolev_norm(const SpectralField& f, double delta) {
  if (delta == 0.0) return l2_norm(f);
  const SpectralField hat = f.rep == Representation::frequency ? f : fft_forward(f);
  double acc = 0.0;
  for (std::size_t s = 0; s < hat.grid.size(); ++s)
    acc += std::pow(1.0 + norm_sq(hat.grid.frequency(s)), delta) *
           std::norm(hat.values[static_cast<Eigen::Index>(s)]);
  return std::sqrt(acc * hat.grid.frequency_weight());
}

double sobolev_norm_sq(const Grid& grid, const CVector& physical, double delta) {
  if (delta == 0.0) return physical.squaredNorm() * grid.cell_volume();
  CVector v = physical;
  fft_forward_inplace(grid, v);
  double acc = 0.0;
  for (std::size_t s = 0; s < grid.size(); ++s)
    acc += std::pow(1.0 + norm_sq(grid.frequency(s)), delta) * std::norm(v[static_cast<Eigen::Index>(s)]);
  return acc * grid.frequency_weight();
}

}  // namespace spdo
