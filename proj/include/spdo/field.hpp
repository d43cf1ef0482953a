#pragma once

#include <vector>

#include "spdo/grid.hpp"
#include "spdo/stochastic.hpp"

namespace spdo {

/// Random field u(t, omega, x) stored as path x time x lattice.
class SampledField {
 public:
  SampledField(const Grid& grid, int paths, int nodes, bool adapted = true)
      : grid_(grid), paths_(paths), nodes_(nodes), adapted_(adapted),
        data_(static_cast<std::size_t>(paths) * nodes * grid.size(), cplx(0.0, 0.0)) {}

  const Grid& grid() const { return grid_; }
  int paths() const { return paths_; }
  int nodes() const { return nodes_; }
  bool adapted() const { return adapted_; }
  void set_adapted(bool a) { adapted_ = a; }

  Eigen::Map<CVector> slice(int m, int j) {
    return Eigen::Map<CVector>(data_.data() + offset(m, j), static_cast<Eigen::Index>(grid_.size()));
  }
  Eigen::Map<const CVector> slice(int m, int j) const {
    return Eigen::Map<const CVector>(data_.data() + offset(m, j), static_cast<Eigen::Index>(grid_.size()));
  }
  cplx& at(int m, int j, std::size_t s) { return data_[offset(m, j) + s]; }
  cplx at(int m, int j, std::size_t s) const { return data_[offset(m, j) + s]; }

  SpectralField spectral(int m, int j) const {
    return SpectralField(grid_, CVector(slice(m, j)), Representation::physical);
  }

  const std::vector<cplx>& raw() const { return data_; }
  std::vector<cplx>& raw() { return data_; }

 private:
  std::size_t offset(int m, int j) const {
    return (static_cast<std::size_t>(m) * nodes_ + j) * grid_.size();
  }

  Grid grid_;
  int paths_;
  int nodes_;
  bool adapted_;
  std::vector<cplx> data_;
};

/// |u(., ., x)|_{L^p_F(0,T)} at every lattice site.
std::vector<double> site_lpf_density(const SampledField& u, const TimeGrid& tg, double p);

/// Process t -> |u(t)|_{H^delta} per path (delta = 0 gives L^2).
ScalarProcess sobolev_process(const SampledField& u, double delta);

}  // namespace spdo
