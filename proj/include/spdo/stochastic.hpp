#pragma once

// Brownian ensembles, path prefixes (the filtration seen by adapted
// evaluators) and Monte Carlo L^p_F(0,T) norms.

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "spdo/grid.hpp"

namespace spdo {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Values W(t_0), ..., W(t_j) of one path: everything an adapted quantity at t_j may read.
struct PathPrefix {
  std::span<const double> w;
  double dt = 0.0;

  /// Index j of the current time.
  int now() const { return static_cast<int>(w.size()) - 1; }
  /// W(t_j), or 0 for an empty (deterministic) prefix.
  double current() const { return w.empty() ? 0.0 : w.back(); }
};

/// M sampled Brownian paths on a time grid.
class BrownianEnsemble {
 public:
  BrownianEnsemble(TimeGrid tg, std::uint64_t seed, std::vector<double> values, int paths);

  int paths() const { return paths_; }
  const TimeGrid& time_grid() const { return tg_; }
  std::uint64_t seed() const { return seed_; }
  double value(int m, int j) const { return w_[static_cast<std::size_t>(m) * (tg_.steps() + 1) + j]; }
  double increment(int m, int j) const { return value(m, j + 1) - value(m, j); }
  /// Prefix W_m(t_0..t_j).
  PathPrefix prefix(int m, int j) const;
  std::span<const double> path(int m) const;

 private:
  TimeGrid tg_;
  std::uint64_t seed_;
  std::vector<double> w_;
  int paths_;
};

BrownianEnsemble sample_brownian(int paths, const TimeGrid& tg, std::uint64_t seed);

/// A scalar adapted process sampled as paths x (K+1) values.
struct ScalarProcess {
  int paths = 0;
  int nodes = 0;
  std::vector<double> values;  // |X| per (m, j), row-major in m
  double at(int m, int j) const { return values[static_cast<std::size_t>(m) * nodes + j]; }
};

struct LpfNorm {
  double raw = 0.0;   // E int_0^T |X|^p dt (ensemble max for p = infinity)
  double norm = 0.0;  // raw^{1/p}
};

/// Monte Carlo L^p_F(0,T) norm with trapezoidal time quadrature.
LpfNorm lpf_norm(const ScalarProcess& x, const TimeGrid& tg, double p);

/// Deterministic index-parallel loop; results must be written per index.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);
/// Cap worker threads used by parallel_for (0 = hardware concurrency).
void set_thread_limit(unsigned limit);

}  // namespace spdo
