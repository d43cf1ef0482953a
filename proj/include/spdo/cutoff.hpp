#pragma once

#include <cmath>

namespace spdo {

/// Smooth step: 1 for s <= a, 0 for s >= 1, C-infinity in between.
inline double smooth_cutoff(double s, double a = 0.5) {
  if (s <= a) return 1.0;
  if (s >= 1.0) return 0.0;
  const double u = (s - a) / (1.0 - a);
  auto f = [](double v) { return v > 0.0 ? std::exp(-1.0 / v) : 0.0; };
  const double left = f(1.0 - u);
  return left / (left + f(u));
}

}  // namespace spdo
