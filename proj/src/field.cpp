#include "spdo/field.hpp"

#include <algorithm>
#include <cmath>

namespace spdo {

std::vector<double> site_lpf_density(const SampledField& u, const TimeGrid& tg, double p) {
  const Grid& g = u.grid();
  std::vector<double> out(g.size(), 0.0);
  parallel_for(g.size(), [&](std::size_t s) {
    double acc = 0.0;
    for (int m = 0; m < u.paths(); ++m) {
      if (std::isinf(p)) {
        for (int j = 0; j < u.nodes(); ++j) acc = std::max(acc, std::abs(u.at(m, j, s)));
        continue;
      }
      double integral = 0.0;
      for (int j = 0; j < u.nodes(); ++j) integral += tg.weight(j) * std::pow(std::abs(u.at(m, j, s)), p);
      acc += integral;
    }
    out[s] = std::isinf(p) ? acc : std::pow(acc / u.paths(), 1.0 / p);
  });
  return out;
}

ScalarProcess sobolev_process(const SampledField& u, double delta) {
  ScalarProcess x;
  x.paths = u.paths();
  x.nodes = u.nodes();
  x.values.assign(static_cast<std::size_t>(u.paths()) * u.nodes(), 0.0);
  parallel_for(x.values.size(), [&](std::size_t idx) {
    const int m = static_cast<int>(idx / u.nodes());
    const int j = static_cast<int>(idx % u.nodes());
    x.values[idx] = std::sqrt(sobolev_norm_sq(u.grid(), CVector(u.slice(m, j)), delta));
  });
  return x;
}

}  // namespace spdo
