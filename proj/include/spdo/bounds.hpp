#pragma once

// Empirical operator-norm estimates over random adapted fields: L^2 and
// Sobolev boundedness, mixed L^p(L^q_F) bounds, weak type (1,1) and the
// Garding inequality.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spdo/field.hpp"
#include "spdo/symbol.hpp"

namespace spdo {

/// Band-limited field sum_k c_k g_k(W(t)) e^{i k.x}, c_k complex Gaussian, |k_d| <= mode_cap (0 = N/4),
/// g_k(w) = 1 + sin(theta_k w + phi_k) / 2 bounded and adapted.
SampledField random_adapted_field(const Grid& grid, const BrownianEnsemble& ensemble, std::uint64_t seed,
                                  int mode_cap = 0);

/// u(t) -> (Au)(t) for one (t, path); u and the result are physical.
using FieldOperator = std::function<CVector(const Grid&, const CVector&, double, const PathPrefix&)>;
FieldOperator symbol_operator(const Symbol& a);

struct BoundOptions {
  double q = 2.0;
  int trials = 4;
  std::uint64_t seed = 1;
  double factor = 2.0;
};

struct BoundReport {
  std::string op;
  std::string source;
  std::string target;
  double q = 2.0;
  std::vector<int> sizes;
  std::vector<double> norms;
  double variation = 0.0;
  double factor = 2.0;
  bool pass = false;
  std::string verdict;
  std::string note;
};

/// max over trials of |Au|_{L^q_F(H^{delta_target})} / |u|_{L^q_F(H^{delta_source})} per grid.
BoundReport operator_norm_check(const std::string& id, const FieldOperator& op, double delta_source,
                                double delta_target, const std::vector<Grid>& grids,
                                const BrownianEnsemble& ensemble, const BoundOptions& opt = {});

BoundReport l2_boundedness_check(const Symbol& a, const std::vector<Grid>& grids, const BrownianEnsemble& ensemble,
                                 const BoundOptions& opt = {});
BoundReport sobolev_boundedness_check(const Symbol& a, double delta, const std::vector<Grid>& grids,
                                      const BrownianEnsemble& ensemble, const BoundOptions& opt = {});

/// Mixed norm (sum_x (L/N)^n |u(., ., x)|^p_{L^s_F})^{1/p}.
double mixed_norm(const SampledField& u, const TimeGrid& tg, double p, double s);

/// 1 < p < 2: L^p(L^{p'}_F) -> L^p(L^p_F); p > 2: L^p(L^p_F) -> L^p(L^{p'}_F).
BoundReport mixed_lp_check(const Symbol& a, double p, const std::vector<Grid>& grids,
                           const BrownianEnsemble& ensemble, const BoundOptions& opt = {});

struct WeakTypeOptions {
  std::vector<double> levels{0.25, 0.5, 1.0, 2.0};
  double p = 2.0;
  int trials = 2;
  std::uint64_t seed = 1;
  double factor = 3.0;
  /// Optional field factory; random adapted fields when empty.
  std::function<SampledField(const Grid&, const BrownianEnsemble&)> field;
};

struct WeakTypeEntry {
  int size = 0;
  double level = 0.0;
  double constant = 0.0;  // max over (t, path, trial) of LHS / RHS
  double lhs = 0.0;
  double rhs = 0.0;
  bool skipped = false;  // level below the torus average: no decomposition
};

struct WeakTypeReport {
  std::vector<WeakTypeEntry> entries;
  double variation = 0.0;
  bool pass = false;
};

WeakTypeReport weak_type_check(const Symbol& a, const std::vector<Grid>& grids, const BrownianEnsemble& ensemble,
                               const WeakTypeOptions& opt = {});

struct GardingOptions {
  double delta_star = 1.0;
  double epsilon = 0.1;
  double r = 0.0;
  double radius = 1.0;  // hypothesis checked for |xi| >= radius
  int trials = 4;
  std::uint64_t seed = 1;
  bool enforce_hypothesis = true;
};

struct GardingReport {
  std::vector<int> sizes;
  std::vector<double> constants;  // minimal admissible C per grid
  std::vector<double> lhs;        // E int Re(Au, u) dt of the worst trial
  std::vector<double> energy;     // E int |u|^2_{H^{l/2}} dt of the worst trial
  std::vector<double> lower;      // E int |u|^2_{H^r} dt of the worst trial
  double hypothesis_margin = 0.0; // min Re a / |xi|^l - delta*
  bool hypothesis_holds = false;
  bool pass = false;
};

GardingReport garding_check(const Symbol& a, const std::vector<Grid>& grids, const BrownianEnsemble& ensemble,
                            const GardingOptions& opt = {});

}  // namespace spdo
