#pragma once

// Cauchy problem for order-m stochastic equations
//   (1/i) d D_t^{m-1} u = sum_k [a_k(D_x) + b_k(D_x)] D_t^k u dt + sum_k c_k(D_x) D_t^k u dw + g dt:
// companion reduction, characteristic roots and hypotheses, diagonalization,
// Holmgren transform, the stochastic system integrator, Carleman estimates
// and the uniqueness-decay experiment.

#include <functional>
#include <string>
#include <vector>

#include "spdo/field.hpp"
#include "spdo/symbol.hpp"

namespace spdo {

struct EquationSpec {
  std::string name;
  int m = 2;
  int dim = 1;
  std::vector<Symbol> principal;  // a_k, k = 0..m-1, homogeneous of degree m-k in xi
  std::vector<Symbol> drift;      // b_k, degree < m-k (empty = 0)
  std::vector<Symbol> noise;      // c_k, degree < m-k (empty = 0)
};

/// u_tt = u_xx type: a_0 = |xi|^2, roots +-|xi|.
EquationSpec wave_spec(int dim, double noise = 0.1);
/// a_0 = -|xi|^2, roots +-i|xi|.
EquationSpec schrodinger_spec(int dim, double noise = 0.1);
/// (lambda^2 + |xi|^2)^2: double roots +-i|xi|.
EquationSpec double_root_spec(int dim);

/// |xi| as a symbol (homogeneous of degree 1).
Symbol xi_norm_symbol(int dim);
/// (1 + |xi|^2)^{s/2}.
Symbol bessel_symbol(int dim, double s);

struct MatrixSymbol {
  int rows = 0;
  int cols = 0;
  std::vector<Symbol> entries;  // row-major

  MatrixSymbol() = default;
  MatrixSymbol(int r, int c);
  Symbol& operator()(int r, int c) { return entries[static_cast<std::size_t>(r) * cols + c]; }
  const Symbol& operator()(int r, int c) const { return entries[static_cast<std::size_t>(r) * cols + c]; }
  bool empty() const { return rows == 0; }
  bool is_zero(int r, int c) const;
  bool x_independent() const;
  /// Entry values with the homogeneous origin patch.
  Eigen::MatrixXcd at(const Sample& s) const;
};

/// Superdiagonal |xi|, bottom row a_k |xi|^{k+1-m}.
MatrixSymbol build_companion_symbol(const EquationSpec& spec);

/// Sample points (t, path, x, xi) with xi on the unit sphere.
std::vector<Sample> sphere_samples(const EquationSpec& spec, const Grid& grid, const BrownianEnsemble& ensemble,
                                   int directions = 16, int x_points = 4, int times = 3, int paths = 2);

struct RootField {
  std::vector<Sample> samples;
  std::vector<std::vector<cplx>> roots;  // continued: roots[i][k] is branch k at sample i
  double max_residual = 0.0;
  int refinements = 0;
};

/// Roots of p(lambda) = lambda^m - sum_k a_k lambda^k at one sample (companion eigenvalues).
std::vector<cplx> roots_at(const EquationSpec& spec, const Sample& s);
RootField characteristic_roots(const EquationSpec& spec, const std::vector<Sample>& samples);

struct HypothesisReport {
  bool h1 = false;
  bool h1_simple = false;  // H1'
  bool h2 = false;
  bool h2_vacuous = false;
  bool h3 = false;
  bool h4 = false;
  double min_abs_imag = 0.0;  // over nonreal roots
  std::vector<std::string> witnesses;
};

HypothesisReport check_hypotheses(const RootField& roots, double eps_tol);

struct Diagonalization {
  Eigen::MatrixXcd r;      // r*
  Eigen::MatrixXcd j;      // j* = r* sigma r*^{-1}
  Eigen::MatrixXcd r_inv;  // r*^{-1}
  double residual = 0.0;
  bool jordan = false;
};

/// r*, j* at one sample; xi is first projected to the unit sphere (r* has degree 0).
Diagonalization diagonalize_at(const MatrixSymbol& sigma, const Sample& s, bool jordan_allowed);
std::vector<Diagonalization> diagonalize_symbol(const MatrixSymbol& sigma, const std::vector<Sample>& samples,
                                                bool jordan_allowed);

/// v(t, x) = u(t - delta |x|^2, x) by cubic interpolation in time; zero before t = 0.
SampledField holmgren_transform(const SampledField& u, const TimeGrid& tg, double delta);

struct SpdeSystem {
  MatrixSymbol drift;  // A, order <= 1
  MatrixSymbol noise;  // optional state noise operator B
  /// Fills f and F (physical, pre-zeroed) at (path, j).
  std::function<void(int, int, double, const PathPrefix&, std::vector<CVector>&, std::vector<CVector>&)> sources;
};

/// Called for every (path, node) with the physical state; paths run concurrently.
using SystemObserver = std::function<void(int, int, const std::vector<CVector>&)>;

/// (1/i) dY = AY dt + f dt + (BY + F) dw, Crank-Nicolson in the drift, Ito in the noise.
void integrate_spde_system(const SpdeSystem& sys, const Grid& grid, const BrownianEnsemble& ensemble,
                           const std::vector<CVector>& initial, const SystemObserver& observe);
std::vector<SampledField> integrate_spde_system(const SpdeSystem& sys, const Grid& grid,
                                                const BrownianEnsemble& ensemble,
                                                const std::vector<CVector>& initial);

/// z = sin(pi t / T) (u0 + W(t) u1) with random band-limited u0, u1.
SampledField pinned_semimartingale(const Grid& grid, const BrownianEnsemble& ensemble, std::uint64_t seed,
                                   int mode_cap = 0);

struct CarlemanBlock {
  // Raw ensemble integrals, all scaled by e^{-mu T^2}.
  double mass = 0.0;      // E int theta^2 |z|^2
  double shifted = 0.0;   // E int theta^2 |mu (t-T) z - B1 z|^2
  double pairing = 0.0;   // Re E sum theta^2 (E, i mu (t-T) z - i B1 z)
  double skew = 0.0;      // Im E sum theta^2 (E, (B1 - B1*) z)
  double variation = 0.0; // E sum (t-T) theta^2 |dz|^2
  double energy = 0.0;    // Re E sum theta^2 (dz, B1 dz)
  double lhs = 0.0;
  double rhs = 0.0;
};

struct CarlemanReport {
  double mu = 0.0;
  double horizon = 0.0;
  double log_scale = 0.0;  // terms are multiplied by e^{-log_scale}
  std::vector<CarlemanBlock> blocks;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool pass = false;
  double jordan_constant = 0.0;
};

CarlemanReport carleman_report(const SampledField& z, const Symbol& a1, const Symbol& b1, double mu,
                               const BrownianEnsemble& ensemble);
CarlemanReport carleman_report_jordan(const SampledField& z1, const SampledField& z2, const Symbol& a1,
                                      const Symbol& b1, double mu, const BrownianEnsemble& ensemble,
                                      double jordan_constant = 4.0);

struct CalibrationResult {
  bool found = false;
  double horizon = 0.0;
  double mu = 0.0;
  std::vector<double> horizons;
  std::vector<double> mus;
  std::vector<double> pass_rates;  // horizon-major
};

/// First (T, mu) at which every trial passes and every larger mu keeps passing.
CalibrationResult calibrate_carleman(const Grid& grid, const Symbol& a1, const Symbol& b1,
                                     const std::vector<double>& horizons, const std::vector<double>& mus,
                                     int trials, int paths, int steps, std::uint64_t seed);

struct UniquenessOptions {
  std::vector<double> mu_list{50.0, 100.0, 200.0, 400.0};
  double radius = 0.0;  // B_r mask radius (0 = whole torus)
  double forcing = 1.0;
  double tolerance = 0.25;
};

struct UniquenessReport {
  double horizon = 0.0;
  std::vector<double> mu;
  std::vector<double> log_lhs;    // log of the weighted energy side
  std::vector<double> log_rhs;    // log of the weighted source side
  std::vector<double> log_bound;  // log of C (T + 1/mu) RHS e^{-mu T^2/4}
  double constant = 0.0;          // smallest C making the inequality hold at every mu
  double slope = 0.0;
  double target = 0.0;
  double relative_error = 0.0;
  double early_energy = 0.0;  // E int_0^{T/2} |u|^2
  bool decreasing = false;
  bool pass = false;
  std::string route;  // "simple roots" or "jordan"
};

UniquenessReport uniqueness_experiment(const EquationSpec& spec, const Grid& grid, const BrownianEnsemble& ensemble,
                                       const UniquenessOptions& opt = {});

}  // namespace spdo
