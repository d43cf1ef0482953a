#pragma once

// Symbols a(t, omega, x, xi) and amplitudes a(t, omega, x, y, xi) of order
// (l, p): evaluators with optional closed-form derivatives, pointwise
// algebra carrying derivatives through the Leibniz rule, and numerical
// checks of the symbol estimates and of ellipticity.
//
// An evaluator sees the Brownian path only through a PathPrefix holding
// W(t_0..t_j), so every symbol built here is adapted by construction.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spdo/expr.hpp"
#include "spdo/grid.hpp"
#include "spdo/stochastic.hpp"

namespace spdo {

/// Point at which a symbol or amplitude is evaluated.
struct Sample {
  double t = 0.0;
  PathPrefix path;
  Vec3 x{0.0, 0.0, 0.0};
  Vec3 y{0.0, 0.0, 0.0};
  Vec3 xi{0.0, 0.0, 0.0};
};

/// Orders of a mixed partial derivative in xi, x and y.
struct Derivs {
  MultiIndex xi{0, 0, 0};
  MultiIndex x{0, 0, 0};
  MultiIndex y{0, 0, 0};
  int order() const { return total(xi) + total(x) + total(y); }
  bool operator==(const Derivs&) const = default;
};

struct SymbolFlags {
  bool x_independent = false;
  bool y_dependent = false;
  /// The evaluator vanishes outside a bounded xi set (or is restricted to the resolved band).
  bool xi_compact = false;
  std::optional<int> xi_degree;
  std::optional<double> homogeneous_degree;
};

class Symbol {
 public:
  using Eval = std::function<cplx(const Sample&)>;
  using DerivEval = std::function<cplx(const Sample&, const Derivs&)>;

  Symbol() = default;
  Symbol(Eval eval, double order, double integrability = kInf, SymbolFlags flags = {}, DerivEval deriv = {},
         std::string name = {});

  /// Symbol given by an expression; derivatives are exact (symbolic).
  static Symbol from_expr(const ExprPtr& e, double order, double integrability = kInf, std::string name = {});
  static Symbol from_expr(const std::string& text, double order, double integrability = kInf);
  static Symbol constant(cplx c);

  double order() const { return order_; }
  double integrability() const { return p_; }
  const SymbolFlags& flags() const { return flags_; }
  SymbolFlags& flags() { return flags_; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  void set_order(double l) { order_ = l; }
  const ExprPtr& expr() const { return expr_; }
  bool has_closed_form() const { return static_cast<bool>(deriv_); }
  bool valid() const { return static_cast<bool>(eval_); }

  cplx operator()(const Sample& s) const { return eval_(s); }
  /// Mixed partial derivative: closed form when available, otherwise
  /// nested fourth-order central differences (total order <= 4).
  cplx derivative(const Sample& s, const Derivs& d) const;

  /// Length scale of the x step used by finite differences (torus period).
  void set_length_scale(double L) { length_scale_ = L; }
  double length_scale() const { return length_scale_; }

 private:
  cplx finite_difference(const Sample& s, const Derivs& d, int total_order) const;

  Eval eval_;
  DerivEval deriv_;
  double order_ = 0.0;
  double p_ = kInf;
  SymbolFlags flags_;
  ExprPtr expr_;
  std::string name_;
  double length_scale_ = 2.0 * kPi;
};

/// An amplitude is a symbol that also reads Sample::y.
using Amplitude = Symbol;
Amplitude make_amplitude(const ExprPtr& e, double order, double integrability = kInf);

/// Exponent of the product class: S_p * S_q subset S_{q*}.
double qstar(double p, double q);

Symbol sum(const Symbol& a, const Symbol& b);
Symbol product(const Symbol& a, const Symbol& b);
Symbol scaled(cplx c, const Symbol& a);
/// 1/a; derivatives by differentiating a * (1/a) = 1.
Symbol reciprocal(const Symbol& a);
/// The symbol coef * d^D a, of order l - |D_xi|.
Symbol derivative_symbol(const Symbol& a, const Derivs& d, cplx coef = 1.0);
Symbol conjugated(const Symbol& a);
/// a(t, w, x, y, -xi).
Symbol reflected_xi(const Symbol& a);
/// Amplitude (x, y, xi) -> a(y, x, xi); a symbol becomes the amplitude a(y, xi).
Symbol swapped_xy(const Symbol& a);
/// Amplitude restricted to the diagonal y = x.
Symbol on_diagonal(const Symbol& a);
Symbol zero_symbol(double order = 0.0);

/// One row of the estimate table.
struct EstimateEntry {
  MultiIndex alpha{0, 0, 0};
  MultiIndex beta{0, 0, 0};
  std::vector<double> majorant;  // per (path, time), path-major
  double lpf_norm = 0.0;
  double slope = 0.0;
  bool violation = false;
};

struct EstimateReport {
  double order = 0.0;
  double integrability = kInf;
  int alpha_max = 0;
  int beta_max = 0;
  int paths = 0;
  int nodes = 0;
  std::vector<EstimateEntry> entries;
  bool violation = false;
  std::string note;

  const EstimateEntry& entry(const MultiIndex& alpha, const MultiIndex& beta) const;
};

struct EstimateOptions {
  double slope_tolerance = 0.1;
  /// Quantile of the ratio over (x, xi) used as the majorant (1 = supremum).
  double quantile = 1.0;
  int max_x_per_axis = 8;
  int max_xi_per_axis = 64;
  int max_nodes = 0;  // 0 = all time nodes
};

EstimateReport check_symbol_estimate(const Symbol& a, int alpha_max, int beta_max, const Grid& grid,
                                     const BrownianEnsemble& ensemble, const EstimateOptions& opt = {});

struct EllipticityResult {
  bool elliptic = false;
  double c_k = 0.0;
  double r_k = 0.0;
  std::string reason;
};

EllipticityResult ellipticity_check(const Symbol& a, const Grid& grid, const BrownianEnsemble& ensemble);

/// All multi-indices of total order <= max in the first dim axes.
std::vector<MultiIndex> multi_indices(int dim, int max_order);

}  // namespace spdo
