#pragma once

// Truncated asymptotic expansions of the symbol calculus, asymptotic
// summation and elliptic parametrices.

#include <string>
#include <vector>

#include "spdo/symbol.hpp"

namespace spdo {

struct SeriesTerm {
  double order = 0.0;
  Symbol symbol;
};

/// Terms of strictly decreasing order.
struct AsymptoticSeries {
  std::vector<SeriesTerm> terms;
  double integrability = kInf;

  bool empty() const { return terms.empty(); }
  std::size_t size() const { return terms.size(); }
  const Symbol& operator[](std::size_t j) const { return terms[j].symbol; }
  /// Plain sum of the terms, without cutoffs.
  Symbol truncated_sum() const;
};

/// Sum over |alpha| = j of (1/alpha!) (-i)^j d_xi^alpha b d_x^alpha a, for j = 0..N.
AsymptoticSeries compose_symbols(const Symbol& b, const Symbol& a, int n_terms, int dim = 1);
/// Sum of (1/alpha!) (-i)^j d_xi^alpha d_x^alpha [a(x, -xi)].
AsymptoticSeries transpose_symbol(const Symbol& a, int n_terms, int dim = 1);
/// Sum of (1/alpha!) (-i)^j d_xi^alpha d_x^alpha conj(a).
AsymptoticSeries adjoint_symbol(const Symbol& a, int n_terms, int dim = 1);
/// Sum of (1/alpha!) (-i)^j d_xi^alpha d_y^alpha a(x, y, xi) at y = x.
AsymptoticSeries reduce_amplitude(const Amplitude& a, int n_terms, int dim = 1);

/// sum_j psi5(eps_j xi) a_j with eps_j = 2^{-j} eps0.
Symbol asymptotic_sum(const AsymptoticSeries& series, double eps0 = 1.0);

/// psi5: 0 for |xi| <= 1/2, 1 for |xi| >= 1.
double high_pass(const Vec3& xi);

enum class ParametrixSide { left, right };

/// Terms q_0..q_N of an elliptic parametrix; q_0 = (1 - psi*(xi/R))/a with R = max(R_K, 1).
AsymptoticSeries parametrix(const Symbol& a, int n_terms, const Grid& grid, const BrownianEnsemble& ensemble,
                            ParametrixSide side = ParametrixSide::left);

/// One line per term: "order l: expression".
std::string to_string(const AsymptoticSeries& s);

}  // namespace spdo
