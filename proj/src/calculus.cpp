#include "spdo/calculus.hpp"

#include <cmath>
#include <sstream>

#include "spdo/cutoff.hpp"

namespace spdo {

namespace {

double factorial(const MultiIndex& a) {
  double f = 1.0;
  for (int v : a)
    for (int j = 2; j <= v; ++j) f *= j;
  return f;
}

cplx minus_i_power(int j) {
  static const cplx cycle[4] = {1.0, -kI, -1.0, kI};
  return cycle[j % 4];
}

std::vector<MultiIndex> exact_order(int dim, int j) {
  std::vector<MultiIndex> out;
  for (const auto& a : multi_indices(dim, j))
    if (total(a) == j) out.push_back(a);
  return out;
}

Symbol sum_all(const std::vector<Symbol>& parts, double order) {
  if (parts.empty()) return zero_symbol(order);
  Symbol acc = parts.front();
  for (std::size_t k = 1; k < parts.size(); ++k) acc = sum(acc, parts[k]);
  acc.set_order(order);
  return acc;
}

// Series of sum_{|alpha|=j} c_alpha d_xi^alpha f  d_{slot}^alpha g where slot is x or y.
AsymptoticSeries single_symbol_series(const Symbol& a, int n_terms, int dim, bool y_slot, double base_order,
                                      double p) {
  AsymptoticSeries out;
  out.integrability = p;
  for (int j = 0; j <= n_terms; ++j) {
    std::vector<Symbol> parts;
    for (const auto& alpha : exact_order(dim, j)) {
      Derivs d;
      d.xi = alpha;
      (y_slot ? d.y : d.x) = alpha;
      parts.push_back(derivative_symbol(a, d, minus_i_power(j) / factorial(alpha)));
    }
    Symbol term = sum_all(parts, base_order - j);
    if (y_slot) {
      term = on_diagonal(term);
      term.set_order(base_order - j);
    }
    out.terms.push_back({base_order - j, term});
  }
  return out;
}

}  // namespace

Symbol AsymptoticSeries::truncated_sum() const {
  if (terms.empty()) return zero_symbol();
  Symbol acc = terms.front().symbol;
  for (std::size_t k = 1; k < terms.size(); ++k) acc = sum(acc, terms[k].symbol);
  acc.set_order(terms.front().order);
  return acc;
}

AsymptoticSeries compose_symbols(const Symbol& b, const Symbol& a, int n_terms, int dim) {
  AsymptoticSeries out;
  out.integrability = qstar(b.integrability(), a.integrability());
  const double base = b.order() + a.order();
  for (int j = 0; j <= n_terms; ++j) {
    std::vector<Symbol> parts;
    for (const auto& alpha : exact_order(dim, j)) {
      Derivs db, da;
      db.xi = alpha;
      da.x = alpha;
      parts.push_back(product(derivative_symbol(b, db, minus_i_power(j) / factorial(alpha)), derivative_symbol(a, da)));
    }
    out.terms.push_back({base - j, sum_all(parts, base - j)});
  }
  return out;
}

AsymptoticSeries transpose_symbol(const Symbol& a, int n_terms, int dim) {
  return single_symbol_series(reflected_xi(a), n_terms, dim, false, a.order(), a.integrability());
}

AsymptoticSeries adjoint_symbol(const Symbol& a, int n_terms, int dim) {
  return single_symbol_series(conjugated(a), n_terms, dim, false, a.order(), a.integrability());
}

AsymptoticSeries reduce_amplitude(const Amplitude& a, int n_terms, int dim) {
  return single_symbol_series(a, n_terms, dim, true, a.order(), a.integrability());
}

double high_pass(const Vec3& xi) { return 1.0 - smooth_cutoff(std::sqrt(norm_sq(xi))); }

Symbol asymptotic_sum(const AsymptoticSeries& series, double eps0) {
  if (series.empty()) return zero_symbol();
  std::vector<std::pair<double, Symbol>> parts;
  double eps = eps0;
  for (const auto& term : series.terms) {
    parts.emplace_back(eps, term.symbol);
    eps *= 0.5;
  }
  auto eval = [parts](const Sample& s) {
    cplx acc = 0.0;
    for (const auto& [e, sym] : parts) {
      const double w = high_pass({e * s.xi[0], e * s.xi[1], e * s.xi[2]});
      if (w != 0.0) acc += w * sym(s);
    }
    return acc;
  };
  SymbolFlags f;
  f.x_independent = true;
  for (const auto& term : series.terms) {
    f.x_independent = f.x_independent && term.symbol.flags().x_independent;
    f.y_dependent = f.y_dependent || term.symbol.flags().y_dependent;
  }
  return Symbol(eval, series.terms.front().order, series.integrability, f, {}, "asymptotic sum");
}

namespace {

// (1 - psi*(xi/R)) q, with q only evaluated where the cutoff is nonzero.
Symbol cut_off(const Symbol& q, double radius) {
  const Symbol cut(
      [radius](const Sample& s) { return cplx(1.0 - smooth_cutoff(std::sqrt(norm_sq(s.xi)) / radius)); }, 0.0, kInf,
      SymbolFlags{true, false, false, std::nullopt, std::nullopt}, {}, "1-psi*");
  auto eval = [cut, q](const Sample& s) {
    const cplx c = cut(s);
    return c == cplx(0.0, 0.0) ? c : c * q(s);
  };
  auto deriv = [cut, q](const Sample& s, const Derivs& d) {
    cplx acc = 0.0;
    // Leibniz in xi only; the cutoff is x-independent.
    for (const auto& e : multi_indices(3, total(d.xi))) {
      if (e[0] > d.xi[0] || e[1] > d.xi[1] || e[2] > d.xi[2]) continue;
      Derivs de;
      de.xi = e;
      const cplx c = cut.derivative(s, de);
      if (c == cplx(0.0, 0.0)) continue;
      double coef = 1.0;
      for (int k = 0; k < 3; ++k) coef *= std::tgamma(d.xi[k] + 1.0) / (std::tgamma(e[k] + 1.0) * std::tgamma(d.xi[k] - e[k] + 1.0));
      Derivs rest = d;
      for (int k = 0; k < 3; ++k) rest.xi[k] = d.xi[k] - e[k];
      acc += coef * c * q.derivative(s, rest);
    }
    return acc;
  };
  SymbolFlags f = q.flags();
  f.xi_degree.reset();
  f.homogeneous_degree.reset();
  return Symbol(eval, q.order(), q.integrability(), f, deriv, "(1-psi*)·(" + q.name() + ")");
}

}  // namespace

AsymptoticSeries parametrix(const Symbol& a, int n_terms, const Grid& grid, const BrownianEnsemble& ensemble,
                            ParametrixSide side) {
  const EllipticityResult ell = ellipticity_check(a, grid, ensemble);
  if (!ell.elliptic) throw EllipticityError("parametrix needs an elliptic symbol: " + ell.reason);
  const double radius = std::max(ell.r_k, 1.0);
  const int dim = grid.dim();
  const Symbol inv = reciprocal(a);

  // Raw terms without the cutoff, built exactly; the cutoff is applied at the end.
  std::vector<Symbol> raw{inv};
  for (int j = 1; j <= n_terms; ++j) {
    std::vector<Symbol> parts;
    for (int k = 0; k < j; ++k) {
      for (const auto& alpha : exact_order(dim, j - k)) {
        Derivs dxi, dx;
        dxi.xi = alpha;
        dx.x = alpha;
        const cplx c = minus_i_power(j - k) / factorial(alpha);
        if (side == ParametrixSide::left)
          parts.push_back(product(derivative_symbol(raw[k], dxi, c), derivative_symbol(a, dx)));
        else
          parts.push_back(product(derivative_symbol(a, dxi, c), derivative_symbol(raw[k], dx)));
      }
    }
    Symbol qj = scaled(-1.0, product(inv, sum_all(parts, -j)));
    qj.set_order(-a.order() - j);
    raw.push_back(qj);
  }
  AsymptoticSeries out;
  out.integrability = a.integrability();
  for (int j = 0; j <= n_terms; ++j) {
    Symbol q = cut_off(raw[j], radius);
    q.set_order(-a.order() - j);
    out.terms.push_back({-a.order() - j, q});
  }
  return out;
}

std::string to_string(const AsymptoticSeries& s) {
  std::ostringstream out;
  for (const auto& t : s.terms) {
    out << "order " << t.order << ": ";
    if (t.symbol.expr())
      out << expr::to_string(*t.symbol.expr());
    else
      out << t.symbol.name();
    out << '\n';
  }
  return out.str();
}

}  // namespace spdo
