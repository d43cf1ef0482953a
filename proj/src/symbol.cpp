#include "spdo/symbol.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

namespace spdo {

namespace {

using Flat = std::array<int, 9>;

Flat flatten(const Derivs& d) {
  return {d.xi[0], d.xi[1], d.xi[2], d.x[0], d.x[1], d.x[2], d.y[0], d.y[1], d.y[2]};
}

Derivs unflatten(const Flat& f) {
  Derivs d;
  for (int k = 0; k < 3; ++k) {
    d.xi[k] = f[k];
    d.x[k] = f[3 + k];
    d.y[k] = f[6 + k];
  }
  return d;
}

std::uint64_t pack(const Derivs& d) {
  std::uint64_t key = 0;
  for (int v : flatten(d)) key = key * 32 + static_cast<std::uint64_t>(v);
  return key;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
  return r;
}

// Visit every E <= D componentwise together with prod binom(D_i, E_i).
template <class F>
void for_each_sub_index(const Flat& d, F&& f) {
  Flat e{};
  for (;;) {
    double coef = 1.0;
    for (int i = 0; i < 9; ++i) coef *= binomial(d[i], e[i]);
    f(e, coef);
    int i = 0;
    while (i < 9) {
      if (e[i] < d[i]) {
        ++e[i];
        break;
      }
      e[i] = 0;
      ++i;
    }
    if (i == 9) return;
  }
}

Flat minus(const Flat& a, const Flat& b) {
  Flat r;
  for (int i = 0; i < 9; ++i) r[i] = a[i] - b[i];
  return r;
}

ExprEnv env_of(const Sample& s) {
  ExprEnv env;
  env.t = s.t;
  env.w = s.path.current();
  env.x = s.x;
  env.y = s.y;
  env.xi = s.xi;
  return env;
}

struct DerivCache {
  std::mutex mutex;
  std::map<std::uint64_t, ExprPtr> table;
};

ExprPtr swap_xy_expr(const ExprPtr& e) {
  if (e->op == Op::constant) return e;
  if (e->op == Op::variable) {
    if (e->var >= var_x && e->var < var_x + 3) return expr::variable(e->var - var_x + var_y);
    if (e->var >= var_y && e->var < var_y + 3) return expr::variable(e->var - var_y + var_x);
    return e;
  }
  std::vector<ExprPtr> args;
  for (const auto& a : e->args) args.push_back(swap_xy_expr(a));
  switch (e->op) {
    case Op::add:
      return expr::add(std::move(args));
    case Op::mul:
      return expr::mul(std::move(args));
    case Op::pow:
      return expr::pow(args.front(), e->exponent);
    default:
      return expr::func(e->op, args.front());
  }
}

double xi_norm(const Vec3& xi) { return std::sqrt(norm_sq(xi)); }

}  // namespace

Symbol::Symbol(Eval eval, double order, double integrability, SymbolFlags flags, DerivEval deriv, std::string name)
    : eval_(std::move(eval)), deriv_(std::move(deriv)), order_(order), p_(integrability), flags_(flags),
      name_(std::move(name)) {}

Symbol Symbol::from_expr(const ExprPtr& e, double order, double integrability, std::string name) {
  auto cache = std::make_shared<DerivCache>();
  Eval eval = [e](const Sample& s) { return expr::evaluate(*e, env_of(s)); };
  DerivEval deriv = [e, cache](const Sample& s, const Derivs& d) {
    const std::uint64_t key = pack(d);
    ExprPtr de;
    {
      std::lock_guard lock(cache->mutex);
      auto it = cache->table.find(key);
      if (it == cache->table.end()) it = cache->table.emplace(key, expr::differentiate(e, d.xi, d.x, d.y)).first;
      de = it->second;
    }
    return expr::evaluate(*de, env_of(s));
  };
  SymbolFlags flags;
  flags.x_independent = !expr::depends_on_any(*e, var_x, 3);
  flags.y_dependent = expr::depends_on_any(*e, var_y, 3);
  flags.xi_degree = expr::xi_degree(*e);
  Symbol s(std::move(eval), order, integrability, flags, std::move(deriv),
           name.empty() ? expr::to_string(*e) : std::move(name));
  s.expr_ = e;
  return s;
}

Symbol Symbol::from_expr(const std::string& text, double order, double integrability) {
  return from_expr(expr::parse(text), order, integrability);
}

Symbol Symbol::constant(cplx c) { return from_expr(expr::constant(c), 0.0); }

Amplitude make_amplitude(const ExprPtr& e, double order, double integrability) {
  return Symbol::from_expr(e, order, integrability);
}

cplx Symbol::derivative(const Sample& s, const Derivs& d) const {
  const int k = d.order();
  if (k == 0) return eval_(s);
  if (flags_.x_independent && total(d.x) > 0) return 0.0;
  if (!flags_.y_dependent && total(d.y) > 0) return 0.0;
  if (flags_.xi_degree && total(d.xi) > *flags_.xi_degree) return 0.0;
  if (deriv_) return deriv_(s, d);
  if (k > 4)
    throw DerivativeAccuracyError("finite-difference derivative of total order " + std::to_string(k) +
                                  " exceeds the supported order 4; supply closed-form derivatives");
  return finite_difference(s, d, k);
}

cplx Symbol::finite_difference(const Sample& s, const Derivs& d, int total_order) const {
  if (d.order() == 0) return eval_(s);
  Flat f = flatten(d);
  int comp = 0;
  while (f[comp] == 0) ++comp;
  f[comp] -= 1;
  const Derivs rest = unflatten(f);
  const double shrink = std::pow(2.0, -16.0 / total_order);
  const int axis = comp % 3;
  double h = 0.0;
  if (comp < 3)
    h = (1.0 + xi_norm(s.xi)) * shrink;
  else
    h = length_scale_ / (2.0 * kPi) * shrink;
  auto shifted = [&](double off) {
    Sample q = s;
    if (comp < 3)
      q.xi[axis] += off;
    else if (comp < 6)
      q.x[axis] += off;
    else
      q.y[axis] += off;
    return finite_difference(q, rest, total_order);
  };
  return (shifted(-2 * h) - 8.0 * shifted(-h) + 8.0 * shifted(h) - shifted(2 * h)) / (12.0 * h);
}

double qstar(double p, double q) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw UndefinedExponentError("exponents must be >= 1");
  if (std::isinf(p) && std::isinf(q)) return kInf;
  if (std::isinf(p)) return q;
  if (std::isinf(q)) return p;
  if (p * q < p + q) throw UndefinedExponentError("q* is undefined when pq < p + q");
  return p * q / (p + q);
}

Symbol sum(const Symbol& a, const Symbol& b) {
  const double order = std::max(a.order(), b.order());
  const double p = std::min(a.integrability(), b.integrability());
  if (a.expr() && b.expr()) {
    Symbol s = Symbol::from_expr(expr::add(a.expr(), b.expr()), order, p);
    s.flags().xi_compact = a.flags().xi_compact && b.flags().xi_compact;
    return s;
  }
  SymbolFlags f;
  f.x_independent = a.flags().x_independent && b.flags().x_independent;
  f.y_dependent = a.flags().y_dependent || b.flags().y_dependent;
  f.xi_compact = a.flags().xi_compact && b.flags().xi_compact;
  if (a.flags().xi_degree && b.flags().xi_degree) f.xi_degree = std::max(*a.flags().xi_degree, *b.flags().xi_degree);
  if (a.flags().homogeneous_degree && a.flags().homogeneous_degree == b.flags().homogeneous_degree)
    f.homogeneous_degree = a.flags().homogeneous_degree;
  return Symbol([a, b](const Sample& s) { return a(s) + b(s); }, order, p, f,
                [a, b](const Sample& s, const Derivs& d) { return a.derivative(s, d) + b.derivative(s, d); },
                "(" + a.name() + ") + (" + b.name() + ")");
}

Symbol product(const Symbol& a, const Symbol& b) {
  const double order = a.order() + b.order();
  const double p = qstar(a.integrability(), b.integrability());
  if (a.expr() && b.expr()) {
    Symbol s = Symbol::from_expr(expr::mul(a.expr(), b.expr()), order, p);
    s.flags().xi_compact = a.flags().xi_compact || b.flags().xi_compact;
    return s;
  }
  SymbolFlags f;
  f.x_independent = a.flags().x_independent && b.flags().x_independent;
  f.y_dependent = a.flags().y_dependent || b.flags().y_dependent;
  f.xi_compact = a.flags().xi_compact || b.flags().xi_compact;
  if (a.flags().xi_degree && b.flags().xi_degree) f.xi_degree = *a.flags().xi_degree + *b.flags().xi_degree;
  if (a.flags().homogeneous_degree && b.flags().homogeneous_degree)
    f.homogeneous_degree = *a.flags().homogeneous_degree + *b.flags().homogeneous_degree;
  auto deriv = [a, b](const Sample& s, const Derivs& d) {
    const Flat full = flatten(d);
    cplx acc = 0.0;
    for_each_sub_index(full, [&](const Flat& e, double coef) {
      const cplx fa = a.derivative(s, unflatten(e));
      if (fa == cplx(0.0, 0.0)) return;
      acc += coef * fa * b.derivative(s, unflatten(minus(full, e)));
    });
    return acc;
  };
  return Symbol([a, b](const Sample& s) { return a(s) * b(s); }, order, p, f, deriv,
                "(" + a.name() + ")·(" + b.name() + ")");
}

Symbol scaled(cplx c, const Symbol& a) {
  if (a.expr()) {
    Symbol s = Symbol::from_expr(expr::mul(expr::constant(c), a.expr()), a.order(), a.integrability());
    s.flags().xi_compact = a.flags().xi_compact;
    s.flags().homogeneous_degree = a.flags().homogeneous_degree;
    return s;
  }
  return Symbol([a, c](const Sample& s) { return c * a(s); }, a.order(), a.integrability(), a.flags(),
                [a, c](const Sample& s, const Derivs& d) { return c * a.derivative(s, d); },
                expr::to_string(*expr::constant(c)) + "·(" + a.name() + ")");
}

Symbol reciprocal(const Symbol& a) {
  if (a.expr()) return Symbol::from_expr(expr::pow(a.expr(), -1.0), -a.order(), a.integrability());
  SymbolFlags f;
  f.x_independent = a.flags().x_independent;
  f.y_dependent = a.flags().y_dependent;
  if (a.flags().homogeneous_degree) f.homogeneous_degree = -*a.flags().homogeneous_degree;
  auto deriv = [a](const Sample& s, const Derivs& d) {
    std::map<std::uint64_t, cplx> memo;
    const cplx inv = 1.0 / a(s);
    std::function<cplx(const Flat&)> rec = [&](const Flat& dd) -> cplx {
      const Derivs du = unflatten(dd);
      if (du.order() == 0) return inv;
      const std::uint64_t key = pack(du);
      if (auto it = memo.find(key); it != memo.end()) return it->second;
      cplx acc = 0.0;
      for_each_sub_index(dd, [&](const Flat& e, double coef) {
        if (unflatten(e).order() == 0) return;
        const cplx da = a.derivative(s, unflatten(e));
        if (da == cplx(0.0, 0.0)) return;
        acc += coef * da * rec(minus(dd, e));
      });
      const cplx r = -inv * acc;
      memo.emplace(key, r);
      return r;
    };
    return rec(flatten(d));
  };
  return Symbol([a](const Sample& s) { return 1.0 / a(s); }, -a.order(), a.integrability(), f, deriv,
                "1/(" + a.name() + ")");
}

Symbol derivative_symbol(const Symbol& a, const Derivs& d, cplx coef) {
  const double order = a.order() - total(d.xi);
  if (a.expr()) {
    Symbol s = Symbol::from_expr(expr::mul(expr::constant(coef), expr::differentiate(a.expr(), d.xi, d.x, d.y)),
                                 order, a.integrability());
    s.flags().xi_compact = a.flags().xi_compact;
    return s;
  }
  SymbolFlags f = a.flags();
  if (f.xi_degree) f.xi_degree = std::max(0, *f.xi_degree - total(d.xi));
  if (f.homogeneous_degree) f.homogeneous_degree = *f.homogeneous_degree - total(d.xi);
  const Flat base = flatten(d);
  auto deriv = [a, base, coef](const Sample& s, const Derivs& e) {
    Flat sum_idx = flatten(e);
    for (int i = 0; i < 9; ++i) sum_idx[i] += base[i];
    return coef * a.derivative(s, unflatten(sum_idx));
  };
  return Symbol([a, d, coef](const Sample& s) { return coef * a.derivative(s, d); }, order, a.integrability(), f,
                deriv, "∂(" + a.name() + ")");
}

Symbol conjugated(const Symbol& a) {
  if (a.expr()) {
    Symbol s = Symbol::from_expr(expr::conjugate(a.expr()), a.order(), a.integrability());
    s.flags().xi_compact = a.flags().xi_compact;
    s.flags().homogeneous_degree = a.flags().homogeneous_degree;
    return s;
  }
  return Symbol([a](const Sample& s) { return std::conj(a(s)); }, a.order(), a.integrability(), a.flags(),
                [a](const Sample& s, const Derivs& d) { return std::conj(a.derivative(s, d)); },
                "conj(" + a.name() + ")");
}

Symbol reflected_xi(const Symbol& a) {
  if (a.expr()) {
    ExprPtr e = a.expr();
    for (int k = 0; k < 3; ++k) e = expr::substitute(e, var_xi + k, expr::neg(expr::variable(var_xi + k)));
    Symbol s = Symbol::from_expr(e, a.order(), a.integrability());
    s.flags().xi_compact = a.flags().xi_compact;
    s.flags().homogeneous_degree = a.flags().homogeneous_degree;
    return s;
  }
  auto flip = [](Sample s) {
    for (auto& v : s.xi) v = -v;
    return s;
  };
  return Symbol([a, flip](const Sample& s) { return a(flip(s)); }, a.order(), a.integrability(), a.flags(),
                [a, flip](const Sample& s, const Derivs& d) {
                  const double sign = (total(d.xi) % 2) ? -1.0 : 1.0;
                  return sign * a.derivative(flip(s), d);
                },
                a.name() + "(-ξ)");
}

Symbol swapped_xy(const Symbol& a) {
  SymbolFlags f = a.flags();
  f.x_independent = !a.flags().y_dependent;
  f.y_dependent = !a.flags().x_independent;
  if (a.expr()) {
    Symbol s = Symbol::from_expr(swap_xy_expr(a.expr()), a.order(), a.integrability());
    s.flags().xi_compact = a.flags().xi_compact;
    s.flags().homogeneous_degree = a.flags().homogeneous_degree;
    return s;
  }
  auto swap = [](Sample s) {
    std::swap(s.x, s.y);
    return s;
  };
  return Symbol([a, swap](const Sample& s) { return a(swap(s)); }, a.order(), a.integrability(), f,
                [a, swap](const Sample& s, const Derivs& d) {
                  Derivs e = d;
                  std::swap(e.x, e.y);
                  return a.derivative(swap(s), e);
                },
                a.name() + "[x<->y]");
}

Symbol on_diagonal(const Symbol& a) {
  if (a.expr()) {
    ExprPtr e = a.expr();
    for (int k = 0; k < 3; ++k) e = expr::substitute(e, var_y + k, expr::variable(var_x + k));
    return Symbol::from_expr(e, a.order(), a.integrability());
  }
  SymbolFlags f = a.flags();
  f.y_dependent = false;
  f.x_independent = a.flags().x_independent && !a.flags().y_dependent;
  auto diag = [](Sample s) {
    s.y = s.x;
    return s;
  };
  auto deriv = [a, diag](const Sample& s, const Derivs& d) {
    // d^beta_x [a(x, x)] = sum_gamma binom(beta, gamma) d^gamma_x d^{beta-gamma}_y a
    Flat bx{0, 0, 0, d.x[0], d.x[1], d.x[2], 0, 0, 0};
    cplx acc = 0.0;
    for_each_sub_index(bx, [&](const Flat& g, double coef) {
      Derivs e;
      e.xi = d.xi;
      for (int k = 0; k < 3; ++k) {
        e.x[k] = g[3 + k];
        e.y[k] = d.x[k] - g[3 + k];
      }
      acc += coef * a.derivative(diag(s), e);
    });
    return acc;
  };
  return Symbol([a, diag](const Sample& s) { return a(diag(s)); }, a.order(), a.integrability(), f, deriv,
                a.name() + "|y=x");
}

Symbol zero_symbol(double order) {
  Symbol s = Symbol::constant(0.0);
  s.set_order(order);
  return s;
}

std::vector<MultiIndex> multi_indices(int dim, int max_order) {
  std::vector<MultiIndex> out;
  for (int k = 0; k <= max_order; ++k) {
    for (int a = k; a >= 0; --a) {
      if (dim == 1) {
        if (a == k) out.push_back({a, 0, 0});
        continue;
      }
      for (int b = k - a; b >= 0; --b) {
        const int c = k - a - b;
        if (dim == 2 && c != 0) continue;
        out.push_back({a, b, c});
      }
    }
  }
  return out;
}

const EstimateEntry& EstimateReport::entry(const MultiIndex& alpha, const MultiIndex& beta) const {
  for (const auto& e : entries)
    if (e.alpha == alpha && e.beta == beta) return e;
  throw ParameterError("no estimate entry for the requested multi-indices");
}

namespace {

std::vector<std::size_t> strided_sites(const Grid& grid, int max_per_axis) {
  const int stride = std::max(1, grid.n() / std::max(1, max_per_axis));
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    const MultiIndex m = grid.lattice(s);
    bool keep = true;
    for (int d = 0; d < grid.dim(); ++d) keep = keep && (m[d] % stride == 0);
    if (keep) out.push_back(s);
  }
  return out;
}

// Least-squares slope of ys against xs.
double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace

EstimateReport check_symbol_estimate(const Symbol& a, int alpha_max, int beta_max, const Grid& grid,
                                     const BrownianEnsemble& ensemble, const EstimateOptions& opt) {
  if (alpha_max < 0 || beta_max < 0) throw ParameterError("derivative caps must be non-negative");
  if (!a.has_closed_form() && alpha_max + beta_max > 4)
    throw DerivativeAccuracyError("finite differences support total derivative order <= 4");
  Symbol sym = a;
  sym.set_length_scale(grid.period());

  EstimateReport rep;
  rep.order = a.order();
  rep.integrability = a.integrability();
  rep.alpha_max = alpha_max;
  rep.beta_max = beta_max;
  rep.paths = ensemble.paths();
  rep.note = "finite check: derivatives verified only up to |alpha| <= " + std::to_string(alpha_max) +
             ", |beta| <= " + std::to_string(beta_max) + " on the sampled lattice";

  const TimeGrid& tg = ensemble.time_grid();
  std::vector<int> nodes;
  const int all = tg.steps() + 1;
  const int stride_t = opt.max_nodes > 0 ? std::max(1, all / opt.max_nodes) : 1;
  for (int j = 0; j < all; j += stride_t) nodes.push_back(j);
  if (nodes.back() != tg.steps()) nodes.push_back(tg.steps());
  rep.nodes = static_cast<int>(nodes.size());

  std::vector<std::size_t> xs = a.flags().x_independent ? std::vector<std::size_t>{0}
                                                         : strided_sites(grid, opt.max_x_per_axis);
  std::vector<std::size_t> freqs = strided_sites(grid, opt.max_xi_per_axis);

  const auto alphas = multi_indices(grid.dim(), alpha_max);
  const auto betas = multi_indices(grid.dim(), beta_max);

  for (const auto& alpha : alphas) {
    for (const auto& beta : betas) {
      EstimateEntry entry;
      entry.alpha = alpha;
      entry.beta = beta;
      const double shift = a.order() - total(alpha);
      std::vector<double> shell_max(64, 0.0);
      entry.majorant.assign(static_cast<std::size_t>(ensemble.paths()) * nodes.size(), 0.0);
      Derivs d;
      d.xi = alpha;
      d.x = beta;
      parallel_for(static_cast<std::size_t>(ensemble.paths()) * nodes.size(), [&](std::size_t idx) {
        const int m = static_cast<int>(idx / nodes.size());
        const int j = nodes[idx % nodes.size()];
        Sample s;
        s.t = tg.node(j);
        s.path = ensemble.prefix(m, j);
        std::vector<double> ratios;
        ratios.reserve(xs.size() * freqs.size());
        for (std::size_t xi_site : freqs) {
          s.xi = grid.frequency(xi_site);
          const double r = xi_norm(s.xi);
          const double weight = std::pow(1.0 + r * r, 0.5 * shift);
          for (std::size_t x_site : xs) {
            s.x = grid.point(x_site);
            ratios.push_back(std::abs(sym.derivative(s, d)) / weight);
          }
        }
        double q;
        if (opt.quantile >= 1.0) {
          q = *std::max_element(ratios.begin(), ratios.end());
        } else {
          const std::size_t k = static_cast<std::size_t>(opt.quantile * (ratios.size() - 1));
          std::nth_element(ratios.begin(), ratios.begin() + k, ratios.end());
          q = ratios[k];
        }
        entry.majorant[idx] = q;
      });
      // Shell maxima for the growth test use a separate deterministic pass.
      for (int m = 0; m < ensemble.paths(); ++m) {
        for (int j : nodes) {
          Sample s;
          s.t = tg.node(j);
          s.path = ensemble.prefix(m, j);
          for (std::size_t xi_site : freqs) {
            s.xi = grid.frequency(xi_site);
            const double r = xi_norm(s.xi);
            if (r < 1.0) continue;
            const int shell = static_cast<int>(std::floor(std::log2(r)));
            const double weight = std::pow(1.0 + r * r, 0.5 * shift);
            for (std::size_t x_site : xs) {
              s.x = grid.point(x_site);
              shell_max[shell] = std::max(shell_max[shell], std::abs(sym.derivative(s, d)) / weight);
            }
          }
        }
        if (a.flags().x_independent && !a.flags().y_dependent) break;
      }
      std::vector<double> lx, ly;
      for (int sh = 0; sh < 64; ++sh) {
        if (shell_max[sh] <= 0.0) continue;
        lx.push_back(std::log(std::pow(2.0, sh + 0.5)));
        ly.push_back(std::log(shell_max[sh]));
      }
      // Growth is judged on the top three shells only.
      if (lx.size() > 3) {
        lx.erase(lx.begin(), lx.end() - 3);
        ly.erase(ly.begin(), ly.end() - 3);
      }
      entry.slope = fit_slope(lx, ly);
      entry.violation = entry.slope > opt.slope_tolerance;

      // L^p_F(0,T) norm of the majorant: path mean of (int |M|^p dt)^{1/p}.
      const double p = a.integrability();
      double acc = 0.0;
      for (int m = 0; m < ensemble.paths(); ++m) {
        if (std::isinf(p)) {
          for (std::size_t k = 0; k < nodes.size(); ++k)
            acc = std::max(acc, entry.majorant[static_cast<std::size_t>(m) * nodes.size() + k]);
          continue;
        }
        double integral = 0.0;
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
          const double t0 = tg.node(nodes[k]), t1 = tg.node(nodes[k + 1]);
          const double f0 = std::pow(entry.majorant[m * nodes.size() + k], p);
          const double f1 = std::pow(entry.majorant[m * nodes.size() + k + 1], p);
          integral += 0.5 * (t1 - t0) * (f0 + f1);
        }
        acc += std::pow(integral, 1.0 / p);
      }
      entry.lpf_norm = std::isinf(p) ? acc : acc / ensemble.paths();
      rep.violation = rep.violation || entry.violation;
      rep.entries.push_back(std::move(entry));
    }
  }
  return rep;
}

EllipticityResult ellipticity_check(const Symbol& a, const Grid& grid, const BrownianEnsemble& ensemble) {
  const TimeGrid& tg = ensemble.time_grid();
  std::vector<std::size_t> xs =
      a.flags().x_independent ? std::vector<std::size_t>{0} : strided_sites(grid, 16);
  std::vector<std::size_t> freqs = strided_sites(grid, 128);
  const int paths = std::min(ensemble.paths(), 8);
  std::vector<int> nodes;
  const int stride_t = std::max(1, (tg.steps() + 1) / 5);
  for (int j = 0; j <= tg.steps(); j += stride_t) nodes.push_back(j);

  // Minimum of |a| / (1 + |xi|)^l at each sampled frequency.
  std::vector<double> min_ratio(freqs.size(), kInf);
  double max_ratio = 0.0;
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    Sample s;
    s.xi = grid.frequency(freqs[f]);
    const double weight = std::pow(1.0 + xi_norm(s.xi), a.order());
    for (int m = 0; m < paths; ++m) {
      for (int j : nodes) {
        s.t = tg.node(j);
        s.path = ensemble.prefix(m, j);
        for (std::size_t x_site : xs) {
          s.x = grid.point(x_site);
          const double r = std::abs(a(s)) / weight;
          min_ratio[f] = std::min(min_ratio[f], r);
          max_ratio = std::max(max_ratio, r);
        }
      }
    }
  }
  EllipticityResult res;
  if (max_ratio == 0.0) {
    res.reason = "symbol vanishes on the sampled band";
    return res;
  }
  const double floor_ratio = 1e-10 * max_ratio;

  // Decay of the shell minima along the band means |a|/(1+|xi|)^l -> 0 on some ray.
  std::vector<double> shell_min(64, kInf);
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    const double r = xi_norm(grid.frequency(freqs[f]));
    if (r < 1.0) continue;
    const int sh = static_cast<int>(std::floor(std::log2(r)));
    shell_min[sh] = std::min(shell_min[sh], min_ratio[f]);
  }
  std::vector<double> lx, ly;
  for (int sh = 0; sh < 64; ++sh) {
    if (std::isinf(shell_min[sh])) continue;
    if (shell_min[sh] <= floor_ratio) {
      res.reason = "|a|/(1+|xi|)^l vanishes at |xi| ~ " + std::to_string(std::pow(2.0, sh));
      return res;
    }
    lx.push_back(std::log(std::pow(2.0, sh + 0.5)));
    ly.push_back(std::log(shell_min[sh]));
  }
  if (fit_slope(lx, ly) < -0.5) {
    res.reason = "|a|/(1+|xi|)^l decays along the resolved band";
    return res;
  }
  const double band = grid.band_limit();
  for (double radius = 0.0; radius < band; radius = (radius == 0.0 ? 1.0 : 2.0 * radius)) {
    double c = kInf;
    for (std::size_t f = 0; f < freqs.size(); ++f)
      if (xi_norm(grid.frequency(freqs[f])) >= radius) c = std::min(c, min_ratio[f]);
    if (c > floor_ratio && std::isfinite(c)) {
      res.elliptic = true;
      res.c_k = c;
      res.r_k = radius;
      return res;
    }
  }
  res.reason = "no dyadic radius with a positive lower bound";
  return res;
}

}  // namespace spdo
