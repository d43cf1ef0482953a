#include "spdo/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>

namespace spdo::expr {

namespace {

ExprPtr make_node(Op op, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->args = std::move(args);
  return e;
}

bool is_const(const Expr& e) { return e.op == Op::constant; }

std::string format_real(double v) {
  if (v == std::round(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f", v);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string format_constant(cplx c) {
  const double re = c.real(), im = c.imag();
  if (im == 0.0) return format_real(re);
  auto imag_part = [](double v) {
    if (v == 1.0) return std::string("i");
    if (v == -1.0) return std::string("-i");
    return format_real(v) + "i";
  };
  if (re == 0.0) return imag_part(im);
  return "(" + format_real(re) + (im < 0 ? "" : "+") + imag_part(im) + ")";
}

const char* var_name(int v) {
  static const char* names[var_count] = {"t", "w", "x", "x2", "x3", "y", "y2", "y3", "ξ", "ξ2", "ξ3"};
  return names[v];
}

// Split a term into its numeric coefficient and the remaining product.
std::pair<cplx, ExprPtr> split_coefficient(const ExprPtr& e) {
  if (e->op == Op::constant) return {e->value, nullptr};
  if (e->op == Op::mul && is_const(*e->args.front())) {
    std::vector<ExprPtr> rest(e->args.begin() + 1, e->args.end());
    ExprPtr r = rest.size() == 1 ? rest.front() : make_node(Op::mul, std::move(rest));
    return {e->args.front()->value, r};
  }
  return {1.0, e};
}

int factor_rank(const Expr& e) {
  if (e.op == Op::constant) return -1;
  if (e.op == Op::variable) return e.var;
  if (e.op == Op::pow && e.args[0]->op == Op::variable) return e.args[0]->var;
  return var_count + 1;
}

bool leading_negative(const Expr& e) {
  if (e.op == Op::constant) {
    if (e.value.imag() == 0.0) return e.value.real() < 0.0;
    if (e.value.real() == 0.0) return e.value.imag() < 0.0;
    return false;
  }
  if (e.op == Op::mul && is_const(*e.args.front())) return leading_negative(*e.args.front());
  return false;
}

std::string print(const Expr& e);

std::string print_factor(const Expr& e) {
  if (e.op == Op::add) return "(" + print(e) + ")";
  if (e.op == Op::constant && e.value.imag() != 0.0 && e.value.real() != 0.0) return format_constant(e.value);
  return print(e);
}

std::string print(const Expr& e) {
  switch (e.op) {
    case Op::constant: {
      std::string s = format_constant(e.value);
      if (!s.empty() && s[0] == '-') s = "−" + s.substr(1);
      return s;
    }
    case Op::variable:
      return var_name(e.var);
    case Op::add: {
      std::string s = print(*e.args.front());
      for (std::size_t k = 1; k < e.args.size(); ++k) {
        const Expr& term = *e.args[k];
        if (leading_negative(term))
          s += " − " + print(*neg(e.args[k]));
        else
          s += " + " + print(term);
      }
      return s;
    }
    case Op::mul: {
      std::string s;
      std::size_t start = 0;
      if (is_const(*e.args.front())) {
        const cplx c = e.args.front()->value;
        start = 1;
        if (c == cplx(-1.0, 0.0))
          s = "−";
        else if (c != cplx(1.0, 0.0))
          s = print_factor(*e.args.front()) + "·";
      }
      for (std::size_t k = start; k < e.args.size(); ++k) {
        if (k > start) s += "·";
        s += print_factor(*e.args[k]);
      }
      return s;
    }
    case Op::pow: {
      const Expr& b = *e.args.front();
      std::string base = (b.op == Op::variable || b.op == Op::sin || b.op == Op::cos || b.op == Op::exp ||
                          b.op == Op::abs)
                             ? print(b)
                             : "(" + print(b) + ")";
      std::string ex = format_real(e.exponent);
      if (e.exponent < 0) ex = "(" + ex + ")";
      return base + "^" + ex;
    }
    case Op::sin:
      return "sin(" + print(*e.args.front()) + ")";
    case Op::cos:
      return "cos(" + print(*e.args.front()) + ")";
    case Op::exp:
      return "exp(" + print(*e.args.front()) + ")";
    case Op::abs:
      return "abs(" + print(*e.args.front()) + ")";
  }
  return "?";
}

// Recursive-descent parser.
class Parser {
 public:
  explicit Parser(std::string text) : s_(normalize(std::move(text))) {}

  ExprPtr parse_all() {
    ExprPtr e = parse_sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  static std::string normalize(std::string s) {
    const std::pair<std::string, std::string> subs[] = {{"·", "*"}, {"−", "-"}, {"ξ", "xi"}};
    for (const auto& [from, to] : subs) {
      std::size_t p = 0;
      while ((p = s.find(from, p)) != std::string::npos) {
        s.replace(p, from.size(), to);
        p += to.size();
      }
    }
    return s;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("expression parse error at position " + std::to_string(pos_) + ": " + msg);
  }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  ExprPtr parse_sum() {
    ExprPtr e = parse_product();
    for (;;) {
      if (accept('+'))
        e = add(e, parse_product());
      else if (accept('-'))
        e = add(e, neg(parse_product()));
      else
        return e;
    }
  }

  ExprPtr parse_product() {
    ExprPtr e = parse_unary();
    for (;;) {
      if (accept('*'))
        e = mul(e, parse_unary());
      else if (accept('/'))
        e = mul(e, pow(parse_unary(), -1.0));
      else
        return e;
    }
  }

  ExprPtr parse_unary() {
    if (accept('-')) return neg(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_primary();
    if (accept('^')) {
      ExprPtr ex = parse_unary();
      if (ex->op != Op::constant || ex->value.imag() != 0.0) fail("exponent must be a real constant");
      return pow(base, ex->value.real());
    }
    return base;
  }

  ExprPtr parse_primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (accept('(')) {
      ExprPtr e = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(s_.substr(pos_), &used);
      } catch (const std::exception&) {
        fail("bad number");
      }
      pos_ += used;
      return constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string id = s_.substr(start, pos_ - start);
      static const std::map<std::string, Op> funcs = {
          {"sin", Op::sin}, {"cos", Op::cos}, {"exp", Op::exp}, {"abs", Op::abs}};
      if (auto f = funcs.find(id); f != funcs.end()) {
        if (!accept('(')) fail("expected '(' after " + id);
        ExprPtr a = parse_sum();
        if (!accept(')')) fail("expected ')'");
        return func(f->second, a);
      }
      if (id == "sqrt") {
        if (!accept('(')) fail("expected '(' after sqrt");
        ExprPtr a = parse_sum();
        if (!accept(')')) fail("expected ')'");
        return pow(a, 0.5);
      }
      if (id == "i") return constant(kI);
      if (id == "pi") return constant(kPi);
      static const std::map<std::string, int> vars = {
          {"t", var_t},       {"w", var_w},       {"x", var_x},       {"x1", var_x},      {"x2", var_x + 1},
          {"x3", var_x + 2},  {"y", var_y},       {"y1", var_y},      {"y2", var_y + 1},  {"y3", var_y + 2},
          {"xi", var_xi},     {"xi1", var_xi},    {"xi2", var_xi + 1}, {"xi3", var_xi + 2}};
      if (auto v = vars.find(id); v != vars.end()) return variable(v->second);
      pos_ = start;
      fail("unknown identifier '" + id + "'");
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string s_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprPtr constant(cplx c) {
  auto e = std::make_shared<Expr>();
  e->op = Op::constant;
  e->value = c;
  return e;
}

ExprPtr variable(int v) {
  auto e = std::make_shared<Expr>();
  e->op = Op::variable;
  e->var = v;
  return e;
}

ExprPtr add(std::vector<ExprPtr> terms) {
  std::vector<ExprPtr> flat;
  for (auto& t : terms) {
    if (t->op == Op::add)
      flat.insert(flat.end(), t->args.begin(), t->args.end());
    else
      flat.push_back(t);
  }
  cplx const_sum = 0.0;
  std::vector<std::pair<cplx, ExprPtr>> groups;
  std::map<std::string, std::size_t> index;
  for (auto& t : flat) {
    auto [c, rest] = split_coefficient(t);
    if (!rest) {
      const_sum += c;
      continue;
    }
    const std::string key = print(*rest);
    if (auto it = index.find(key); it != index.end()) {
      groups[it->second].first += c;
    } else {
      index.emplace(key, groups.size());
      groups.emplace_back(c, rest);
    }
  }
  std::vector<ExprPtr> out;
  for (auto& [c, rest] : groups)
    if (c != cplx(0.0, 0.0)) out.push_back(mul(constant(c), rest));
  if (const_sum != cplx(0.0, 0.0)) out.push_back(constant(const_sum));
  if (out.empty()) return constant(0.0);
  if (out.size() == 1) return out.front();
  return make_node(Op::add, std::move(out));
}

ExprPtr add(ExprPtr a, ExprPtr b) { return add(std::vector<ExprPtr>{std::move(a), std::move(b)}); }

ExprPtr mul(std::vector<ExprPtr> factors) {
  std::vector<ExprPtr> flat;
  for (auto& f : factors) {
    if (f->op == Op::mul)
      flat.insert(flat.end(), f->args.begin(), f->args.end());
    else
      flat.push_back(f);
  }
  cplx coef = 1.0;
  std::vector<std::pair<ExprPtr, double>> bases;
  std::map<std::string, std::size_t> index;
  for (auto& f : flat) {
    if (f->op == Op::constant) {
      coef *= f->value;
      continue;
    }
    ExprPtr base = f;
    double ex = 1.0;
    if (f->op == Op::pow) {
      base = f->args.front();
      ex = f->exponent;
    }
    const std::string key = print(*base);
    if (auto it = index.find(key); it != index.end()) {
      bases[it->second].second += ex;
    } else {
      index.emplace(key, bases.size());
      bases.emplace_back(base, ex);
    }
  }
  if (coef == cplx(0.0, 0.0)) return constant(0.0);
  std::vector<ExprPtr> out;
  for (auto& [b, ex] : bases) {
    if (ex == 0.0) continue;
    ExprPtr f = pow(b, ex);
    if (f->op == Op::constant)
      coef *= f->value;
    else
      out.push_back(f);
  }
  std::stable_sort(out.begin(), out.end(), [](const ExprPtr& a, const ExprPtr& b) {
    const int ra = factor_rank(*a), rb = factor_rank(*b);
    if (ra != rb) return ra < rb;
    if (ra > var_count) return print(*a) < print(*b);
    return false;
  });
  if (out.empty()) return constant(coef);
  if (coef != cplx(1.0, 0.0)) out.insert(out.begin(), constant(coef));
  if (out.size() == 1) return out.front();
  return make_node(Op::mul, std::move(out));
}

ExprPtr mul(ExprPtr a, ExprPtr b) { return mul(std::vector<ExprPtr>{std::move(a), std::move(b)}); }

ExprPtr neg(ExprPtr a) { return mul(constant(-1.0), std::move(a)); }

ExprPtr pow(ExprPtr base, double exponent) {
  if (exponent == 0.0) return constant(1.0);
  if (exponent == 1.0) return base;
  if (base->op == Op::constant) {
    const cplx b = base->value;
    if (b.imag() == 0.0 && (b.real() >= 0.0 || exponent == std::round(exponent)))
      return constant(std::pow(b.real(), exponent));
    return constant(std::pow(b, exponent));
  }
  if (base->op == Op::pow && exponent == std::round(exponent)) return pow(base->args.front(), base->exponent * exponent);
  auto e = std::make_shared<Expr>();
  e->op = Op::pow;
  e->exponent = exponent;
  e->args = {std::move(base)};
  return e;
}

ExprPtr func(Op f, ExprPtr arg) {
  if (arg->op == Op::constant) {
    ExprEnv env;
    auto tmp = make_node(f, {arg});
    return constant(evaluate(*tmp, env));
  }
  return make_node(f, {std::move(arg)});
}

ExprPtr parse(const std::string& text) { return Parser(text).parse_all(); }

cplx evaluate(const Expr& e, const ExprEnv& env) {
  switch (e.op) {
    case Op::constant:
      return e.value;
    case Op::variable:
      if (e.var == var_t) return env.t;
      if (e.var == var_w) return env.w;
      if (e.var < var_y) return env.x[e.var - var_x];
      if (e.var < var_xi) return env.y[e.var - var_y];
      return env.xi[e.var - var_xi];
    case Op::add: {
      cplx s = 0.0;
      for (const auto& a : e.args) s += evaluate(*a, env);
      return s;
    }
    case Op::mul: {
      cplx p = 1.0;
      for (const auto& a : e.args) p *= evaluate(*a, env);
      return p;
    }
    case Op::pow: {
      const cplx b = evaluate(*e.args.front(), env);
      const double ex = e.exponent;
      if (ex == std::round(ex) && std::abs(ex) <= 16) {
        cplx r = 1.0;
        const int k = static_cast<int>(std::abs(ex));
        for (int j = 0; j < k; ++j) r *= b;
        return ex < 0 ? 1.0 / r : r;
      }
      if (b.imag() == 0.0 && b.real() >= 0.0) return std::pow(b.real(), ex);
      return std::pow(b, ex);
    }
    case Op::sin:
      return std::sin(evaluate(*e.args.front(), env));
    case Op::cos:
      return std::cos(evaluate(*e.args.front(), env));
    case Op::exp:
      return std::exp(evaluate(*e.args.front(), env));
    case Op::abs:
      return std::abs(evaluate(*e.args.front(), env));
  }
  return 0.0;
}

bool depends_on(const Expr& e, int v) { return depends_on_any(e, v, 1); }

bool depends_on_any(const Expr& e, int first, int count) {
  if (e.op == Op::variable) return e.var >= first && e.var < first + count;
  for (const auto& a : e.args)
    if (depends_on_any(*a, first, count)) return true;
  return false;
}

bool is_zero(const Expr& e) { return e.op == Op::constant && e.value == cplx(0.0, 0.0); }

ExprPtr differentiate(const ExprPtr& e, int v) {
  if (!depends_on(*e, v)) return constant(0.0);
  switch (e->op) {
    case Op::constant:
      return constant(0.0);
    case Op::variable:
      return constant(e->var == v ? 1.0 : 0.0);
    case Op::add: {
      std::vector<ExprPtr> terms;
      for (const auto& a : e->args) terms.push_back(differentiate(a, v));
      return add(std::move(terms));
    }
    case Op::mul: {
      std::vector<ExprPtr> terms;
      for (std::size_t k = 0; k < e->args.size(); ++k) {
        ExprPtr dk = differentiate(e->args[k], v);
        if (is_zero(*dk)) continue;
        std::vector<ExprPtr> f;
        for (std::size_t j = 0; j < e->args.size(); ++j) f.push_back(j == k ? dk : e->args[j]);
        terms.push_back(mul(std::move(f)));
      }
      return add(std::move(terms));
    }
    case Op::pow: {
      const ExprPtr& b = e->args.front();
      return mul({constant(e->exponent), pow(b, e->exponent - 1.0), differentiate(b, v)});
    }
    case Op::sin:
      return mul(func(Op::cos, e->args.front()), differentiate(e->args.front(), v));
    case Op::cos:
      return neg(mul(func(Op::sin, e->args.front()), differentiate(e->args.front(), v)));
    case Op::exp:
      return mul(e, differentiate(e->args.front(), v));
    case Op::abs:
      return mul({e->args.front(), pow(e, -1.0), differentiate(e->args.front(), v)});
  }
  return constant(0.0);
}

ExprPtr differentiate(ExprPtr e, const MultiIndex& dxi, const MultiIndex& dx, const MultiIndex& dy) {
  for (int d = 0; d < 3; ++d) {
    for (int k = 0; k < dxi[d]; ++k) e = differentiate(e, var_xi + d);
    for (int k = 0; k < dx[d]; ++k) e = differentiate(e, var_x + d);
    for (int k = 0; k < dy[d]; ++k) e = differentiate(e, var_y + d);
  }
  return e;
}

ExprPtr conjugate(const ExprPtr& e) {
  if (e->op == Op::constant) return constant(std::conj(e->value));
  if (e->op == Op::variable) return e;
  std::vector<ExprPtr> args;
  for (const auto& a : e->args) args.push_back(conjugate(a));
  switch (e->op) {
    case Op::add:
      return add(std::move(args));
    case Op::mul:
      return mul(std::move(args));
    case Op::pow:
      return pow(args.front(), e->exponent);
    default:
      return func(e->op, args.front());
  }
}

ExprPtr substitute(const ExprPtr& e, int v, const ExprPtr& replacement) {
  if (e->op == Op::constant) return e;
  if (e->op == Op::variable) return e->var == v ? replacement : e;
  if (!depends_on(*e, v)) return e;
  std::vector<ExprPtr> args;
  for (const auto& a : e->args) args.push_back(substitute(a, v, replacement));
  switch (e->op) {
    case Op::add:
      return add(std::move(args));
    case Op::mul:
      return mul(std::move(args));
    case Op::pow:
      return pow(args.front(), e->exponent);
    default:
      return func(e->op, args.front());
  }
}

std::optional<int> xi_degree(const Expr& e) {
  if (!depends_on_any(e, var_xi, 3)) return 0;
  switch (e.op) {
    case Op::variable:
      return 1;
    case Op::add: {
      int d = 0;
      for (const auto& a : e.args) {
        auto da = xi_degree(*a);
        if (!da) return std::nullopt;
        d = std::max(d, *da);
      }
      return d;
    }
    case Op::mul: {
      int d = 0;
      for (const auto& a : e.args) {
        auto da = xi_degree(*a);
        if (!da) return std::nullopt;
        d += *da;
      }
      return d;
    }
    case Op::pow: {
      if (e.exponent < 0 || e.exponent != std::round(e.exponent)) return std::nullopt;
      auto db = xi_degree(*e.args.front());
      if (!db) return std::nullopt;
      return *db * static_cast<int>(e.exponent);
    }
    default:
      return std::nullopt;
  }
}

std::string to_string(const Expr& e) { return print(e); }

}  // namespace spdo::expr
