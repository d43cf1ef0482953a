#pragma once

// Small symbolic expression language over (t, w, x, y, xi) used to enter
// symbols from text and to carry closed-form derivatives through the
// calculus. Grammar: + - * / ^, unary minus, parentheses, numbers, the
// constants i and pi, and the functions sin, cos, exp, abs, sqrt.
// Variables: t, w (the Brownian value W(t)), x x1 x2 x3, y y1 y2 y3,
// xi xi1 xi2 xi3.

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spdo/grid.hpp"

namespace spdo {

enum class Op { constant, variable, add, mul, pow, sin, cos, exp, abs };

/// Variable slots.
enum Var : int { var_t = 0, var_w = 1, var_x = 2, var_y = 5, var_xi = 8, var_count = 11 };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  Op op = Op::constant;
  cplx value{0.0, 0.0};   // constant
  int var = 0;            // variable
  double exponent = 1.0;  // pow
  std::vector<ExprPtr> args;
};

struct ExprEnv {
  double t = 0.0;
  double w = 0.0;
  Vec3 x{0.0, 0.0, 0.0};
  Vec3 y{0.0, 0.0, 0.0};
  Vec3 xi{0.0, 0.0, 0.0};
};

namespace expr {

ExprPtr constant(cplx c);
ExprPtr variable(int v);
ExprPtr add(std::vector<ExprPtr> terms);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr mul(std::vector<ExprPtr> factors);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr pow(ExprPtr base, double exponent);
ExprPtr func(Op f, ExprPtr arg);

ExprPtr parse(const std::string& text);

cplx evaluate(const Expr& e, const ExprEnv& env);
ExprPtr differentiate(const ExprPtr& e, int v);
/// Mixed partial derivative; counts per axis for xi, x and y.
ExprPtr differentiate(ExprPtr e, const MultiIndex& dxi, const MultiIndex& dx, const MultiIndex& dy);
/// Complex conjugate, valid because every variable is real and every
/// function is real-analytic with real Taylor coefficients.
ExprPtr conjugate(const ExprPtr& e);
/// Substitute an expression for a variable.
ExprPtr substitute(const ExprPtr& e, int v, const ExprPtr& replacement);

bool depends_on(const Expr& e, int v);
bool depends_on_any(const Expr& e, int first, int count);
/// Degree in xi when the expression is a polynomial in xi, otherwise empty.
std::optional<int> xi_degree(const Expr& e);
bool is_zero(const Expr& e);

std::string to_string(const Expr& e);

}  // namespace expr
}  // namespace spdo
