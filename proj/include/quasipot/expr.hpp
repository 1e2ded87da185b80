#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

#include "quasipot/linalg.hpp"

namespace quasipot {

enum class Func { Sin, Cos, Exp, Log, Sqrt, Tanh, Abs };

/// Value together with exact first and second partial derivatives at a point.
/// The hessian is built symmetric entry by entry, never from one triangle.
struct EvalResult {
  double value = 0.0;
  Vec gradient;
  Mat hessian;
};

struct ExprNode;  // implementation detail

/// Immutable scalar expression over state variables x1..xn. Named parameters
/// are bound to literals at parse time, so a parsed tree depends only on the
/// state vector. Nodes are shared; copies are cheap.
class Expr {
 public:
  Expr();  // literal 0

  static Expr literal(double v);
  static Expr variable(int index);  // 0-based
  static Expr apply(Func f, const Expr& a);

  friend Expr operator-(const Expr& a);
  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr pow(const Expr& base, const Expr& exponent);

  bool is_literal() const;
  double literal_value() const;  // valid only when is_literal()
  bool depends_on(int var) const;
  bool is_constant() const;
  /// 1 + highest variable index used; 0 for constant expressions.
  int arity() const;

  friend Expr parse(std::string_view source, int n, const std::map<std::string, double>& params);
  friend EvalResult evaluate(const Expr& e, const Eigen::Ref<const Vec>& x);
  friend double evaluate_value(const Expr& e, const Eigen::Ref<const Vec>& x);
  friend Expr differentiate(const Expr& e, int var);
  friend std::string to_string(const Expr& e);

 private:
  explicit Expr(std::shared_ptr<const ExprNode> node) : node_(std::move(node)) {}
  std::shared_ptr<const ExprNode> node_;
};

/// Parses `source` into an expression over x1..xn with `params` bound as
/// literals. Grammar: numbers, identifiers, ( ), unary -, binary + - * / ^
/// with the usual precedence (^ highest and right-associative, then unary -,
/// then * /, then + -), and the functions sin cos exp log sqrt tanh abs.
/// Throws ParseError / UnknownIdentifier with a byte offset.
Expr parse(std::string_view source, int n, const std::map<std::string, double>& params = {});

/// Value, gradient and hessian at x, all derivatives exact (order-2 forward
/// propagation, no finite differences). Throws DomainError at points where
/// the expression or a requested derivative is undefined (log of a
/// nonpositive value, |.| at the kink, non-integer power of a nonpositive
/// base, ...).
EvalResult evaluate(const Expr& e, const Eigen::Ref<const Vec>& x);

/// Value only; same domain rules as evaluate() except that derivative-only
/// restrictions (sqrt at 0, abs at 0) do not apply.
double evaluate_value(const Expr& e, const Eigen::Ref<const Vec>& x);

/// Exact symbolic partial derivative with respect to variable `var`.
Expr differentiate(const Expr& e, int var);

/// Canonical text form; parse(to_string(e), n) evaluates identically to e.
std::string to_string(const Expr& e);

}  // namespace quasipot
