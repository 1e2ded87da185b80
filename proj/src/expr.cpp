#include "quasipot/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <utility>
#include <vector>

namespace quasipot {

struct ExprNode {
  enum class Kind { Lit, Var, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Lit;
  double lit = 0.0;
  int var = -1;
  Func fn = Func::Sin;
  std::shared_ptr<const ExprNode> a, b;
  int arity = 0;  // 1 + highest variable index, 0 when constant
};

namespace {

using Node = ExprNode;
using NodePtr = std::shared_ptr<const Node>;
using Kind = Node::Kind;

NodePtr make_lit(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Lit;
  n->lit = v;
  return n;
}

NodePtr make_var(int index) {
  if (index < 0) throw Error("Expr::variable: negative index");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Var;
  n->var = index;
  n->arity = index + 1;
  return n;
}

bool is_lit(const NodePtr& n, double v) { return n->kind == Kind::Lit && n->lit == v; }

NodePtr make_node(Kind kind, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->arity = std::max(a ? a->arity : 0, b ? b->arity : 0);
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr make_neg(const NodePtr& a) {
  if (a->kind == Kind::Lit) return make_lit(-a->lit);
  if (a->kind == Kind::Neg) return a->a;
  return make_node(Kind::Neg, a, nullptr);
}

NodePtr make_add(const NodePtr& a, const NodePtr& b) {
  if (a->kind == Kind::Lit && b->kind == Kind::Lit) return make_lit(a->lit + b->lit);
  if (is_lit(a, 0.0)) return b;
  if (is_lit(b, 0.0)) return a;
  return make_node(Kind::Add, a, b);
}

NodePtr make_sub(const NodePtr& a, const NodePtr& b) {
  if (a->kind == Kind::Lit && b->kind == Kind::Lit) return make_lit(a->lit - b->lit);
  if (is_lit(b, 0.0)) return a;
  if (is_lit(a, 0.0)) return make_neg(b);
  return make_node(Kind::Sub, a, b);
}

NodePtr make_mul(const NodePtr& a, const NodePtr& b) {
  if (a->kind == Kind::Lit && b->kind == Kind::Lit) return make_lit(a->lit * b->lit);
  if (is_lit(a, 0.0) || is_lit(b, 0.0)) return make_lit(0.0);
  if (is_lit(a, 1.0)) return b;
  if (is_lit(b, 1.0)) return a;
  return make_node(Kind::Mul, a, b);
}

NodePtr make_div(const NodePtr& a, const NodePtr& b) {
  if (b->kind == Kind::Lit) {
    if (b->lit == 0.0) throw DomainError("division by constant zero");
    if (a->kind == Kind::Lit) return make_lit(a->lit / b->lit);
    if (b->lit == 1.0) return a;
  }
  if (is_lit(a, 0.0)) return make_lit(0.0);
  return make_node(Kind::Div, a, b);
}

bool integral_exponent(double w, long long* k) {
  if (!std::isfinite(w) || std::abs(w) > 1e9) return false;
  const double r = std::nearbyint(w);
  if (r != w) return false;
  *k = static_cast<long long>(r);
  return true;
}

double pow_value(double u, double w) {
  long long k;
  if (integral_exponent(w, &k)) {
    if (u == 0.0 && k < 0) throw DomainError("zero raised to a negative power");
    return std::pow(u, w);
  }
  if (!(u > 0.0)) throw DomainError("non-integer power requires a positive base");
  return std::pow(u, w);
}

NodePtr make_pow(const NodePtr& a, const NodePtr& b) {
  if (b->kind == Kind::Lit) {
    if (b->lit == 1.0) return a;
    if (b->lit == 0.0) return make_lit(1.0);
    if (a->kind == Kind::Lit) return make_lit(pow_value(a->lit, b->lit));
  }
  return make_node(Kind::Pow, a, b);
}

const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sqrt: return "sqrt";
    case Func::Tanh: return "tanh";
    case Func::Abs: return "abs";
  }
  return "?";
}

double func_value(Func f, double u) {
  switch (f) {
    case Func::Sin: return std::sin(u);
    case Func::Cos: return std::cos(u);
    case Func::Exp: return std::exp(u);
    case Func::Log:
      if (!(u > 0.0)) throw DomainError("log of a nonpositive value");
      return std::log(u);
    case Func::Sqrt:
      if (u < 0.0) throw DomainError("sqrt of a negative value");
      return std::sqrt(u);
    case Func::Tanh: return std::tanh(u);
    case Func::Abs: return std::abs(u);
  }
  return 0.0;
}

NodePtr make_call(Func f, const NodePtr& a) {
  if (a->kind == Kind::Lit) return make_lit(func_value(f, a->lit));
  auto n = std::make_shared<Node>();
  n->kind = Kind::Call;
  n->fn = f;
  n->arity = a->arity;
  n->a = a;
  return n;
}

// ---------------------------------------------------------------------------
// Order-2 forward evaluation
// ---------------------------------------------------------------------------

struct D2 {
  double v = 0.0;
  Vec g;
  Mat h;
};

D2 d2_const(double v, Eigen::Index n) { return {v, Vec::Zero(n), Mat::Zero(n, n)}; }

// phi(u) with phi' and phi'' supplied by the caller.
D2 d2_chain(const D2& u, double v, double d1, double d2) {
  D2 r;
  r.v = v;
  r.g = d1 * u.g;
  r.h = d1 * u.h + d2 * (u.g * u.g.transpose());
  return r;
}

D2 d2_mul(const D2& a, const D2& b) {
  D2 r;
  r.v = a.v * b.v;
  r.g = a.v * b.g + b.v * a.g;
  r.h = a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose();
  return r;
}

D2 d2_div(const D2& a, const D2& b) {
  if (b.v == 0.0) throw DomainError("division by zero");
  D2 r;
  const double iv = 1.0 / b.v;
  r.v = a.v * iv;
  r.g = (a.g - r.v * b.g) * iv;
  r.h = a.h * iv - (a.g * b.g.transpose() + b.g * a.g.transpose()) * (iv * iv) -
        a.v * b.h * (iv * iv) + 2.0 * a.v * (b.g * b.g.transpose()) * (iv * iv * iv);
  return r;
}

D2 d2_func(Func f, const D2& u) {
  switch (f) {
    case Func::Sin: {
      const double s = std::sin(u.v), c = std::cos(u.v);
      return d2_chain(u, s, c, -s);
    }
    case Func::Cos: {
      const double s = std::sin(u.v), c = std::cos(u.v);
      return d2_chain(u, c, -s, -c);
    }
    case Func::Exp: {
      const double e = std::exp(u.v);
      return d2_chain(u, e, e, e);
    }
    case Func::Log: {
      if (!(u.v > 0.0)) throw DomainError("log of a nonpositive value");
      const double iv = 1.0 / u.v;
      return d2_chain(u, std::log(u.v), iv, -iv * iv);
    }
    case Func::Sqrt: {
      if (!(u.v > 0.0)) throw DomainError("sqrt derivative at a nonpositive value");
      const double s = std::sqrt(u.v);
      return d2_chain(u, s, 0.5 / s, -0.25 / (s * u.v));
    }
    case Func::Tanh: {
      const double t = std::tanh(u.v);
      const double d = 1.0 - t * t;
      return d2_chain(u, t, d, -2.0 * t * d);
    }
    case Func::Abs: {
      if (u.v == 0.0) throw DomainError("abs derivative at the kink");
      const double s = u.v > 0.0 ? 1.0 : -1.0;
      return d2_chain(u, std::abs(u.v), s, 0.0);
    }
  }
  throw Error("unreachable");
}

D2 d2_pow(const D2& u, const D2& w) {
  long long k;
  const bool const_exp = (w.g.lpNorm<Eigen::Infinity>() == 0.0);
  if (const_exp && integral_exponent(w.v, &k)) {
    if (k == 0) return d2_const(1.0, u.g.size());
    if (k == 1) return u;
    if (u.v == 0.0 && k < 0) throw DomainError("zero raised to a negative power");
    const double kd = static_cast<double>(k);
    double p2;  // u^(k-2), safe at u = 0 for k >= 2
    if (u.v == 0.0) {
      p2 = (k == 2) ? 1.0 : 0.0;
    } else {
      p2 = std::pow(u.v, kd - 2.0);
    }
    const double p1 = p2 * u.v;
    const double p0 = p1 * u.v;
    return d2_chain(u, p0, kd * p1, kd * (kd - 1.0) * p2);
  }
  // General exponent: u^w = exp(w log u), base must be positive.
  if (!(u.v > 0.0)) throw DomainError("non-integer power requires a positive base");
  return d2_func(Func::Exp, d2_mul(w, d2_func(Func::Log, u)));
}

D2 eval_d2(const Node* n, const Eigen::Ref<const Vec>& x) {
  const Eigen::Index dim = x.size();
  switch (n->kind) {
    case Kind::Lit: return d2_const(n->lit, dim);
    case Kind::Var: {
      if (n->var >= dim) throw DomainError("variable index beyond point dimension");
      D2 r = d2_const(x(n->var), dim);
      r.g(n->var) = 1.0;
      return r;
    }
    case Kind::Neg: {
      D2 r = eval_d2(n->a.get(), x);
      r.v = -r.v;
      r.g = -r.g;
      r.h = -r.h;
      return r;
    }
    case Kind::Add: {
      D2 a = eval_d2(n->a.get(), x), b = eval_d2(n->b.get(), x);
      a.v += b.v;
      a.g += b.g;
      a.h += b.h;
      return a;
    }
    case Kind::Sub: {
      D2 a = eval_d2(n->a.get(), x), b = eval_d2(n->b.get(), x);
      a.v -= b.v;
      a.g -= b.g;
      a.h -= b.h;
      return a;
    }
    case Kind::Mul: return d2_mul(eval_d2(n->a.get(), x), eval_d2(n->b.get(), x));
    case Kind::Div: return d2_div(eval_d2(n->a.get(), x), eval_d2(n->b.get(), x));
    case Kind::Pow: return d2_pow(eval_d2(n->a.get(), x), eval_d2(n->b.get(), x));
    case Kind::Call: return d2_func(n->fn, eval_d2(n->a.get(), x));
  }
  throw Error("unreachable");
}

double eval_value(const Node* n, const Eigen::Ref<const Vec>& x) {
  switch (n->kind) {
    case Kind::Lit: return n->lit;
    case Kind::Var:
      if (n->var >= x.size()) throw DomainError("variable index beyond point dimension");
      return x(n->var);
    case Kind::Neg: return -eval_value(n->a.get(), x);
    case Kind::Add: return eval_value(n->a.get(), x) + eval_value(n->b.get(), x);
    case Kind::Sub: return eval_value(n->a.get(), x) - eval_value(n->b.get(), x);
    case Kind::Mul: return eval_value(n->a.get(), x) * eval_value(n->b.get(), x);
    case Kind::Div: {
      const double b = eval_value(n->b.get(), x);
      if (b == 0.0) throw DomainError("division by zero");
      return eval_value(n->a.get(), x) / b;
    }
    case Kind::Pow: return pow_value(eval_value(n->a.get(), x), eval_value(n->b.get(), x));
    case Kind::Call: return func_value(n->fn, eval_value(n->a.get(), x));
  }
  throw Error("unreachable");
}

// ---------------------------------------------------------------------------
// Symbolic differentiation
// ---------------------------------------------------------------------------

NodePtr diff(const NodePtr& n, int var) {
  switch (n->kind) {
    case Kind::Lit: return make_lit(0.0);
    case Kind::Var: return make_lit(n->var == var ? 1.0 : 0.0);
    case Kind::Neg: return make_neg(diff(n->a, var));
    case Kind::Add: return make_add(diff(n->a, var), diff(n->b, var));
    case Kind::Sub: return make_sub(diff(n->a, var), diff(n->b, var));
    case Kind::Mul:
      return make_add(make_mul(diff(n->a, var), n->b), make_mul(n->a, diff(n->b, var)));
    case Kind::Div:
      // (a'b - ab') / b^2
      return make_div(make_sub(make_mul(diff(n->a, var), n->b), make_mul(n->a, diff(n->b, var))),
                      make_mul(n->b, n->b));
    case Kind::Pow: {
      long long k;
      if (n->b->kind == Kind::Lit && integral_exponent(n->b->lit, &k)) {
        // k u^(k-1) u'
        return make_mul(make_mul(make_lit(n->b->lit), make_pow(n->a, make_lit(n->b->lit - 1.0))),
                        diff(n->a, var));
      }
      // u^w (w' log u + w u'/u)
      auto term = make_add(make_mul(diff(n->b, var), make_call(Func::Log, n->a)),
                           make_mul(n->b, make_div(diff(n->a, var), n->a)));
      return make_mul(make_pow(n->a, n->b), term);
    }
    case Kind::Call: {
      const NodePtr du = diff(n->a, var);
      switch (n->fn) {
        case Func::Sin: return make_mul(make_call(Func::Cos, n->a), du);
        case Func::Cos: return make_neg(make_mul(make_call(Func::Sin, n->a), du));
        case Func::Exp: return make_mul(make_call(Func::Exp, n->a), du);
        case Func::Log: return make_div(du, n->a);
        case Func::Sqrt:
          return make_div(du, make_mul(make_lit(2.0), make_call(Func::Sqrt, n->a)));
        case Func::Tanh: {
          auto t = make_call(Func::Tanh, n->a);
          return make_mul(make_sub(make_lit(1.0), make_mul(t, t)), du);
        }
        case Func::Abs:
          // abs(u)/u * u'; undefined at u = 0, which surfaces as a DomainError.
          return make_mul(make_div(make_call(Func::Abs, n->a), n->a), du);
      }
      throw Error("unreachable");
    }
  }
  throw Error("unreachable");
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int prec_of(const Node* n) {
  switch (n->kind) {
    case Kind::Add:
    case Kind::Sub: return 1;
    case Kind::Mul:
    case Kind::Div: return 2;
    case Kind::Neg: return 3;
    case Kind::Pow: return 4;
    case Kind::Lit: return n->lit < 0.0 ? 3 : 5;
    case Kind::Var:
    case Kind::Call: return 5;
  }
  return 5;
}

void print_node(const Node* n, std::string& out, int min_prec) {
  const int p = prec_of(n);
  const bool parens = p < min_prec;
  if (parens) out += '(';
  switch (n->kind) {
    case Kind::Lit: out += format_double(n->lit); break;
    case Kind::Var:
      out += 'x';
      out += std::to_string(n->var + 1);
      break;
    case Kind::Neg:
      out += '-';
      print_node(n->a.get(), out, 3);
      break;
    case Kind::Add:
      print_node(n->a.get(), out, 1);
      out += " + ";
      print_node(n->b.get(), out, 2);
      break;
    case Kind::Sub:
      print_node(n->a.get(), out, 1);
      out += " - ";
      print_node(n->b.get(), out, 2);
      break;
    case Kind::Mul:
      print_node(n->a.get(), out, 2);
      out += '*';
      print_node(n->b.get(), out, 3);
      break;
    case Kind::Div:
      print_node(n->a.get(), out, 2);
      out += '/';
      print_node(n->b.get(), out, 3);
      break;
    case Kind::Pow:
      print_node(n->a.get(), out, 5);
      out += '^';
      print_node(n->b.get(), out, 3);
      break;
    case Kind::Call:
      out += func_name(n->fn);
      out += '(';
      print_node(n->a.get(), out, 0);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

class Parser {
 public:
  Parser(std::string_view src, int n, const std::map<std::string, double>& params)
      : src_(src), n_(n), params_(params) {}

  NodePtr run() {
    NodePtr e = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  NodePtr parse_sum() {
    NodePtr e = parse_term();
    for (;;) {
      skip_ws();
      if (accept('+')) {
        e = make_add(e, parse_term());
      } else if (accept('-')) {
        e = make_sub(e, parse_term());
      } else {
        return e;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr e = parse_factor();
    for (;;) {
      skip_ws();
      if (accept('*')) {
        e = make_mul(e, parse_factor());
      } else if (accept('/')) {
        e = make_div(e, parse_factor());
      } else {
        return e;
      }
    }
  }

  NodePtr parse_factor() {
    skip_ws();
    if (accept('-')) return make_neg(parse_factor());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    skip_ws();
    if (accept('^')) return make_pow(base, parse_factor());  // right-associative
    return base;
  }

  NodePtr parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("expected operand", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_sum();
      skip_ws();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const char* begin = src_.data() + pos_;
    const char* end = src_.data() + src_.size();
    double value = 0.0;
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr == begin) throw ParseError("malformed number", pos_);
    pos_ = static_cast<std::size_t>(res.ptr - src_.data());
    return make_lit(value);
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(src_.substr(start, pos_ - start));

    // Function application.
    static const std::map<std::string, Func, std::less<>> kFuncs = {
        {"sin", Func::Sin}, {"cos", Func::Cos},   {"exp", Func::Exp}, {"log", Func::Log},
        {"sqrt", Func::Sqrt}, {"tanh", Func::Tanh}, {"abs", Func::Abs}};
    if (auto it = kFuncs.find(name); it != kFuncs.end()) {
      skip_ws();
      if (!accept('(')) throw ParseError("expected '(' after function name", pos_);
      NodePtr arg = parse_sum();
      skip_ws();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return make_call(it->second, arg);
    }

    // State variable x1..xn.
    if (name.size() >= 2 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(),
                    [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
      const long idx = std::strtol(name.c_str() + 1, nullptr, 10);
      if (idx < 1 || idx > n_) {
        throw UnknownIdentifier("variable " + name + " outside dimension " + std::to_string(n_),
                                start);
      }
      return make_var(static_cast<int>(idx - 1));
    }

    // Named parameter, bound to a literal.
    if (auto it = params_.find(name); it != params_.end()) return make_lit(it->second);
    throw UnknownIdentifier("unknown identifier '" + name + "'", start);
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int n_;
  const std::map<std::string, double>& params_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Expr public surface
// ---------------------------------------------------------------------------

Expr::Expr() : node_(make_lit(0.0)) {}
Expr Expr::literal(double v) { return Expr(make_lit(v)); }
Expr Expr::variable(int index) { return Expr(make_var(index)); }
Expr Expr::apply(Func f, const Expr& a) { return Expr(make_call(f, a.node_)); }

Expr operator-(const Expr& a) { return Expr(make_neg(a.node_)); }
Expr operator+(const Expr& a, const Expr& b) { return Expr(make_add(a.node_, b.node_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(make_sub(a.node_, b.node_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(make_mul(a.node_, b.node_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(make_div(a.node_, b.node_)); }
Expr pow(const Expr& base, const Expr& exponent) {
  return Expr(make_pow(base.node_, exponent.node_));
}

bool Expr::is_literal() const { return node_->kind == Kind::Lit; }
double Expr::literal_value() const { return node_->lit; }
bool Expr::is_constant() const { return node_->arity == 0; }
int Expr::arity() const { return node_->arity; }

bool Expr::depends_on(int var) const {
  // arity bounds the highest index but not which ones occur; walk the tree.
  std::vector<const Node*> stack = {node_.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->kind == Kind::Var && n->var == var) return true;
    if (n->a) stack.push_back(n->a.get());
    if (n->b) stack.push_back(n->b.get());
  }
  return false;
}

Expr parse(std::string_view source, int n, const std::map<std::string, double>& params) {
  if (source.empty()) throw ParseError("empty expression", 0);
  Parser p(source, n, params);
  return Expr(p.run());
}

EvalResult evaluate(const Expr& e, const Eigen::Ref<const Vec>& x) {
  D2 r = eval_d2(e.node_.get(), x);
  EvalResult out;
  out.value = r.v;
  out.gradient = std::move(r.g);
  out.hessian = 0.5 * (r.h + r.h.transpose());  // exact symmetry
  if (!std::isfinite(out.value) || !out.gradient.allFinite() || !out.hessian.allFinite()) {
    throw DomainError("non-finite value or derivative");
  }
  return out;
}

double evaluate_value(const Expr& e, const Eigen::Ref<const Vec>& x) {
  return eval_value(e.node_.get(), x);
}

Expr differentiate(const Expr& e, int var) { return Expr(diff(e.node_, var)); }

std::string to_string(const Expr& e) {
  std::string out;
  print_node(e.node_.get(), out, 0);
  return out;
}

}  // namespace quasipot
