#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "altkin/dual.hpp"
#include "altkin/matrix.hpp"

namespace altkin {

/// A point (t, x, xdot) in extended phase space.
struct EvalPoint {
  double t = 0.0;
  Vec x;
  Vec xdot;
};

enum class VarKind { Time, Position, Velocity };

/// One of the variables t, x_i, xdot_i. Indices are 0-based in code; the
/// expression language and all file formats are 1-based.
struct Var {
  VarKind kind = VarKind::Time;
  int index = 0;
  bool operator==(const Var&) const = default;

  static Var time() { return {VarKind::Time, 0}; }
  static Var x(int index0) { return {VarKind::Position, index0}; }
  static Var xdot(int index0) { return {VarKind::Velocity, index0}; }
};

struct ParseError : std::runtime_error {
  size_t position;
  ParseError(const std::string& msg, size_t pos)
      : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

enum class Op { Const, Variable, Neg, Sin, Cos, Tan, Exp, Log, Sqrt, Add, Sub, Mul, Div, Pow };

struct Node {
  Op op = Op::Const;
  double value = 0.0;  // Const
  Var var;             // Variable
  std::shared_ptr<const Node> a, b;
  // Pow with a constant integral exponent is evaluated by repeated
  // multiplication; cached here so eval does not re-inspect the tree.
  bool int_exp = false;
  long long int_exp_value = 0;
};

using NodePtr = std::shared_ptr<const Node>;

inline NodePtr make_const(double v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = v;
  return n;
}

inline NodePtr make_var(Var v) {
  auto n = std::make_shared<Node>();
  n->op = Op::Variable;
  n->var = v;
  return n;
}

inline NodePtr make_unary(Op op, NodePtr a) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  return n;
}

inline NodePtr make_binary(Op op, NodePtr a, NodePtr b) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  if (op == Op::Pow && n->b->op == Op::Const) {
    const double e = n->b->value;
    if (e == std::floor(e) && std::abs(e) <= 1e9) {
      n->int_exp = true;
      n->int_exp_value = static_cast<long long>(e);
    }
  }
  return n;
}

template <class T>
T eval_node(const Node& nd, const T& t, std::span<const T> x, std::span<const T> xdot) {
  switch (nd.op) {
    case Op::Const:
      return T(nd.value);
    case Op::Variable:
      switch (nd.var.kind) {
        case VarKind::Time: return t;
        case VarKind::Position: return x[nd.var.index];
        case VarKind::Velocity: return xdot[nd.var.index];
      }
      break;
    case Op::Neg:
      return -eval_node(*nd.a, t, x, xdot);
    case Op::Sin:
      return sin(eval_node(*nd.a, t, x, xdot));
    case Op::Cos:
      return cos(eval_node(*nd.a, t, x, xdot));
    case Op::Tan:
      return tan(eval_node(*nd.a, t, x, xdot));
    case Op::Exp:
      return exp(eval_node(*nd.a, t, x, xdot));
    case Op::Log: {
      T a = eval_node(*nd.a, t, x, xdot);
      if (!(real_part(a) > 0.0)) throw EvalError("log of non-positive argument");
      return log(a);
    }
    case Op::Sqrt: {
      T a = eval_node(*nd.a, t, x, xdot);
      if (real_part(a) < 0.0) throw EvalError("sqrt of negative argument");
      return sqrt(a);
    }
    case Op::Add:
      return eval_node(*nd.a, t, x, xdot) + eval_node(*nd.b, t, x, xdot);
    case Op::Sub:
      return eval_node(*nd.a, t, x, xdot) - eval_node(*nd.b, t, x, xdot);
    case Op::Mul:
      return eval_node(*nd.a, t, x, xdot) * eval_node(*nd.b, t, x, xdot);
    case Op::Div: {
      T b = eval_node(*nd.b, t, x, xdot);
      if (real_part(b) == 0.0) throw EvalError("division by zero");
      return eval_node(*nd.a, t, x, xdot) / b;
    }
    case Op::Pow: {
      T a = eval_node(*nd.a, t, x, xdot);
      if (nd.int_exp) {
        if (nd.int_exp_value < 0 && real_part(a) == 0.0)
          throw EvalError("zero base with negative exponent");
        return powi(a, nd.int_exp_value);
      }
      if (!(real_part(a) > 0.0))
        throw EvalError("pow with non-integer exponent needs a positive base");
      return pow_general(a, eval_node(*nd.b, t, x, xdot));
    }
  }
  throw EvalError("corrupt expression node");
}

}  // namespace detail

/// Immutable parsed expression over (t, x_1..x_n, xdot_1..xdot_n).
///
/// Grammar:  expr := term (('+'|'-') term)*; term := factor (('*'|'/') factor)*;
/// factor := base ('^' factor)?; base := '-' base | number | ident | '(' expr ')'
/// | func '(' expr ')'; ident := t | x<k> | xdot<k>; func in {sin,cos,tan,exp,
/// log,sqrt,neg}. A leading '-' on a numeric literal folds into the literal.
///
/// First and second derivatives come from dual / hyper-dual evaluation of the
/// tree, so they are exact up to floating point.
class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view text, int dim);

  static Expression constant(double v) { return Expression(detail::make_const(v), 0); }
  static Expression time(int dim) { return Expression(detail::make_var(Var::time()), dim); }
  /// index1 is 1-based, matching the x<k> notation of the language.
  static Expression position(int index1, int dim) {
    require_index(index1, dim);
    return Expression(detail::make_var(Var::x(index1 - 1)), dim);
  }
  static Expression velocity(int index1, int dim) {
    require_index(index1, dim);
    return Expression(detail::make_var(Var::xdot(index1 - 1)), dim);
  }

  bool valid() const { return root_ != nullptr; }
  int dim() const { return dim_; }

  double eval(const EvalPoint& p) const {
    check_point(p);
    const double r = detail::eval_node<double>(*root_, p.t, p.x, p.xdot);
    if (!std::isfinite(r)) throw EvalError("non-finite result");
    return r;
  }

  /// First partial derivative with respect to w.
  double deriv(const EvalPoint& p, Var w) const {
    check_point(p);
    std::vector<D1> x(p.x.size()), xd(p.xdot.size());
    for (size_t i = 0; i < p.x.size(); ++i)
      x[i] = D1(p.x[i], w == Var::x(static_cast<int>(i)) ? 1.0 : 0.0);
    for (size_t i = 0; i < p.xdot.size(); ++i)
      xd[i] = D1(p.xdot[i], w == Var::xdot(static_cast<int>(i)) ? 1.0 : 0.0);
    const D1 t(p.t, w == Var::time() ? 1.0 : 0.0);
    const D1 r = detail::eval_node<D1>(*root_, t, std::span<const D1>(x), std::span<const D1>(xd));
    if (!std::isfinite(r.d)) throw EvalError("non-finite derivative");
    return r.d;
  }

  /// Mixed second partial derivative with respect to (w1, w2); one hyper-dual
  /// evaluation per pair.
  double deriv2(const EvalPoint& p, Var w1, Var w2) const {
    check_point(p);
    auto seed = [&](double v, Var self) {
      return D2(D1(v, self == w1 ? 1.0 : 0.0), D1(self == w2 ? 1.0 : 0.0, 0.0));
    };
    std::vector<D2> x(p.x.size()), xd(p.xdot.size());
    for (size_t i = 0; i < p.x.size(); ++i) x[i] = seed(p.x[i], Var::x(static_cast<int>(i)));
    for (size_t i = 0; i < p.xdot.size(); ++i)
      xd[i] = seed(p.xdot[i], Var::xdot(static_cast<int>(i)));
    const D2 t = seed(p.t, Var::time());
    const D2 r = detail::eval_node<D2>(*root_, t, std::span<const D2>(x), std::span<const D2>(xd));
    if (!std::isfinite(r.d.d)) throw EvalError("non-finite derivative");
    return r.d.d;
  }

  /// Generic evaluation with caller-supplied scalar type (double or any
  /// nesting of Dual). Used to differentiate through composite evaluators.
  template <class T>
  T eval_scalar(const T& t, std::span<const T> x, std::span<const T> xdot) const {
    return detail::eval_node<T>(*root_, t, x, xdot);
  }
  template <class T>
  T eval_scalar(const T& t, std::span<const T> x) const {
    return detail::eval_node<T>(*root_, t, x, std::span<const T>{});
  }

  std::string str() const { return print(*root_, 0, false); }

  bool structurally_equal(const Expression& o) const { return equal(root_.get(), o.root_.get()); }

  bool uses_velocity() const { return uses_kind(*root_, VarKind::Velocity); }
  bool uses_position() const { return uses_kind(*root_, VarKind::Position); }

  friend Expression operator+(const Expression& a, const Expression& b) {
    return Expression::combine(detail::Op::Add, a, b);
  }
  friend Expression operator-(const Expression& a, const Expression& b) {
    return Expression::combine(detail::Op::Sub, a, b);
  }
  friend Expression operator*(const Expression& a, const Expression& b) {
    return Expression::combine(detail::Op::Mul, a, b);
  }
  friend Expression operator/(const Expression& a, const Expression& b) {
    return Expression::combine(detail::Op::Div, a, b);
  }
  friend Expression pow(const Expression& a, const Expression& b) {
    return Expression::combine(detail::Op::Pow, a, b);
  }
  friend Expression pow(const Expression& a, double e) {
    return pow(a, Expression::constant(e));
  }
  friend Expression sin(const Expression& a) { return a.unary(detail::Op::Sin); }
  friend Expression cos(const Expression& a) { return a.unary(detail::Op::Cos); }
  friend Expression tan(const Expression& a) { return a.unary(detail::Op::Tan); }
  friend Expression exp(const Expression& a) { return a.unary(detail::Op::Exp); }
  friend Expression log(const Expression& a) { return a.unary(detail::Op::Log); }
  friend Expression sqrt(const Expression& a) { return a.unary(detail::Op::Sqrt); }
  friend Expression neg(const Expression& a) { return a.unary(detail::Op::Neg); }

 private:
  Expression(detail::NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {}

  static void require_index(int index1, int dim) {
    if (index1 < 1 || index1 > dim)
      throw ParseError("variable index out of range (n=" + std::to_string(dim) + ")", 0);
  }

  void check_point(const EvalPoint& p) const {
    if (!root_) throw EvalError("empty expression");
    const int used = max_index_used(*root_);
    if (static_cast<int>(p.x.size()) < used || static_cast<int>(p.xdot.size()) < used)
      throw EvalError("evaluation point has fewer coordinates than the expression uses");
  }

  static int max_index_used(const detail::Node& n) {
    if (n.op == detail::Op::Variable)
      return n.var.kind == VarKind::Time ? 0 : n.var.index + 1;
    int m = 0;
    if (n.a) m = std::max(m, max_index_used(*n.a));
    if (n.b) m = std::max(m, max_index_used(*n.b));
    return m;
  }

  static Expression combine(detail::Op op, const Expression& a, const Expression& b) {
    return Expression(detail::make_binary(op, a.root_, b.root_), std::max(a.dim_, b.dim_));
  }
  Expression unary(detail::Op op) const { return Expression(detail::make_unary(op, root_), dim_); }

  static bool uses_kind(const detail::Node& n, VarKind k) {
    if (n.op == detail::Op::Variable) return n.var.kind == k;
    if (n.a && uses_kind(*n.a, k)) return true;
    if (n.b && uses_kind(*n.b, k)) return true;
    return false;
  }

  static bool equal(const detail::Node* a, const detail::Node* b) {
    if (a == b) return true;
    if (!a || !b || a->op != b->op) return false;
    switch (a->op) {
      case detail::Op::Const: return a->value == b->value;
      case detail::Op::Variable: return a->var == b->var;
      default: break;
    }
    return equal(a->a.get(), b->a.get()) && equal(a->b.get(), b->b.get());
  }

  static std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  static int precedence(detail::Op op) {
    switch (op) {
      case detail::Op::Add:
      case detail::Op::Sub: return 1;
      case detail::Op::Mul:
      case detail::Op::Div: return 2;
      case detail::Op::Pow: return 3;
      default: return 4;
    }
  }

  // min_prec: parenthesize when this node binds weaker than the context.
  static std::string print(const detail::Node& n, int min_prec, bool strict) {
    using detail::Op;
    const int prec = precedence(n.op);
    const bool parens = prec < min_prec || (strict && prec == min_prec);
    std::string s;
    switch (n.op) {
      case Op::Const:
        s = format_number(n.value);
        break;
      case Op::Variable:
        switch (n.var.kind) {
          case VarKind::Time: s = "t"; break;
          case VarKind::Position: s = "x" + std::to_string(n.var.index + 1); break;
          case VarKind::Velocity: s = "xdot" + std::to_string(n.var.index + 1); break;
        }
        break;
      case Op::Neg: s = "neg(" + print(*n.a, 0, false) + ")"; break;
      case Op::Sin: s = "sin(" + print(*n.a, 0, false) + ")"; break;
      case Op::Cos: s = "cos(" + print(*n.a, 0, false) + ")"; break;
      case Op::Tan: s = "tan(" + print(*n.a, 0, false) + ")"; break;
      case Op::Exp: s = "exp(" + print(*n.a, 0, false) + ")"; break;
      case Op::Log: s = "log(" + print(*n.a, 0, false) + ")"; break;
      case Op::Sqrt: s = "sqrt(" + print(*n.a, 0, false) + ")"; break;
      case Op::Add: s = print(*n.a, 1, false) + " + " + print(*n.b, 1, true); break;
      case Op::Sub: s = print(*n.a, 1, false) + " - " + print(*n.b, 1, true); break;
      case Op::Mul: s = print(*n.a, 2, false) + " * " + print(*n.b, 2, true); break;
      case Op::Div: s = print(*n.a, 2, false) + " / " + print(*n.b, 2, true); break;
      case Op::Pow: s = print(*n.a, 3, true) + "^" + print(*n.b, 3, false); break;
    }
    if (parens && prec != 4) return "(" + s + ")";
    return s;
  }

  detail::NodePtr root_;
  int dim_ = 0;
};

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, int dim) : text_(text), dim_(dim) {}

  NodePtr run() {
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr parse_expr() {
    NodePtr e = parse_term();
    for (;;) {
      if (eat('+')) e = make_binary(Op::Add, e, parse_term());
      else if (eat('-')) e = make_binary(Op::Sub, e, parse_term());
      else return e;
    }
  }

  NodePtr parse_term() {
    NodePtr e = parse_factor();
    for (;;) {
      if (eat('*')) e = make_binary(Op::Mul, e, parse_factor());
      else if (eat('/')) e = make_binary(Op::Div, e, parse_factor());
      else return e;
    }
  }

  NodePtr parse_factor() {
    NodePtr base = parse_base();
    if (eat('^')) return make_binary(Op::Pow, base, parse_factor());
    return base;
  }

  NodePtr parse_base() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '-') {
      ++pos_;
      skip_ws();
      if (pos_ < text_.size() &&
          (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
        NodePtr num = parse_number();
        return make_const(-num->value);
      }
      return make_unary(Op::Neg, parse_base());
    }
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr parse_number() {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double v = 0.0;
    auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{}) throw ParseError("invalid number", pos_);
    pos_ = static_cast<size_t>(res.ptr - text_.data());
    return make_const(v);
  }

  NodePtr parse_ident() {
    const size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    std::string word(text_.substr(start, pos_ - start));

    if (word == "sin" || word == "cos" || word == "tan" || word == "exp" || word == "log" ||
        word == "sqrt" || word == "neg") {
      if (!eat('(')) throw ParseError("expected '(' after function name", pos_);
      NodePtr arg = parse_expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      Op op = word == "sin"   ? Op::Sin
              : word == "cos" ? Op::Cos
              : word == "tan" ? Op::Tan
              : word == "exp" ? Op::Exp
              : word == "log" ? Op::Log
              : word == "sqrt" ? Op::Sqrt
                               : Op::Neg;
      return make_unary(op, arg);
    }

    if (word == "t" && !(pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))))
      return make_var(Var::time());

    if (word == "x" || word == "xdot") {
      const size_t idx_start = pos_;
      long long idx = 0;
      bool any = false;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        idx = idx * 10 + (text_[pos_] - '0');
        ++pos_;
        any = true;
      }
      if (!any) throw ParseError("expected index after '" + word + "'", idx_start);
      if (idx < 1 || idx > dim_)
        throw ParseError("variable index out of range (n=" + std::to_string(dim_) + ")", idx_start);
      Var v = word == "x" ? Var::x(static_cast<int>(idx - 1)) : Var::xdot(static_cast<int>(idx - 1));
      return make_var(v);
    }

    throw ParseError("unknown identifier '" + word + "'", start);
  }

  std::string_view text_;
  int dim_;
  size_t pos_ = 0;
};

}  // namespace detail

inline Expression Expression::parse(std::string_view text, int dim) {
  if (dim < 1) throw ParseError("dimension must be >= 1", 0);
  detail::Parser p(text, dim);
  return Expression(p.run(), dim);
}

}  // namespace altkin
