#ifndef HVF_EXPR_HPP
#define HVF_EXPR_HPP

#include "rational.hpp"

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hvf {

struct Error : std::runtime_error {
  enum class Code { Parse, Config, Numeric, Precondition, Internal };
  Error(Code c, const std::string& msg) : std::runtime_error(msg), code(c) {}
  Code code;
};

struct ParseError : Error {
  ParseError(std::size_t off, const std::string& msg)
      : Error(Code::Parse, msg + " (offset " + std::to_string(off) + ")"), offset(off) {}
  std::size_t offset;
};

struct EvalError : Error {
  explicit EvalError(const std::string& msg) : Error(Code::Numeric, msg) {}
};

enum class ExprKind : std::uint8_t {
  Constant,  // exact rational
  Variable,  // 0-based index
  Sum,
  Product,
  IntPow,
  Sin,
  Cos,
  Exp,
  AbsPow,  // |base|^beta
  SgnPow,  // sign(base)*|base|^beta; produced by differentiation only
};

// Immutable expression tree with exact rational constants. Sharing subtrees is
// safe; all operations build new nodes.
class Expr {
 public:
  Expr() : Expr(constant(0)) {}

  static Expr constant(Rational c);
  static Expr constant(long c) { return constant(Rational(c)); }
  static Expr variable(int index);
  static Expr sum(std::vector<Expr> children);
  static Expr product(std::vector<Expr> children);
  static Expr int_pow(Expr base, long n);
  static Expr sin(Expr e);
  static Expr cos(Expr e);
  static Expr exp(Expr e);
  static Expr abs_pow(Expr base, Rational beta);
  static Expr sgn_pow(Expr base, Rational beta);

  ExprKind kind() const { return node_->kind; }
  const Rational& constant_value() const { return node_->value; }
  int var_index() const { return node_->var; }
  long int_exponent() const { return node_->ipow; }
  const Rational& exponent() const { return node_->value; }  // AbsPow/SgnPow
  const std::vector<Expr>& children() const { return node_->children; }

  bool is_constant() const { return kind() == ExprKind::Constant; }
  bool is_zero() const { return is_constant() && constant_value() == 0; }
  bool is_one() const { return is_constant() && constant_value() == 1; }

  bool same_tree(const Expr& o) const;

  friend Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }
  friend Expr operator-(const Expr& a);

 private:
  struct Node {
    ExprKind kind;
    Rational value;  // Constant payload, or AbsPow/SgnPow exponent
    int var = -1;
    long ipow = 0;
    std::vector<Expr> children;
  };
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  static Expr make(Node n) { return Expr(std::make_shared<const Node>(std::move(n))); }
  std::shared_ptr<const Node> node_;
};

Expr differentiate(const Expr& e, int var);

// Throws EvalError when the value is not finite (overflow, |0|^beta with beta<0).
double evaluate(const Expr& e, std::span<const double> x);

// Exact evaluation; nullopt when the tree contains transcendental nodes or
// non-integer Hölder exponents.
std::optional<Rational> evaluate_exact(const Expr& e, std::span<const Rational> x);

// Replace variable i by replacement[i] (identity for indices past the vector).
Expr substitute(const Expr& e, const std::vector<Expr>& replacement);

int max_var_index(const Expr& e);  // -1 when no variables
bool has_holder_nodes(const Expr& e);

// Grammar (see README): expr := term (('+'|'-') term)*; term := factor ('*' factor)*;
// factor := atom ('^' number)?; atom := number | var | '(' expr ')' | func '(' expr ')'.
// Variables are x1..xp and, for lifted systems, t1..tm (indices p..p+m-1); pass
// base_dim >= 0 to enable the t names.
Expr parse_expr(std::string_view src, int base_dim = -1);
std::string print_expr(const Expr& e, int base_dim = -1);

// Postfix program for fast repeated evaluation of one expression.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  explicit CompiledExpr(const Expr& e);
  double eval(const double* x) const;  // caller guarantees enough variables
  int max_var() const { return max_var_; }

 private:
  enum class Op : std::uint8_t {
    PushConst, PushVar, AddN, MulN, PowInt, Sin, Cos, Exp, AbsPow, SgnPow, Negate
  };
  struct Instr {
    Op op;
    int arg = 0;
    double c = 0.0;
  };
  std::vector<Instr> code_;
  int max_var_ = -1;
  mutable std::vector<double> stack_;
};

}  // namespace hvf

#endif
