#include "expr.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace hvf {

namespace {

bool is_odd(const Rational& r) {
  return denominator(r) == 1 && numerator(r) % 2 != 0;
}
bool is_even(const Rational& r) {
  return denominator(r) == 1 && numerator(r) % 2 == 0;
}
bool is_integer(const Rational& r) { return denominator(r) == 1; }

}  // namespace

Expr Expr::constant(Rational c) {
  Node n;
  n.kind = ExprKind::Constant;
  n.value = std::move(c);
  return make(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0) throw Error(Error::Code::Internal, "negative variable index");
  Node n;
  n.kind = ExprKind::Variable;
  n.var = index;
  return make(std::move(n));
}

Expr Expr::sum(std::vector<Expr> children) {
  std::vector<Expr> flat;
  Rational c = 0;
  for (auto& ch : children) {
    if (ch.kind() == ExprKind::Sum) {
      for (const auto& g : ch.children()) {
        if (g.is_constant()) c += g.constant_value();
        else flat.push_back(g);
      }
    } else if (ch.is_constant()) {
      c += ch.constant_value();
    } else {
      flat.push_back(std::move(ch));
    }
  }
  if (c != 0) flat.push_back(constant(c));
  if (flat.empty()) return constant(0);
  if (flat.size() == 1) return flat[0];
  Node n;
  n.kind = ExprKind::Sum;
  n.children = std::move(flat);
  return make(std::move(n));
}

Expr Expr::product(std::vector<Expr> children) {
  std::vector<Expr> flat;
  Rational c = 1;
  for (auto& ch : children) {
    if (ch.kind() == ExprKind::Product) {
      for (const auto& g : ch.children()) {
        if (g.is_constant()) c *= g.constant_value();
        else flat.push_back(g);
      }
    } else if (ch.is_constant()) {
      c *= ch.constant_value();
    } else {
      flat.push_back(std::move(ch));
    }
  }
  if (c == 0) return constant(0);
  if (flat.empty()) return constant(c);
  if (c != 1) flat.insert(flat.begin(), constant(c));
  if (flat.size() == 1) return flat[0];
  Node n;
  n.kind = ExprKind::Product;
  n.children = std::move(flat);
  return make(std::move(n));
}

Expr Expr::int_pow(Expr base, long n) {
  if (n < 0) throw Error(Error::Code::Internal, "negative integer power");
  if (n == 0) return constant(1);
  if (n == 1) return base;
  if (base.is_constant()) {
    Rational r = 1;
    for (long i = 0; i < n; ++i) r *= base.constant_value();
    return constant(r);
  }
  Node node;
  node.kind = ExprKind::IntPow;
  node.ipow = n;
  node.children = {std::move(base)};
  return make(std::move(node));
}

Expr Expr::sin(Expr e) {
  if (e.is_zero()) return constant(0);
  Node n;
  n.kind = ExprKind::Sin;
  n.children = {std::move(e)};
  return make(std::move(n));
}

Expr Expr::cos(Expr e) {
  if (e.is_zero()) return constant(1);
  Node n;
  n.kind = ExprKind::Cos;
  n.children = {std::move(e)};
  return make(std::move(n));
}

Expr Expr::exp(Expr e) {
  if (e.is_zero()) return constant(1);
  Node n;
  n.kind = ExprKind::Exp;
  n.children = {std::move(e)};
  return make(std::move(n));
}

Expr Expr::abs_pow(Expr base, Rational beta) {
  // |e|^(2k) is the polynomial e^(2k); keep that form so exact paths stay exact.
  if (is_even(beta) && beta > 0) return int_pow(std::move(base), static_cast<long>(numerator(beta)));
  if (base.is_constant()) {
    if (base.constant_value() == 0) {
      if (beta > 0) return constant(0);
      throw EvalError("abs-power of zero base with non-positive exponent");
    }
    if (is_integer(beta) && beta > 0) {
      Rational v = abs(base.constant_value());
      Rational r = 1;
      for (BigInt i = 0; i < numerator(beta); ++i) r *= v;
      return constant(r);
    }
  }
  Node n;
  n.kind = ExprKind::AbsPow;
  n.value = std::move(beta);
  n.children = {std::move(base)};
  return make(std::move(n));
}

Expr Expr::sgn_pow(Expr base, Rational beta) {
  // sign(e)|e|^(2k+1) = e^(2k+1).
  if (is_odd(beta) && beta > 0) return int_pow(std::move(base), static_cast<long>(numerator(beta)));
  Node n;
  n.kind = ExprKind::SgnPow;
  n.value = std::move(beta);
  n.children = {std::move(base)};
  return make(std::move(n));
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.constant_value());
  return Expr::product({Expr::constant(-1), a});
}

Expr operator-(const Expr& a, const Expr& b) { return Expr::sum({a, -b}); }

bool Expr::same_tree(const Expr& o) const {
  if (node_ == o.node_) return true;
  if (kind() != o.kind()) return false;
  switch (kind()) {
    case ExprKind::Constant: return constant_value() == o.constant_value();
    case ExprKind::Variable: return var_index() == o.var_index();
    case ExprKind::IntPow:
      if (int_exponent() != o.int_exponent()) return false;
      break;
    case ExprKind::AbsPow:
    case ExprKind::SgnPow:
      if (exponent() != o.exponent()) return false;
      break;
    default: break;
  }
  const auto& a = children();
  const auto& b = o.children();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_tree(b[i])) return false;
  return true;
}

Expr differentiate(const Expr& e, int var) {
  switch (e.kind()) {
    case ExprKind::Constant: return Expr::constant(0);
    case ExprKind::Variable: return Expr::constant(e.var_index() == var ? 1 : 0);
    case ExprKind::Sum: {
      std::vector<Expr> d;
      d.reserve(e.children().size());
      for (const auto& ch : e.children()) d.push_back(differentiate(ch, var));
      return Expr::sum(std::move(d));
    }
    case ExprKind::Product: {
      std::vector<Expr> terms;
      const auto& ch = e.children();
      for (std::size_t i = 0; i < ch.size(); ++i) {
        Expr di = differentiate(ch[i], var);
        if (di.is_zero()) continue;
        std::vector<Expr> factors;
        factors.reserve(ch.size());
        for (std::size_t j = 0; j < ch.size(); ++j) factors.push_back(j == i ? di : ch[j]);
        terms.push_back(Expr::product(std::move(factors)));
      }
      return Expr::sum(std::move(terms));
    }
    case ExprKind::IntPow: {
      const Expr& b = e.children()[0];
      Expr db = differentiate(b, var);
      if (db.is_zero()) return Expr::constant(0);
      return Expr::product({Expr::constant(e.int_exponent()),
                            Expr::int_pow(b, e.int_exponent() - 1), db});
    }
    case ExprKind::Sin: {
      const Expr& b = e.children()[0];
      return Expr::product({Expr::cos(b), differentiate(b, var)});
    }
    case ExprKind::Cos: {
      const Expr& b = e.children()[0];
      return Expr::product({Expr::constant(-1), Expr::sin(b), differentiate(b, var)});
    }
    case ExprKind::Exp: {
      const Expr& b = e.children()[0];
      return Expr::product({Expr::exp(b), differentiate(b, var)});
    }
    case ExprKind::AbsPow: {
      const Expr& b = e.children()[0];
      Expr db = differentiate(b, var);
      if (db.is_zero()) return Expr::constant(0);
      return Expr::product({Expr::constant(e.exponent()),
                            Expr::sgn_pow(b, e.exponent() - 1), db});
    }
    case ExprKind::SgnPow: {
      const Expr& b = e.children()[0];
      Expr db = differentiate(b, var);
      if (db.is_zero()) return Expr::constant(0);
      return Expr::product({Expr::constant(e.exponent()),
                            Expr::abs_pow(b, e.exponent() - 1), db});
    }
  }
  throw Error(Error::Code::Internal, "unhandled expression kind");
}

namespace {

double check_finite(double v) {
  if (!std::isfinite(v)) throw EvalError("expression evaluation overflowed");
  return v;
}

}  // namespace

double evaluate(const Expr& e, std::span<const double> x) {
  switch (e.kind()) {
    case ExprKind::Constant: return to_double(e.constant_value());
    case ExprKind::Variable: {
      int v = e.var_index();
      if (v >= static_cast<int>(x.size())) throw EvalError("point has too few coordinates");
      return x[v];
    }
    case ExprKind::Sum: {
      double s = 0;
      for (const auto& ch : e.children()) s += evaluate(ch, x);
      return check_finite(s);
    }
    case ExprKind::Product: {
      double p = 1;
      for (const auto& ch : e.children()) p *= evaluate(ch, x);
      return check_finite(p);
    }
    case ExprKind::IntPow:
      return check_finite(std::pow(evaluate(e.children()[0], x), static_cast<double>(e.int_exponent())));
    case ExprKind::Sin: return std::sin(evaluate(e.children()[0], x));
    case ExprKind::Cos: return std::cos(evaluate(e.children()[0], x));
    case ExprKind::Exp: return check_finite(std::exp(evaluate(e.children()[0], x)));
    case ExprKind::AbsPow: {
      double b = evaluate(e.children()[0], x);
      double beta = to_double(e.exponent());
      if (b == 0.0) {
        if (beta > 0) return 0.0;
        if (beta == 0) return 1.0;
        throw EvalError("abs-power evaluated at a zero base with negative exponent");
      }
      return check_finite(std::pow(std::abs(b), beta));
    }
    case ExprKind::SgnPow: {
      double b = evaluate(e.children()[0], x);
      double beta = to_double(e.exponent());
      if (b == 0.0) {
        if (beta > 0) return 0.0;
        if (beta == 0) return 0.0;  // sign(0)
        throw EvalError("sgn-power evaluated at a zero base with negative exponent");
      }
      double s = b > 0 ? 1.0 : -1.0;
      return check_finite(s * std::pow(std::abs(b), beta));
    }
  }
  throw Error(Error::Code::Internal, "unhandled expression kind");
}

std::optional<Rational> evaluate_exact(const Expr& e, std::span<const Rational> x) {
  switch (e.kind()) {
    case ExprKind::Constant: return e.constant_value();
    case ExprKind::Variable: {
      int v = e.var_index();
      if (v >= static_cast<int>(x.size())) return std::nullopt;
      return x[v];
    }
    case ExprKind::Sum: {
      Rational s = 0;
      for (const auto& ch : e.children()) {
        auto v = evaluate_exact(ch, x);
        if (!v) return std::nullopt;
        s += *v;
      }
      return s;
    }
    case ExprKind::Product: {
      Rational p = 1;
      for (const auto& ch : e.children()) {
        auto v = evaluate_exact(ch, x);
        if (!v) return std::nullopt;
        p *= *v;
      }
      return p;
    }
    case ExprKind::IntPow: {
      auto v = evaluate_exact(e.children()[0], x);
      if (!v) return std::nullopt;
      Rational r = 1;
      for (long i = 0; i < e.int_exponent(); ++i) r *= *v;
      return r;
    }
    case ExprKind::AbsPow:
    case ExprKind::SgnPow: {
      if (denominator(e.exponent()) != 1 || e.exponent() < 0) return std::nullopt;
      auto v = evaluate_exact(e.children()[0], x);
      if (!v) return std::nullopt;
      if (*v == 0) return Rational(0);
      Rational a = abs(*v);
      Rational r = 1;
      for (BigInt i = 0; i < numerator(e.exponent()); ++i) r *= a;
      if (e.kind() == ExprKind::SgnPow && *v < 0) r = -r;
      return r;
    }
    default: return std::nullopt;  // transcendental
  }
}

Expr substitute(const Expr& e, const std::vector<Expr>& repl) {
  switch (e.kind()) {
    case ExprKind::Constant: return e;
    case ExprKind::Variable: {
      int v = e.var_index();
      if (v < static_cast<int>(repl.size())) return repl[v];
      return e;
    }
    default: {
      std::vector<Expr> ch;
      ch.reserve(e.children().size());
      for (const auto& c : e.children()) ch.push_back(substitute(c, repl));
      switch (e.kind()) {
        case ExprKind::Sum: return Expr::sum(std::move(ch));
        case ExprKind::Product: return Expr::product(std::move(ch));
        case ExprKind::IntPow: return Expr::int_pow(std::move(ch[0]), e.int_exponent());
        case ExprKind::Sin: return Expr::sin(std::move(ch[0]));
        case ExprKind::Cos: return Expr::cos(std::move(ch[0]));
        case ExprKind::Exp: return Expr::exp(std::move(ch[0]));
        case ExprKind::AbsPow: return Expr::abs_pow(std::move(ch[0]), e.exponent());
        case ExprKind::SgnPow: return Expr::sgn_pow(std::move(ch[0]), e.exponent());
        default: throw Error(Error::Code::Internal, "unhandled expression kind");
      }
    }
  }
}

int max_var_index(const Expr& e) {
  if (e.kind() == ExprKind::Variable) return e.var_index();
  int m = -1;
  for (const auto& ch : e.children()) m = std::max(m, max_var_index(ch));
  return m;
}

bool has_holder_nodes(const Expr& e) {
  if (e.kind() == ExprKind::AbsPow || e.kind() == ExprKind::SgnPow) return true;
  for (const auto& ch : e.children())
    if (has_holder_nodes(ch)) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  Parser(std::string_view src, int base_dim) : src_(src), base_dim_(base_dim) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) { throw ParseError(pos_, msg); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  Expr parse_sum() {
    std::vector<Expr> terms;
    terms.push_back(parse_term());
    for (;;) {
      if (eat('+')) {
        terms.push_back(parse_term());
      } else if (eat('-')) {
        terms.push_back(-parse_term());
      } else {
        break;
      }
    }
    return Expr::sum(std::move(terms));
  }

  Expr parse_term() {
    std::vector<Expr> factors;
    factors.push_back(parse_factor());
    while (eat('*')) factors.push_back(parse_factor());
    return Expr::product(std::move(factors));
  }

  Expr parse_factor() {
    skip_ws();
    std::size_t atom_pos = pos_;
    bool was_abs = false;
    Expr atom = parse_atom(&was_abs);
    if (eat('^')) {
      skip_ws();
      std::size_t exp_pos = pos_;
      Rational d = parse_number_token();
      if (was_abs) {
        if (d <= 0) throw ParseError(exp_pos, "abs exponent must be positive");
        // atom is abs_pow(base, 1); re-apply with the requested exponent
        return Expr::abs_pow(abs_base_, d);
      }
      if (denominator(d) != 1) throw ParseError(exp_pos, "non-integer exponent requires an abs(...) base");
      if (d < 0) throw ParseError(exp_pos, "negative exponent not supported");
      (void)atom_pos;
      return Expr::int_pow(std::move(atom), static_cast<long>(numerator(d)));
    }
    return atom;
  }

  Expr parse_atom(bool* was_abs) {
    skip_ws();
    if (pos_ >= src_.size()) fail("expected an operand");
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return Expr::constant(parse_number_token());
    }
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      std::string name(src_.substr(start, pos_ - start));
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        long idx = 0;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
          idx = idx * 10 + (src_[pos_++] - '0');
        if (name == "x") {
          if (idx < 1) throw ParseError(start, "variable index must be >= 1");
          return Expr::variable(static_cast<int>(idx - 1));
        }
        if (name == "t") {
          if (base_dim_ < 0) throw ParseError(start, "t-variables not available here");
          if (idx < 1) throw ParseError(start, "variable index must be >= 1");
          return Expr::variable(base_dim_ + static_cast<int>(idx - 1));
        }
        throw ParseError(start, "unknown identifier '" + name + "'");
      }
      if (!eat('(')) throw ParseError(start, "unknown identifier '" + name + "'");
      Expr arg = parse_sum();
      if (!eat(')')) fail("expected ')'");
      if (name == "sin") return Expr::sin(std::move(arg));
      if (name == "cos") return Expr::cos(std::move(arg));
      if (name == "exp") return Expr::exp(std::move(arg));
      if (name == "abs") {
        if (was_abs) *was_abs = true;
        abs_base_ = arg;
        return Expr::abs_pow(std::move(arg), 1);
      }
      if (name == "sgn") {
        // extension used by the printer; sgn(e)^d = sign(e)|e|^d
        if (was_abs) *was_abs = false;
        if (!eat('^')) throw ParseError(start, "sgn(...) requires an exponent");
        Rational d = parse_number_token();
        return Expr::sgn_pow(std::move(arg), d);
      }
      throw ParseError(start, "unknown function '" + name + "'");
    }
    fail("expected an operand");
  }

  // number := digits ('.' digits)? | digits '/' digits
  Rational parse_number_token() {
    skip_ws();
    std::size_t start = pos_;
    BigInt intpart = 0;
    bool any = false;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
      intpart = intpart * 10 + (src_[pos_] - '0');
      ++pos_;
      any = true;
    }
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      BigInt frac = 0, scale = 1;
      bool fany = false;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        frac = frac * 10 + (src_[pos_] - '0');
        scale *= 10;
        ++pos_;
        fany = true;
      }
      if (!any && !fany) throw ParseError(start, "malformed number");
      return Rational(intpart * scale + frac, scale);
    }
    if (!any) throw ParseError(start, "expected a number");
    if (pos_ < src_.size() && src_[pos_] == '/') {
      ++pos_;
      BigInt den = 0;
      bool dany = false;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        den = den * 10 + (src_[pos_] - '0');
        ++pos_;
        dany = true;
      }
      if (!dany || den == 0) throw ParseError(start, "malformed fraction");
      return Rational(intpart, den);
    }
    return Rational(intpart);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int base_dim_;
  Expr abs_base_;
};

}  // namespace

Expr parse_expr(std::string_view src, int base_dim) { return Parser(src, base_dim).parse(); }

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

namespace {

std::string var_name(int index, int base_dim) {
  if (base_dim >= 0 && index >= base_dim) return "t" + std::to_string(index - base_dim + 1);
  return "x" + std::to_string(index + 1);
}

std::string number_str(const Rational& r) {
  // Negative values are handled by the callers (sums print " - ").
  std::string s = numerator(r).str();
  if (denominator(r) != 1) s += "/" + denominator(r).str();
  return s;
}

struct Printer {
  int base_dim;

  // Splits e into (negative?, magnitude-expression) for sum-term printing.
  static bool split_sign(const Expr& e, Expr* mag) {
    if (e.is_constant() && e.constant_value() < 0) {
      *mag = Expr::constant(-e.constant_value());
      return true;
    }
    if (e.kind() == ExprKind::Product && e.children()[0].is_constant() &&
        e.children()[0].constant_value() < 0) {
      std::vector<Expr> ch = e.children();
      ch[0] = Expr::constant(-ch[0].constant_value());
      *mag = Expr::product(std::move(ch));
      return true;
    }
    return false;
  }

  std::string print(const Expr& e) const {
    switch (e.kind()) {
      case ExprKind::Constant: {
        if (e.constant_value() < 0) return "0 - " + number_str(-e.constant_value());
        return number_str(e.constant_value());
      }
      case ExprKind::Variable: return var_name(e.var_index(), base_dim);
      case ExprKind::Sum: {
        std::string out;
        const auto& ch = e.children();
        for (std::size_t i = 0; i < ch.size(); ++i) {
          Expr mag;
          bool neg = split_sign(ch[i], &mag);
          if (i == 0) {
            out = neg ? "0 - " + print_term(mag) : print_term(ch[i]);
          } else {
            out += neg ? " - " + print_term(mag) : " + " + print_term(ch[i]);
          }
        }
        return out;
      }
      case ExprKind::Product: return print_term(e);
      default: return print_factor(e);
    }
  }

  std::string print_term(const Expr& e) const {
    if (e.kind() == ExprKind::Product) {
      Expr mag;
      if (split_sign(e, &mag)) return "0 - " + print_term(mag);
      std::string out;
      const auto& ch = e.children();
      for (std::size_t i = 0; i < ch.size(); ++i) {
        if (i) out += "*";
        out += print_factor(ch[i]);
      }
      return out;
    }
    return print_factor(e);
  }

  std::string print_factor(const Expr& e) const {
    switch (e.kind()) {
      case ExprKind::Constant:
        if (e.constant_value() < 0) return "(" + print(e) + ")";
        return number_str(e.constant_value());
      case ExprKind::Variable: return var_name(e.var_index(), base_dim);
      case ExprKind::Sum:
      case ExprKind::Product: return "(" + print(e) + ")";
      case ExprKind::IntPow: {
        const Expr& b = e.children()[0];
        std::string bs = (b.kind() == ExprKind::Variable || (b.is_constant() && b.constant_value() >= 0))
                             ? print_factor(b)
                             : "(" + print(b) + ")";
        return bs + "^" + std::to_string(e.int_exponent());
      }
      case ExprKind::Sin: return "sin(" + print(e.children()[0]) + ")";
      case ExprKind::Cos: return "cos(" + print(e.children()[0]) + ")";
      case ExprKind::Exp: return "exp(" + print(e.children()[0]) + ")";
      case ExprKind::AbsPow: {
        std::string s = "abs(" + print(e.children()[0]) + ")";
        if (e.exponent() != 1) s += "^" + number_str(e.exponent());
        return s;
      }
      case ExprKind::SgnPow:
        return "sgn(" + print(e.children()[0]) + ")^" + number_str(e.exponent());
    }
    throw Error(Error::Code::Internal, "unhandled expression kind");
  }
};

}  // namespace

std::string print_expr(const Expr& e, int base_dim) { return Printer{base_dim}.print(e); }

// ---------------------------------------------------------------------------
// Compiled evaluator
// ---------------------------------------------------------------------------

CompiledExpr::CompiledExpr(const Expr& e) {
  max_var_ = max_var_index(e);
  struct Rec {
    std::vector<Instr>* code;
    void operator()(const Expr& e) {
      switch (e.kind()) {
        case ExprKind::Constant:
          code->push_back({Op::PushConst, 0, to_double(e.constant_value())});
          return;
        case ExprKind::Variable:
          code->push_back({Op::PushVar, e.var_index(), 0});
          return;
        case ExprKind::Sum: {
          for (const auto& ch : e.children()) (*this)(ch);
          code->push_back({Op::AddN, static_cast<int>(e.children().size()), 0});
          return;
        }
        case ExprKind::Product: {
          for (const auto& ch : e.children()) (*this)(ch);
          code->push_back({Op::MulN, static_cast<int>(e.children().size()), 0});
          return;
        }
        case ExprKind::IntPow:
          (*this)(e.children()[0]);
          code->push_back({Op::PowInt, static_cast<int>(e.int_exponent()), 0});
          return;
        case ExprKind::Sin:
          (*this)(e.children()[0]);
          code->push_back({Op::Sin, 0, 0});
          return;
        case ExprKind::Cos:
          (*this)(e.children()[0]);
          code->push_back({Op::Cos, 0, 0});
          return;
        case ExprKind::Exp:
          (*this)(e.children()[0]);
          code->push_back({Op::Exp, 0, 0});
          return;
        case ExprKind::AbsPow:
          (*this)(e.children()[0]);
          code->push_back({Op::AbsPow, 0, to_double(e.exponent())});
          return;
        case ExprKind::SgnPow:
          (*this)(e.children()[0]);
          code->push_back({Op::SgnPow, 0, to_double(e.exponent())});
          return;
      }
    }
  };
  Rec rec{&code_};
  rec(e);
  int depth = 0, maxdepth = 1;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::PushConst:
      case Op::PushVar: ++depth; break;
      case Op::AddN:
      case Op::MulN: depth -= in.arg - 1; break;
      default: break;
    }
    maxdepth = std::max(maxdepth, depth);
  }
  stack_.resize(static_cast<std::size_t>(maxdepth) + 1);
}

double CompiledExpr::eval(const double* x) const {
  double* sp = stack_.data();
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::PushConst: *sp++ = in.c; break;
      case Op::PushVar: *sp++ = x[in.arg]; break;
      case Op::AddN: {
        double s = 0;
        for (int i = 0; i < in.arg; ++i) s += *--sp;
        *sp++ = s;
        break;
      }
      case Op::MulN: {
        double p = 1;
        for (int i = 0; i < in.arg; ++i) p *= *--sp;
        *sp++ = p;
        break;
      }
      case Op::PowInt: {
        double b = sp[-1];
        double r = 1;
        int n = in.arg;
        while (n > 0) {
          if (n & 1) r *= b;
          b *= b;
          n >>= 1;
        }
        sp[-1] = r;
        break;
      }
      case Op::Sin: sp[-1] = std::sin(sp[-1]); break;
      case Op::Cos: sp[-1] = std::cos(sp[-1]); break;
      case Op::Exp: sp[-1] = std::exp(sp[-1]); break;
      case Op::AbsPow: {
        double b = sp[-1];
        sp[-1] = (b == 0.0) ? (in.c > 0 ? 0.0 : (in.c == 0 ? 1.0
                                                           : std::numeric_limits<double>::infinity()))
                            : std::pow(std::abs(b), in.c);
        break;
      }
      case Op::SgnPow: {
        double b = sp[-1];
        if (b == 0.0) {
          sp[-1] = in.c >= 0 ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
          sp[-1] = (b > 0 ? 1.0 : -1.0) * std::pow(std::abs(b), in.c);
        }
        break;
      }
      case Op::Negate: sp[-1] = -sp[-1]; break;
    }
  }
  double v = sp[-1];
  if (!std::isfinite(v)) throw EvalError("compiled expression evaluation overflowed");
  return v;
}

}  // namespace hvf
