#include "poly.hpp"

namespace hvf {

Poly Poly::constant(int nvars, Rational c) {
  Poly p(nvars);
  if (c != 0) p.terms_[Mono(nvars, 0)] = std::move(c);
  return p;
}

Poly Poly::variable(int nvars, int i) {
  Poly p(nvars);
  Mono m(nvars, 0);
  m[i] = 1;
  p.terms_[m] = 1;
  return p;
}

int Poly::total_degree() const {
  int d = -1;
  for (const auto& [m, c] : terms_) {
    int s = 0;
    for (unsigned e : m) s += static_cast<int>(e);
    d = std::max(d, s);
  }
  return d;
}

void Poly::add_term(const Mono& m, const Rational& c) {
  if (c == 0) return;
  auto it = terms_.find(m);
  if (it == terms_.end()) {
    terms_.emplace(m, c);
  } else {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

Poly Poly::operator+(const Poly& o) const {
  Poly r = *this;
  for (const auto& [m, c] : o.terms_) r.add_term(m, c);
  return r;
}

Poly Poly::operator-(const Poly& o) const {
  Poly r = *this;
  for (const auto& [m, c] : o.terms_) r.add_term(m, -c);
  return r;
}

Poly Poly::operator-() const {
  Poly r(nvars_);
  for (const auto& [m, c] : terms_) r.terms_[m] = -c;
  return r;
}

Poly Poly::scaled(const Rational& c) const {
  Poly r(nvars_);
  if (c == 0) return r;
  for (const auto& [m, k] : terms_) r.terms_[m] = k * c;
  return r;
}

Poly Poly::operator*(const Poly& o) const {
  Poly r(nvars_);
  for (const auto& [ma, ca] : terms_) {
    for (const auto& [mb, cb] : o.terms_) {
      Mono m(nvars_);
      for (int i = 0; i < nvars_; ++i) m[i] = ma[i] + mb[i];
      r.add_term(m, ca * cb);
    }
  }
  return r;
}

Poly Poly::pow(unsigned n) const {
  Poly r = Poly::constant(nvars_, 1);
  Poly b = *this;
  while (n > 0) {
    if (n & 1) r = r * b;
    b = b * b;
    n >>= 1;
  }
  return r;
}

Poly Poly::derivative(int var) const {
  Poly r(nvars_);
  for (const auto& [m, c] : terms_) {
    if (m[var] == 0) continue;
    Mono d = m;
    d[var] -= 1;
    r.add_term(d, c * Rational(m[var]));
  }
  return r;
}

Rational Poly::eval(std::span<const Rational> x) const {
  Rational s = 0;
  for (const auto& [m, c] : terms_) {
    Rational t = c;
    for (int i = 0; i < nvars_; ++i)
      for (unsigned k = 0; k < m[i]; ++k) t *= x[i];
    s += t;
  }
  return s;
}

double Poly::eval_double(std::span<const double> x) const {
  double s = 0;
  for (const auto& [m, c] : terms_) {
    double t = to_double(c);
    for (int i = 0; i < nvars_; ++i) {
      double b = x[i];
      unsigned n = m[i];
      while (n > 0) {
        if (n & 1) t *= b;
        b *= b;
        n >>= 1;
      }
    }
    s += t;
  }
  return s;
}

Poly Poly::substitute(const std::vector<Poly>& repl) const {
  int out_vars = repl.empty() ? 0 : repl[0].nvars();
  Poly r(out_vars);
  for (const auto& [m, c] : terms_) {
    Poly t = Poly::constant(out_vars, c);
    for (int i = 0; i < nvars_; ++i)
      if (m[i] > 0) t = t * repl[i].pow(m[i]);
    r = r + t;
  }
  return r;
}

Poly Poly::truncate_vars(int keep) const {
  Poly r(keep);
  for (const auto& [m, c] : terms_) {
    bool drop = false;
    for (int i = keep; i < nvars_; ++i)
      if (m[i] > 0) { drop = true; break; }
    if (drop) continue;
    Mono t(m.begin(), m.begin() + keep);
    r.add_term(t, c);
  }
  return r;
}

Expr Poly::to_expr() const {
  std::vector<Expr> terms;
  for (const auto& [m, c] : terms_) {
    std::vector<Expr> factors;
    factors.push_back(Expr::constant(c));
    for (int i = 0; i < nvars_; ++i)
      if (m[i] > 0) factors.push_back(Expr::int_pow(Expr::variable(i), m[i]));
    terms.push_back(Expr::product(std::move(factors)));
  }
  return Expr::sum(std::move(terms));
}

std::optional<Poly> expr_to_poly(const Expr& e, int nvars) {
  switch (e.kind()) {
    case ExprKind::Constant: return Poly::constant(nvars, e.constant_value());
    case ExprKind::Variable:
      if (e.var_index() >= nvars) return std::nullopt;
      return Poly::variable(nvars, e.var_index());
    case ExprKind::Sum: {
      Poly r(nvars);
      for (const auto& ch : e.children()) {
        auto p = expr_to_poly(ch, nvars);
        if (!p) return std::nullopt;
        r = r + *p;
      }
      return r;
    }
    case ExprKind::Product: {
      Poly r = Poly::constant(nvars, 1);
      for (const auto& ch : e.children()) {
        auto p = expr_to_poly(ch, nvars);
        if (!p) return std::nullopt;
        r = r * *p;
      }
      return r;
    }
    case ExprKind::IntPow: {
      auto p = expr_to_poly(e.children()[0], nvars);
      if (!p) return std::nullopt;
      return p->pow(static_cast<unsigned>(e.int_exponent()));
    }
    default: return std::nullopt;
  }
}

// Exponent vectors of total degree <= s over p variables, graded-lex order.
std::vector<std::vector<unsigned>> monomials_up_to(int p, int s) {
  std::vector<std::vector<unsigned>> out;
  if (p == 0) return out;
  std::vector<unsigned> cur(p, 0);
  auto by_degree = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == p - 1) {
      cur[pos] = static_cast<unsigned>(remaining);
      out.push_back(cur);
      cur[pos] = 0;
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur[pos] = static_cast<unsigned>(e);
      self(self, pos + 1, remaining - e);
    }
    cur[pos] = 0;
  };
  for (int d = 0; d <= s; ++d) by_degree(by_degree, 0, d);
  return out;
}

}  // namespace hvf
