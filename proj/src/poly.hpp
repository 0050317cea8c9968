#ifndef HVF_POLY_HPP
#define HVF_POLY_HPP

#include "expr.hpp"
#include "rational.hpp"

#include <map>
#include <optional>
#include <span>
#include <vector>

namespace hvf {

// Sparse multivariate polynomial over the rationals. Monomials are exponent
// vectors of fixed length nvars; the zero polynomial has an empty term map.
class Poly {
 public:
  using Mono = std::vector<unsigned>;

  Poly() : nvars_(0) {}
  explicit Poly(int nvars) : nvars_(nvars) {}

  static Poly constant(int nvars, Rational c);
  static Poly variable(int nvars, int i);

  int nvars() const { return nvars_; }
  const std::map<Mono, Rational>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int total_degree() const;  // -1 for the zero polynomial

  void add_term(const Mono& m, const Rational& c);

  Poly operator+(const Poly& o) const;
  Poly operator-(const Poly& o) const;
  Poly operator*(const Poly& o) const;
  Poly operator-() const;
  Poly scaled(const Rational& c) const;
  Poly pow(unsigned n) const;
  Poly derivative(int var) const;

  Rational eval(std::span<const Rational> x) const;
  double eval_double(std::span<const double> x) const;

  // Substitute repl[i] for variable i; repl polynomials share one variable count.
  Poly substitute(const std::vector<Poly>& repl) const;

  // Keep the first `keep` variables, set the rest to zero.
  Poly truncate_vars(int keep) const;

  Expr to_expr() const;

  bool operator==(const Poly& o) const { return nvars_ == o.nvars_ && terms_ == o.terms_; }

 private:
  int nvars_;
  std::map<Mono, Rational> terms_;
};

// nullopt if the expression is not polynomial (transcendental or Hölder nodes)
// or references variables >= nvars.
std::optional<Poly> expr_to_poly(const Expr& e, int nvars);

// Exponent vectors with total degree <= degree, graded-lex order.
std::vector<std::vector<unsigned>> monomials_up_to(int nvars, int degree);

}  // namespace hvf

#endif
