#ifndef HVF_LIFTING_HPP
#define HVF_LIFTING_HPP

#include "liealg.hpp"
#include "vf.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace hvf {

// Polynomial u with (X_J u)(x0) = targets[J] for every word J of weight <= s
// (missing keys are zero) and u(x0) = value_at_x0. Feasible whenever the
// system is free of weight s at x0; the minimum-norm coefficient vector is
// returned for determinism. Exact arithmetic when the coefficients are
// rational polynomials, double least squares otherwise.
Expr interpolation_polynomial(const WeightedSystem& sys, int s,
                              const std::map<MultiIndex, Rational>& targets,
                              std::span<const Rational> x0,
                              const Rational& value_at_x0 = Rational(0));

struct LiftStep {
  int failing_weight = 0;
  std::vector<MultiIndex> index_set;
  RVector certificate;     // unit max-norm kernel vector violating the A-relations
  Word violating_word;     // J with max |sum_I a_I A_IJ|
  int generator;           // last letter of the violating word
  std::vector<Expr> u;     // new-variable coefficients per generator letter
};

struct LiftResult {
  WeightedSystem lifted;
  int m = 0;
  std::vector<LiftStep> steps;
  int original_p = 0;
  std::string to_json_string() const;
};

// One application of the single-variable lift: requires the system to be free
// of weight s-1 but not s at x0. Throws when the system is already free of
// weight r or Hörmander fails.
WeightedSystem lift_one_step(const WeightedSystem& sys, std::span<const double> x0);

// Full lifting: iterates until the fields are free of weight r and their
// brackets span the lifted space.
LiftResult lift(const WeightedSystem& sys, std::span<const double> x0);

}  // namespace hvf

#endif
