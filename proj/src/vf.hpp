#ifndef HVF_VF_HPP
#define HVF_VF_HPP

#include "expr.hpp"
#include "freealg.hpp"
#include "poly.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

namespace hvf {

struct VectorField {
  std::vector<Expr> coeff;

  VectorField() = default;
  explicit VectorField(std::vector<Expr> c) : coeff(std::move(c)) {}
  static VectorField zero(int p) { return VectorField(std::vector<Expr>(p, Expr::constant(0))); }

  int dim() const { return static_cast<int>(coeff.size()); }
  bool is_zero() const;

  // X f = sum_j coeff_j * d f / d x_j
  Expr apply(const Expr& f) const;

  VectorField extended(int new_dim) const;

  Eigen::VectorXd eval(std::span<const double> x) const;
  std::optional<RVector> eval_exact(std::span<const Rational> x) const;
};

VectorField bracket(const VectorField& X, const VectorField& Y);

struct Box {
  std::vector<double> lo, hi;
  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(std::span<const double> x, double margin = 0.0) const;
  Box extended(double tlo, double thi) const;
};

// The weighted family X_0 (optional drift, weight 2), X_1..X_n (weight 1) on
// a box region of R^p, with Hörmander step r and Hölder exponent alpha.
class WeightedSystem {
 public:
  WeightedSystem(int p, int n, bool with_x0, int r, double alpha,
                 std::vector<VectorField> fields,  // X0 first when with_x0
                 Box region);

  int p() const { return p_; }
  int n() const { return n_; }
  bool with_x0() const { return with_x0_; }
  int r() const { return r_; }
  double alpha() const { return alpha_; }
  const Box& region() const { return region_; }
  bool nonsmooth() const { return nonsmooth_; }
  bool polynomial_rational() const { return polynomial_; }

  const VectorField& field(int letter) const;  // letter in {0..n} ({1..n} without drift)
  int field_count() const { return static_cast<int>(fields_.size()); }

  // Right-nested bracket X_[I]; cached. Throws when |I| > r.
  const VectorField& nested_bracket(const MultiIndex& I) const;

  std::vector<MultiIndex> bracket_indices(int max_weight) const {
    return enumerate_multiindices(n_, with_x0_, max_weight);
  }

 private:
  struct BracketCache {
    std::mutex mutex;
    std::map<MultiIndex, VectorField> entries;
  };

  int p_, n_, r_;
  bool with_x0_;
  double alpha_;
  Box region_;
  std::vector<VectorField> fields_;
  bool nonsmooth_ = false;
  bool polynomial_ = false;
  std::shared_ptr<BracketCache> cache_ = std::make_shared<BracketCache>();
};

struct FreenessResult {
  bool free = false;
  int weight = 0;                     // tested weight s
  std::vector<MultiIndex> index_set;  // multiindices with |I| <= s, canonical order
  int span_dim = 0;                   // rank of the evaluation matrix
  double max_violation = 0.0;
  Eigen::VectorXd certificate;        // empty when free; unit max-norm otherwise
};

// Kernel/A-matrix freeness test at x0 with SVD rank tolerance `tol` (relative).
FreenessResult freeness_check(const WeightedSystem& sys, std::span<const double> x0,
                              int s, double tol = 1e-9);

struct ExactFreenessResult {
  bool free = false;
  int weight = 0;
  std::vector<MultiIndex> index_set;
  int span_dim = 0;
  RVector certificate;  // empty when free; unit max-norm otherwise
};

// Exact-rational variant; requires polynomial coefficients with rational
// constants (throws otherwise).
ExactFreenessResult freeness_check_exact(const WeightedSystem& sys,
                                         std::span<const Rational> x0, int s);

// Quantitative Hörmander certificate: min over a probe grid of the best
// p-tuple determinant found by greedy volume pivoting. Returns 0 when the
// brackets fail to span at some probe.
double hormander_constant(const WeightedSystem& sys, int probes_per_axis = 3);

}  // namespace hvf

#endif
