#ifndef HVF_LIEALG_HPP
#define HVF_LIEALG_HPP

#include "freealg.hpp"
#include "poly.hpp"
#include "vf.hpp"

#include <map>
#include <span>
#include <vector>

namespace hvf {

// Basis of the free nilpotent Lie algebra of type II (n generators of weight
// one, optionally one of weight two), truncated beyond weight r. Elements are
// right-nested brackets in canonical order, graded by weight.
struct GradedBasis {
  int n = 0;
  bool with_x0 = false;
  int r = 0;
  std::vector<MultiIndex> elems;
  std::vector<int> weights;

  int dim() const { return static_cast<int>(elems.size()); }
  int Q() const {
    int q = 0;
    for (int w : weights) q += w;
    return q;
  }
  int index_of(const MultiIndex& I) const;  // -1 when I is not a basis element
};

GradedBasis graded_basis(int n, bool with_x0, int r);

// The homogeneous group G: R^dim with the truncated BCH product, dilations,
// homogeneous norm, and the left-invariant frame Y_[I].
class GroupStructure {
 public:
  GroupStructure(int n, bool with_x0, int r);

  const GradedBasis& basis() const { return basis_; }
  int dim() const { return basis_.dim(); }
  int Q() const { return basis_.Q(); }
  int r() const { return basis_.r; }

  // [b_i, b_j] = sum_k c_k b_k (all of weight w_i + w_j; empty when > r).
  const std::vector<std::pair<int, Rational>>& structure(int i, int j) const;

  // BCH polynomial of coordinate j: S_j(x, y) with x = vars 0..p-1, y = vars p..2p-1.
  const Poly& bch_poly(int j) const { return s_polys_[j]; }

  std::vector<double> product(std::span<const double> u, std::span<const double> v) const;
  RVector product_exact(std::span<const Rational> u, std::span<const Rational> v) const;
  std::vector<double> dilate(double lambda, std::span<const double> u) const;
  RVector dilate_exact(const Rational& lambda, std::span<const Rational> u) const;
  double homogeneous_norm(std::span<const double> u) const;

  // Y_[I] for basis element k: polynomial field with (Y_[I])_0 = e_I.
  const VectorField& left_invariant_field(int k) const;

  // The generators Y_0..Y_n as a weighted system on R^dim.
  WeightedSystem as_system() const;

  // Correctness gate: multiply truncated exponentials of two generic elements
  // in the free associative algebra and compare against exp of the computed
  // BCH element. Throws on any mismatch.
  void verify_bch() const;

  std::string to_json_string() const;

 private:
  GradedBasis basis_;
  std::vector<WordCombo> combos_;                    // expansion of each basis element
  std::vector<Poly> s_polys_;                        // BCH coordinates, 2p variables
  std::map<std::pair<int, int>, std::vector<std::pair<int, Rational>>> structure_;
  mutable std::vector<VectorField> y_fields_;
  mutable std::vector<bool> y_built_;
  mutable std::mutex y_mutex_;

  std::vector<Poly> lie_coordinates(int weight, std::map<Word, Poly>& z, int poly_vars) const;
};

}  // namespace hvf

#endif
