#ifndef HVF_FREEALG_HPP
#define HVF_FREEALG_HPP

#include "rational.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hvf {

// Generator weights: letter 0 (the drift direction) counts 2, all others 1.
inline int letter_weight(int letter) { return letter == 0 ? 2 : 1; }

// Sequence of generator letters; doubles as a word in the free associative
// algebra and as the index of a nested bracket.
struct MultiIndex {
  std::vector<std::uint8_t> idx;

  MultiIndex() = default;
  MultiIndex(std::initializer_list<int> v) {
    for (int i : v) idx.push_back(static_cast<std::uint8_t>(i));
  }
  explicit MultiIndex(std::vector<std::uint8_t> v) : idx(std::move(v)) {}

  int length() const { return static_cast<int>(idx.size()); }
  int weight() const {
    int w = 0;
    for (auto i : idx) w += letter_weight(i);
    return w;
  }
  bool empty() const { return idx.empty(); }
  int last() const { return idx.back(); }
  MultiIndex drop_last() const {
    return MultiIndex(std::vector<std::uint8_t>(idx.begin(), idx.end() - 1));
  }
  MultiIndex tail() const {
    return MultiIndex(std::vector<std::uint8_t>(idx.begin() + 1, idx.end()));
  }

  std::string str() const;

  bool operator==(const MultiIndex& o) const { return idx == o.idx; }

  // Canonical order: weight, then length, then lexicographic.
  bool operator<(const MultiIndex& o) const {
    int wa = weight(), wb = o.weight();
    if (wa != wb) return wa < wb;
    if (idx.size() != o.idx.size()) return idx.size() < o.idx.size();
    return idx < o.idx;
  }
};

using Word = MultiIndex;

// Element of the free associative algebra graded by word weight: a finite
// rational combination of words (the empty word is the unit).
struct WordCombo {
  std::map<Word, Rational> terms;

  bool is_zero() const { return terms.empty(); }
  void add(const Word& w, const Rational& c);
  WordCombo& operator+=(const WordCombo& o);
  WordCombo& operator-=(const WordCombo& o);
  WordCombo scaled(const Rational& c) const;
};

Word concat(const Word& a, const Word& b);

// Expansion of the right-nested bracket xi_[I] into words: the rows A_{I,.}
// of the universal matrix. Coefficients are exact integers.
WordCombo bracket_expansion(const MultiIndex& I);

// All multiindices over the allowed letters with weight in [1, max_weight],
// in canonical order. Letters are 1..n, plus 0 when with_x0.
std::vector<MultiIndex> enumerate_multiindices(int n, bool with_x0, int max_weight);

// Commutator a*b - b*a, dropping words of weight > max_weight (pass a large
// value for no truncation).
WordCombo combo_commutator(const WordCombo& a, const WordCombo& b, int max_weight);

// --- exact linear algebra over the rationals ---------------------------------

using RMatrix = std::vector<std::vector<Rational>>;
using RVector = std::vector<Rational>;

// Rank via Gaussian elimination (destroys its copy of the input).
int rational_rank(RMatrix m);

// Kernel basis of m (rows x cols): vectors v with m v = 0. Deterministic
// reduced-row-echelon parameterisation, one basis vector per free column.
std::vector<RVector> rational_kernel(const RMatrix& m);

// Minimum-norm exact solution of m u = b (least squares is not needed: the
// system must be consistent, otherwise nullopt).
std::optional<RVector> rational_min_norm_solve(const RMatrix& m, const RVector& b);

// Solve the square system m u = b; nullopt when singular.
std::optional<RVector> rational_solve(RMatrix m, RVector b);

}  // namespace hvf

#endif
