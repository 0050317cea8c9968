#include "freealg.hpp"

#include "expr.hpp"

namespace hvf {

std::string MultiIndex::str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(static_cast<int>(idx[i]));
  }
  return s + ")";
}

void WordCombo::add(const Word& w, const Rational& c) {
  if (c == 0) return;
  auto it = terms.find(w);
  if (it == terms.end()) {
    terms.emplace(w, c);
  } else {
    it->second += c;
    if (it->second == 0) terms.erase(it);
  }
}

WordCombo& WordCombo::operator+=(const WordCombo& o) {
  for (const auto& [w, c] : o.terms) add(w, c);
  return *this;
}

WordCombo& WordCombo::operator-=(const WordCombo& o) {
  for (const auto& [w, c] : o.terms) add(w, -c);
  return *this;
}

WordCombo WordCombo::scaled(const Rational& c) const {
  WordCombo r;
  if (c == 0) return r;
  for (const auto& [w, k] : terms) r.terms.emplace(w, k * c);
  return r;
}

Word concat(const Word& a, const Word& b) {
  std::vector<std::uint8_t> v = a.idx;
  v.insert(v.end(), b.idx.begin(), b.idx.end());
  return Word(std::move(v));
}

WordCombo bracket_expansion(const MultiIndex& I) {
  if (I.length() == 0) throw Error(Error::Code::Precondition, "empty multiindex");
  if (I.length() == 1) {
    WordCombo c;
    c.add(I, 1);
    return c;
  }
  Word head({});
  head.idx.push_back(I.idx[0]);
  WordCombo rest = bracket_expansion(I.tail());
  WordCombo out;
  for (const auto& [w, c] : rest.terms) {
    out.add(concat(head, w), c);
    out.add(concat(w, head), -c);
  }
  return out;
}

std::vector<MultiIndex> enumerate_multiindices(int n, bool with_x0, int max_weight) {
  std::vector<MultiIndex> out;
  std::vector<std::uint8_t> letters;
  if (with_x0) letters.push_back(0);
  for (int i = 1; i <= n; ++i) letters.push_back(static_cast<std::uint8_t>(i));

  std::vector<std::uint8_t> cur;
  auto rec = [&](auto&& self, int remaining) -> void {
    if (!cur.empty()) out.emplace_back(cur);
    for (auto l : letters) {
      int w = letter_weight(l);
      if (w > remaining) continue;
      cur.push_back(l);
      self(self, remaining - w);
      cur.pop_back();
    }
  };
  rec(rec, max_weight);
  std::sort(out.begin(), out.end());
  return out;
}

WordCombo combo_commutator(const WordCombo& a, const WordCombo& b, int max_weight) {
  WordCombo out;
  for (const auto& [wa, ca] : a.terms) {
    for (const auto& [wb, cb] : b.terms) {
      Word ab = concat(wa, wb);
      if (ab.weight() <= max_weight) {
        out.add(ab, ca * cb);
        out.add(concat(wb, wa), -(ca * cb));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Reduced row echelon form in place; returns pivot column per row.
std::vector<int> rref(RMatrix& m) {
  std::vector<int> pivots;
  if (m.empty()) return pivots;
  std::size_t rows = m.size(), cols = m[0].size();
  std::size_t row = 0;
  for (std::size_t col = 0; col < cols && row < rows; ++col) {
    std::size_t sel = row;
    while (sel < rows && m[sel][col] == 0) ++sel;
    if (sel == rows) continue;
    std::swap(m[sel], m[row]);
    Rational inv = Rational(1) / m[row][col];
    for (std::size_t j = col; j < cols; ++j) m[row][j] *= inv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == row || m[i][col] == 0) continue;
      Rational f = m[i][col];
      for (std::size_t j = col; j < cols; ++j) m[i][j] -= f * m[row][j];
    }
    pivots.push_back(static_cast<int>(col));
    ++row;
  }
  return pivots;
}

}  // namespace

int rational_rank(RMatrix m) { return static_cast<int>(rref(m).size()); }

std::vector<RVector> rational_kernel(const RMatrix& m_in) {
  RMatrix m = m_in;
  if (m.empty()) return {};
  std::size_t cols = m[0].size();
  std::vector<int> pivots = rref(m);
  std::vector<bool> is_pivot(cols, false);
  for (int c : pivots) is_pivot[c] = true;

  std::vector<RVector> basis;
  for (std::size_t free_col = 0; free_col < cols; ++free_col) {
    if (is_pivot[free_col]) continue;
    RVector v(cols, Rational(0));
    v[free_col] = 1;
    for (std::size_t rr = 0; rr < pivots.size(); ++rr)
      v[pivots[rr]] = -m[rr][free_col];
    basis.push_back(std::move(v));
  }
  return basis;
}

std::optional<RVector> rational_min_norm_solve(const RMatrix& m, const RVector& b) {
  std::size_t rows = m.size();
  if (rows == 0) return RVector{};
  std::size_t cols = m[0].size();

  // Select independent rows; check consistency of the rest.
  RMatrix aug = m;
  for (std::size_t i = 0; i < rows; ++i) aug[i].push_back(b[i]);
  {
    RMatrix chk = aug;
    std::vector<int> piv = rref(chk);
    for (int c : piv)
      if (c == static_cast<int>(cols)) return std::nullopt;  // inconsistent
  }

  // Independent row subset via elimination on a working copy.
  std::vector<std::size_t> keep;
  {
    RMatrix work;
    for (std::size_t i = 0; i < rows; ++i) {
      work.push_back(m[i]);
      if (rational_rank(work) == static_cast<int>(work.size())) {
        keep.push_back(i);
      } else {
        work.pop_back();
      }
    }
  }
  std::size_t k = keep.size();
  if (k == 0) return RVector(cols, Rational(0));

  // u = R^T (R R^T)^{-1} b_keep
  RMatrix g(k, RVector(k, Rational(0)));
  RVector bk(k);
  for (std::size_t i = 0; i < k; ++i) {
    bk[i] = b[keep[i]];
    for (std::size_t j = 0; j < k; ++j) {
      Rational s = 0;
      for (std::size_t c = 0; c < cols; ++c) s += m[keep[i]][c] * m[keep[j]][c];
      g[i][j] = s;
    }
  }
  auto z = rational_solve(g, bk);
  if (!z) return std::nullopt;
  RVector u(cols, Rational(0));
  for (std::size_t c = 0; c < cols; ++c) {
    Rational s = 0;
    for (std::size_t i = 0; i < k; ++i) s += m[keep[i]][c] * (*z)[i];
    u[c] = s;
  }
  return u;
}

std::optional<RVector> rational_solve(RMatrix m, RVector b) {
  std::size_t nn = m.size();
  for (std::size_t i = 0; i < nn; ++i) m[i].push_back(b[i]);
  std::vector<int> piv = rref(m);
  if (piv.size() != nn) return std::nullopt;
  for (std::size_t i = 0; i < nn; ++i)
    if (piv[i] != static_cast<int>(i)) return std::nullopt;  // singular
  RVector x(nn);
  for (std::size_t i = 0; i < nn; ++i) x[i] = m[i][nn];
  return x;
}

}  // namespace hvf
