#include "liealg.hpp"

#include <json.hpp>

#include <algorithm>

namespace hvf {

namespace {

// Echelon structure over word coordinates for exact span computations.
struct WordEchelon {
  // Rows are reduced combos with unit leading coefficient, keyed by pivot word.
  std::map<Word, WordCombo> rows;

  // Reduce c against the rows; returns the residue.
  WordCombo reduce(WordCombo c) const {
    for (const auto& [pivot, row] : rows) {
      auto it = c.terms.find(pivot);
      if (it == c.terms.end()) continue;
      Rational f = it->second;
      c -= row.scaled(f);
    }
    return c;
  }

  // Returns true (and absorbs the residue) when c is independent.
  bool insert(const WordCombo& c) {
    WordCombo res = reduce(c);
    if (res.is_zero()) return false;
    const auto& [pivot, lead] = *res.terms.begin();
    WordCombo row = res.scaled(Rational(1) / lead);
    rows.emplace(pivot, std::move(row));
    return true;
  }
};

}  // namespace

int GradedBasis::index_of(const MultiIndex& I) const {
  for (std::size_t k = 0; k < elems.size(); ++k)
    if (elems[k] == I) return static_cast<int>(k);
  return -1;
}

GradedBasis graded_basis(int n, bool with_x0, int r) {
  if (n < 1 || r < 1) throw Error(Error::Code::Precondition, "need n >= 1 and r >= 1");
  GradedBasis b;
  b.n = n;
  b.with_x0 = with_x0;
  b.r = r;
  WordEchelon ech;
  for (const auto& I : enumerate_multiindices(n, with_x0, r)) {
    if (ech.insert(bracket_expansion(I))) {
      b.elems.push_back(I);
      b.weights.push_back(I.weight());
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// Truncated series over the free associative algebra, with polynomial
// coefficients in the 2p group coordinates.
// ---------------------------------------------------------------------------

namespace {

using Series = std::map<Word, Poly>;

Series series_mul(const Series& a, const Series& b, int max_weight) {
  Series out;
  for (const auto& [wa, pa] : a) {
    int ra = max_weight - wa.weight();
    for (const auto& [wb, pb] : b) {
      if (wb.weight() > ra) continue;
      Word w = concat(wa, wb);
      Poly prod = pa * pb;
      auto it = out.find(w);
      if (it == out.end()) out.emplace(w, std::move(prod));
      else it->second = it->second + prod;
    }
  }
  for (auto it = out.begin(); it != out.end();) {
    if (it->second.is_zero()) it = out.erase(it);
    else ++it;
  }
  return out;
}

Series series_one(int poly_vars) {
  Series s;
  s.emplace(Word{}, Poly::constant(poly_vars, 1));
  return s;
}

// exp of a series with no constant (empty-word) term.
Series series_exp(const Series& a, int max_weight, int poly_vars) {
  Series out = series_one(poly_vars);
  Series pw = series_one(poly_vars);
  Rational fact = 1;
  for (int k = 1; k <= max_weight; ++k) {
    pw = series_mul(pw, a, max_weight);
    fact *= k;
    Rational inv = Rational(1) / fact;
    for (const auto& [w, p] : pw) {
      Poly t = p.scaled(inv);
      auto it = out.find(w);
      if (it == out.end()) out.emplace(w, std::move(t));
      else it->second = it->second + t;
    }
  }
  return out;
}

// log of a series with constant term 1.
Series series_log(const Series& a, int max_weight, int poly_vars) {
  Series am1 = a;
  am1.erase(Word{});
  Series out;
  Series pw = series_one(poly_vars);
  for (int k = 1; k <= max_weight; ++k) {
    pw = series_mul(pw, am1, max_weight);
    Rational coeff = Rational((k % 2 == 1) ? 1 : -1, k);
    for (const auto& [w, p] : pw) {
      Poly t = p.scaled(coeff);
      auto it = out.find(w);
      if (it == out.end()) out.emplace(w, std::move(t));
      else it->second = it->second + t;
    }
  }
  for (auto it = out.begin(); it != out.end();) {
    if (it->second.is_zero()) it = out.erase(it);
    else ++it;
  }
  return out;
}

}  // namespace

// Express the weight-w slice of z in the basis elements of weight w.
std::vector<Poly> GroupStructure::lie_coordinates(int weight, std::map<Word, Poly>& z,
                                                  int poly_vars) const {
  std::vector<int> elem_ids;
  for (int k = 0; k < basis_.dim(); ++k)
    if (basis_.weights[k] == weight) elem_ids.push_back(k);

  std::vector<Word> words;
  for (const auto& I : enumerate_multiindices(basis_.n, basis_.with_x0, weight))
    if (I.weight() == weight && I.length() >= 1) words.push_back(I);
  // Words here are plain words of this weight (every multiindex doubles as one).

  int m = static_cast<int>(elem_ids.size());
  int rows = static_cast<int>(words.size());

  std::vector<RVector> mat(rows, RVector(m, Rational(0)));
  std::vector<Poly> rhs(rows, Poly(poly_vars));
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < m; ++j) {
      const auto& combo = combos_[elem_ids[j]];
      auto it = combo.terms.find(words[i]);
      if (it != combo.terms.end()) mat[i][j] = it->second;
    }
    auto it = z.find(words[i]);
    if (it != z.end()) rhs[i] = it->second;
  }

  // Gaussian elimination with the polynomial right-hand side carried along.
  std::vector<int> pivot_row(m, -1);
  int row = 0;
  for (int col = 0; col < m && row < rows; ++col) {
    int sel = -1;
    for (int i = row; i < rows; ++i)
      if (mat[i][col] != 0) { sel = i; break; }
    if (sel < 0) continue;
    std::swap(mat[sel], mat[row]);
    std::swap(rhs[sel], rhs[row]);
    Rational inv = Rational(1) / mat[row][col];
    for (int j = col; j < m; ++j) mat[row][j] *= inv;
    rhs[row] = rhs[row].scaled(inv);
    for (int i = 0; i < rows; ++i) {
      if (i == row || mat[i][col] == 0) continue;
      Rational f = mat[i][col];
      for (int j = col; j < m; ++j) mat[i][j] -= f * mat[row][j];
      rhs[i] = rhs[i] - rhs[row].scaled(f);
    }
    pivot_row[col] = row;
    ++row;
  }
  // All basis columns must be pivots; every remaining row must be zero = zero.
  std::vector<Poly> coords(m, Poly(poly_vars));
  for (int col = 0; col < m; ++col) {
    if (pivot_row[col] < 0)
      throw Error(Error::Code::Internal, "graded basis not independent");
    coords[col] = rhs[pivot_row[col]];
  }
  for (int i = row; i < rows; ++i)
    if (!rhs[i].is_zero())
      throw Error(Error::Code::Internal, "BCH element is not a Lie element");
  return coords;
}

GroupStructure::GroupStructure(int n, bool with_x0, int r) : basis_(graded_basis(n, with_x0, r)) {
  int p = basis_.dim();
  combos_.reserve(p);
  for (const auto& I : basis_.elems) combos_.push_back(bracket_expansion(I));

  // Structure constants [b_i, b_j].
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      int w = basis_.weights[i] + basis_.weights[j];
      std::vector<std::pair<int, Rational>> entry;
      if (w <= r) {
        WordCombo c = combo_commutator(combos_[i], combos_[j], r);
        // Solve for the weight-w coordinates with scalar right-hand side.
        std::map<Word, Poly> z;
        for (const auto& [word, coefficient] : c.terms)
          z.emplace(word, Poly::constant(0, coefficient));
        auto coords = lie_coordinates(w, z, 0);
        int pos = 0;
        for (int k = 0; k < p; ++k) {
          if (basis_.weights[k] != w) continue;
          const Poly& ck = coords[pos++];
          if (!ck.is_zero()) entry.emplace_back(k, ck.terms().begin()->second);
        }
      }
      structure_[{i, j}] = std::move(entry);
    }
  }

  // Truncated BCH: Z = log(exp(xi) exp(eta)) with symbolic coordinates.
  int poly_vars = 2 * p;
  Series xi, eta;
  for (int k = 0; k < p; ++k) {
    Poly xk = Poly::variable(poly_vars, k);
    Poly yk = Poly::variable(poly_vars, p + k);
    for (const auto& [w, c] : combos_[k].terms) {
      auto add = [&](Series& s, const Poly& v) {
        Poly t = v.scaled(c);
        auto it = s.find(w);
        if (it == s.end()) s.emplace(w, std::move(t));
        else it->second = it->second + t;
      };
      add(xi, xk);
      add(eta, yk);
    }
  }
  Series prod = series_mul(series_exp(xi, r, poly_vars), series_exp(eta, r, poly_vars), r);
  Series z = series_log(prod, r, poly_vars);
  if (z.count(Word{}))
    throw Error(Error::Code::Internal, "BCH log has a constant term");

  s_polys_.assign(p, Poly(poly_vars));
  for (int w = 1; w <= r; ++w) {
    bool any = false;
    for (int k = 0; k < p; ++k)
      if (basis_.weights[k] == w) any = true;
    if (!any) continue;
    auto coords = lie_coordinates(w, z, poly_vars);
    int pos = 0;
    for (int k = 0; k < p; ++k)
      if (basis_.weights[k] == w) s_polys_[k] = coords[pos++];
  }

  y_fields_.resize(p);
  y_built_.assign(p, false);
}

const std::vector<std::pair<int, Rational>>& GroupStructure::structure(int i, int j) const {
  auto it = structure_.find({i, j});
  if (it == structure_.end())
    throw Error(Error::Code::Precondition, "structure constants: bad indices");
  return it->second;
}

std::vector<double> GroupStructure::product(std::span<const double> u,
                                            std::span<const double> v) const {
  int p = dim();
  std::vector<double> xy(2 * p);
  for (int i = 0; i < p; ++i) xy[i] = u[i];
  for (int i = 0; i < p; ++i) xy[p + i] = v[i];
  std::vector<double> out(p);
  for (int j = 0; j < p; ++j) out[j] = s_polys_[j].eval_double(xy);
  return out;
}

RVector GroupStructure::product_exact(std::span<const Rational> u,
                                      std::span<const Rational> v) const {
  int p = dim();
  RVector xy(2 * p);
  for (int i = 0; i < p; ++i) xy[i] = u[i];
  for (int i = 0; i < p; ++i) xy[p + i] = v[i];
  RVector out(p);
  for (int j = 0; j < p; ++j) out[j] = s_polys_[j].eval(xy);
  return out;
}

std::vector<double> GroupStructure::dilate(double lambda, std::span<const double> u) const {
  std::vector<double> out(dim());
  for (int i = 0; i < dim(); ++i) out[i] = std::pow(lambda, basis_.weights[i]) * u[i];
  return out;
}

RVector GroupStructure::dilate_exact(const Rational& lambda, std::span<const Rational> u) const {
  RVector out(dim());
  for (int i = 0; i < dim(); ++i) {
    Rational f = 1;
    for (int k = 0; k < basis_.weights[i]; ++k) f *= lambda;
    out[i] = f * u[i];
  }
  return out;
}

double GroupStructure::homogeneous_norm(std::span<const double> u) const {
  double norm = 0;
  for (int k = 1; k <= basis_.r; ++k) {
    double slice = 0;
    for (int i = 0; i < dim(); ++i)
      if (basis_.weights[i] == k) slice += std::abs(u[i]);
    if (slice > 0) norm += std::pow(slice, 1.0 / k);
  }
  return norm;
}

const VectorField& GroupStructure::left_invariant_field(int k) const {
  std::lock_guard<std::mutex> lk(y_mutex_);
  if (!y_built_[k]) {
    int p = dim();
    std::vector<Expr> coeff;
    coeff.reserve(p);
    for (int j = 0; j < p; ++j) {
      // d/dt S_j(x, t e_k) at t=0  =  dS_j/dy_k (x, 0)
      Poly d = s_polys_[j].derivative(p + k).truncate_vars(p);
      coeff.push_back(d.to_expr());
    }
    y_fields_[k] = VectorField(std::move(coeff));
    y_built_[k] = true;
  }
  return y_fields_[k];
}

WeightedSystem GroupStructure::as_system() const {
  int p = dim();
  std::vector<VectorField> fields;
  if (basis_.with_x0) {
    int k0 = basis_.index_of(MultiIndex{0});
    fields.push_back(left_invariant_field(k0));
  }
  for (int i = 1; i <= basis_.n; ++i) {
    int ki = basis_.index_of(MultiIndex{i});
    fields.push_back(left_invariant_field(ki));
  }
  Box region{std::vector<double>(p, -4.0), std::vector<double>(p, 4.0)};
  return WeightedSystem(p, basis_.n, basis_.with_x0, basis_.r, 1.0, std::move(fields), region);
}

void GroupStructure::verify_bch() const {
  int p = dim();
  int poly_vars = 2 * p;
  Series xi, eta, w;
  for (int k = 0; k < p; ++k) {
    Poly xk = Poly::variable(poly_vars, k);
    Poly yk = Poly::variable(poly_vars, p + k);
    for (const auto& [word, c] : combos_[k].terms) {
      auto add = [&](Series& s, const Poly& v) {
        Poly t = v.scaled(c);
        auto it = s.find(word);
        if (it == s.end()) s.emplace(word, std::move(t));
        else it->second = it->second + t;
      };
      add(xi, xk);
      add(eta, yk);
      add(w, s_polys_[k]);
    }
  }
  Series lhs = series_mul(series_exp(xi, r(), poly_vars), series_exp(eta, r(), poly_vars), r());
  Series rhs = series_exp(w, r(), poly_vars);
  for (auto it = lhs.begin(); it != lhs.end();) {
    if (it->second.is_zero()) it = lhs.erase(it);
    else ++it;
  }
  for (auto it = rhs.begin(); it != rhs.end();) {
    if (it->second.is_zero()) it = rhs.erase(it);
    else ++it;
  }
  if (lhs.size() != rhs.size())
    throw Error(Error::Code::Internal, "BCH verification failed (support mismatch)");
  for (const auto& [word, pl] : lhs) {
    auto it = rhs.find(word);
    if (it == rhs.end() || !(pl == it->second))
      throw Error(Error::Code::Internal, "BCH verification failed at word " + word.str());
  }
}

std::string GroupStructure::to_json_string() const {
  nlohmann::ordered_json j;
  j["n"] = basis_.n;
  j["with_x0"] = basis_.with_x0;
  j["r"] = basis_.r;
  j["dim"] = dim();
  j["homogeneous_dimension"] = Q();
  nlohmann::ordered_json elems = nlohmann::ordered_json::array();
  for (int k = 0; k < dim(); ++k) {
    nlohmann::ordered_json e;
    e["bracket"] = std::vector<int>(basis_.elems[k].idx.begin(), basis_.elems[k].idx.end());
    e["weight"] = basis_.weights[k];
    elems.push_back(e);
  }
  j["basis"] = elems;

  auto rat = [](const Rational& c) {
    return nlohmann::ordered_json::array({numerator(c).str(), denominator(c).str()});
  };

  nlohmann::ordered_json sc = nlohmann::ordered_json::array();
  for (int i = 0; i < dim(); ++i) {
    for (int jdx = i + 1; jdx < dim(); ++jdx) {
      const auto& entry = structure(i, jdx);
      if (entry.empty()) continue;
      nlohmann::ordered_json rec;
      rec["i"] = i;
      rec["j"] = jdx;
      nlohmann::ordered_json terms = nlohmann::ordered_json::array();
      for (const auto& [k, c] : entry)
        terms.push_back(nlohmann::ordered_json::array({k, rat(c)}));
      rec["bracket"] = terms;
      sc.push_back(rec);
    }
  }
  j["structure_constants"] = sc;

  nlohmann::ordered_json bch = nlohmann::ordered_json::array();
  for (int k = 0; k < dim(); ++k) {
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& [m, c] : s_polys_[k].terms()) {
      nlohmann::ordered_json t;
      t["coeff"] = rat(c);
      t["powers"] = m;
      terms.push_back(t);
    }
    bch.push_back(terms);
  }
  j["bch_polynomials"] = bch;
  return j.dump(2);
}

}  // namespace hvf
