#include "vf.hpp"

#include <Eigen/SVD>

#include <limits>

namespace hvf {

bool VectorField::is_zero() const {
  for (const auto& c : coeff)
    if (!c.is_zero()) return false;
  return true;
}

Expr VectorField::apply(const Expr& f) const {
  std::vector<Expr> terms;
  for (int j = 0; j < dim(); ++j) {
    if (coeff[j].is_zero()) continue;
    Expr df = differentiate(f, j);
    if (df.is_zero()) continue;
    terms.push_back(Expr::product({coeff[j], df}));
  }
  return Expr::sum(std::move(terms));
}

VectorField VectorField::extended(int new_dim) const {
  std::vector<Expr> c = coeff;
  while (static_cast<int>(c.size()) < new_dim) c.push_back(Expr::constant(0));
  return VectorField(std::move(c));
}

Eigen::VectorXd VectorField::eval(std::span<const double> x) const {
  Eigen::VectorXd v(dim());
  for (int j = 0; j < dim(); ++j) v[j] = evaluate(coeff[j], x);
  return v;
}

std::optional<RVector> VectorField::eval_exact(std::span<const Rational> x) const {
  RVector v(dim());
  for (int j = 0; j < dim(); ++j) {
    auto r = evaluate_exact(coeff[j], x);
    if (!r) return std::nullopt;
    v[j] = *r;
  }
  return v;
}

VectorField bracket(const VectorField& X, const VectorField& Y) {
  if (X.dim() != Y.dim())
    throw Error(Error::Code::Precondition, "bracket of fields with different dimensions");
  int p = X.dim();
  std::vector<Expr> out;
  out.reserve(p);
  for (int k = 0; k < p; ++k) {
    std::vector<Expr> terms;
    for (int j = 0; j < p; ++j) {
      if (!X.coeff[j].is_zero()) {
        Expr d = differentiate(Y.coeff[k], j);
        if (!d.is_zero()) terms.push_back(Expr::product({X.coeff[j], d}));
      }
      if (!Y.coeff[j].is_zero()) {
        Expr d = differentiate(X.coeff[k], j);
        if (!d.is_zero()) terms.push_back(Expr::product({Expr::constant(-1), Y.coeff[j], d}));
      }
    }
    out.push_back(Expr::sum(std::move(terms)));
  }
  return VectorField(std::move(out));
}

bool Box::contains(std::span<const double> x, double margin) const {
  for (int i = 0; i < dim(); ++i) {
    double w = hi[i] - lo[i];
    if (x[i] < lo[i] - margin * w || x[i] > hi[i] + margin * w) return false;
  }
  return true;
}

Box Box::extended(double tlo, double thi) const {
  Box b = *this;
  b.lo.push_back(tlo);
  b.hi.push_back(thi);
  return b;
}

WeightedSystem::WeightedSystem(int p, int n, bool with_x0, int r, double alpha,
                               std::vector<VectorField> fields, Box region)
    : p_(p), n_(n), r_(r), with_x0_(with_x0), alpha_(alpha), region_(std::move(region)),
      fields_(std::move(fields)) {
  if (r_ < 1) throw Error(Error::Code::Config, "Hormander step r must be >= 1");
  if (!(alpha_ > 0 && alpha_ <= 1)) throw Error(Error::Code::Config, "alpha must be in (0,1]");
  int expect = n_ + (with_x0_ ? 1 : 0);
  if (static_cast<int>(fields_.size()) != expect)
    throw Error(Error::Code::Config, "field count does not match n/x0 declaration");
  for (const auto& f : fields_)
    if (f.dim() != p_) throw Error(Error::Code::Config, "field dimension mismatch");
  if (region_.dim() != p_) throw Error(Error::Code::Config, "region dimension mismatch");

  polynomial_ = true;
  for (const auto& f : fields_) {
    for (const auto& c : f.coeff) {
      if (has_holder_nodes(c)) nonsmooth_ = true;
      if (!expr_to_poly(c, p_)) polynomial_ = false;
    }
  }
}

const VectorField& WeightedSystem::field(int letter) const {
  if (with_x0_) {
    if (letter < 0 || letter > n_) throw Error(Error::Code::Precondition, "bad generator letter");
    return fields_[letter];
  }
  if (letter < 1 || letter > n_) throw Error(Error::Code::Precondition, "bad generator letter");
  return fields_[letter - 1];
}

const VectorField& WeightedSystem::nested_bracket(const MultiIndex& I) const {
  if (I.length() == 0) throw Error(Error::Code::Precondition, "empty multiindex");
  if (I.weight() > r_)
    throw Error(Error::Code::Precondition,
                "bracket weight " + std::to_string(I.weight()) + " exceeds r=" + std::to_string(r_));
  {
    std::lock_guard<std::mutex> lk(cache_->mutex);
    auto it = cache_->entries.find(I);
    if (it != cache_->entries.end()) return it->second;
  }
  VectorField value;
  if (I.length() == 1) {
    value = field(I.idx[0]);
  } else {
    const VectorField& head = field(I.idx[0]);
    const VectorField& rest = nested_bracket(I.tail());
    value = bracket(head, rest);
  }
  std::lock_guard<std::mutex> lk(cache_->mutex);
  auto [it, inserted] = cache_->entries.emplace(I, std::move(value));
  return it->second;
}

// ---------------------------------------------------------------------------

FreenessResult freeness_check(const WeightedSystem& sys, std::span<const double> x0,
                              int s, double tol) {
  if (s < 1 || s > sys.r())
    throw Error(Error::Code::Precondition, "freeness weight out of range");
  FreenessResult res;
  res.weight = s;
  res.index_set = sys.bracket_indices(s);
  int N = static_cast<int>(res.index_set.size());
  int p = sys.p();

  Eigen::MatrixXd M(p, N);
  for (int j = 0; j < N; ++j) M.col(j) = sys.nested_bracket(res.index_set[j]).eval(x0);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  double thresh = tol * std::max(smax, 1e-300);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > thresh) ++rank;
  res.span_dim = rank;

  // Kernel vectors live in the trailing columns of V.
  double worst = 0.0;
  int worst_col = -1;
  for (int c = rank; c < N; ++c) {
    Eigen::VectorXd a = svd.matrixV().col(c);
    // max_J |sum_I a_I A_IJ|
    std::map<Word, double> row;
    for (int i = 0; i < N; ++i) {
      if (a[i] == 0.0) continue;
      for (const auto& [w, k] : bracket_expansion(res.index_set[i]).terms)
        row[w] += a[i] * to_double(k);
    }
    double viol = 0.0;
    for (const auto& [w, v] : row) viol = std::max(viol, std::abs(v));
    if (viol > worst) {
      worst = viol;
      worst_col = c;
    }
  }
  res.max_violation = worst;
  const double viol_tol = 1e-6;
  if (worst <= viol_tol) {
    res.free = true;
    return res;
  }
  Eigen::VectorXd a = svd.matrixV().col(worst_col);
  double amax = a.cwiseAbs().maxCoeff();
  a /= amax;
  // Sign convention: first entry with |a_i| = 1 is positive.
  for (int i = 0; i < N; ++i) {
    if (std::abs(std::abs(a[i]) - 1.0) < 1e-12) {
      if (a[i] < 0) a = -a;
      break;
    }
  }
  res.certificate = a;
  return res;
}

ExactFreenessResult freeness_check_exact(const WeightedSystem& sys,
                                         std::span<const Rational> x0, int s) {
  if (!sys.polynomial_rational())
    throw Error(Error::Code::Precondition, "exact freeness needs polynomial rational coefficients");
  ExactFreenessResult res;
  res.weight = s;
  res.index_set = sys.bracket_indices(s);
  int N = static_cast<int>(res.index_set.size());
  int p = sys.p();

  RMatrix M(p, RVector(N, Rational(0)));
  for (int j = 0; j < N; ++j) {
    auto col = sys.nested_bracket(res.index_set[j]).eval_exact(x0);
    if (!col) throw Error(Error::Code::Internal, "exact evaluation failed");
    for (int i = 0; i < p; ++i) M[i][j] = (*col)[i];
  }
  res.span_dim = rational_rank(M);

  auto kernel = rational_kernel(M);
  RVector best;
  Rational best_viol = 0;
  for (const auto& a : kernel) {
    std::map<Word, Rational> row;
    for (int i = 0; i < N; ++i) {
      if (a[i] == 0) continue;
      for (const auto& [w, k] : bracket_expansion(res.index_set[i]).terms) {
        row[w] += a[i] * k;
      }
    }
    Rational viol = 0;
    for (const auto& [w, v] : row) {
      Rational av = abs(v);
      if (av > viol) viol = av;
    }
    if (viol > best_viol) {
      best_viol = viol;
      best = a;
    }
  }
  if (best_viol == 0) {
    res.free = true;
    return res;
  }
  Rational amax = 0;
  for (const auto& v : best) {
    Rational av = abs(v);
    if (av > amax) amax = av;
  }
  for (auto& v : best) v /= amax;
  for (const auto& v : best) {
    if (abs(v) == 1) {
      if (v < 0)
        for (auto& w : best) w = -w;
      break;
    }
  }
  res.certificate = std::move(best);
  return res;
}

double hormander_constant(const WeightedSystem& sys, int probes_per_axis) {
  int p = sys.p();
  auto idx = sys.bracket_indices(sys.r());

  std::vector<std::vector<double>> axes(p);
  for (int i = 0; i < p; ++i) {
    for (int k = 0; k < probes_per_axis; ++k) {
      double t = probes_per_axis == 1 ? 0.5 : static_cast<double>(k) / (probes_per_axis - 1);
      axes[i].push_back(sys.region().lo[i] + t * (sys.region().hi[i] - sys.region().lo[i]));
    }
  }
  std::vector<double> x(p);
  double cmin = std::numeric_limits<double>::infinity();
  std::vector<int> digit(p, 0);
  for (;;) {
    for (int i = 0; i < p; ++i) x[i] = axes[i][digit[i]];
    // Greedy volume pivoting over the bracket evaluations.
    Eigen::MatrixXd cols(p, idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) cols.col(j) = sys.nested_bracket(idx[j]).eval(x);
    Eigen::MatrixXd chosen(p, 0);
    Eigen::MatrixXd q(p, 0);
    for (int step = 0; step < p; ++step) {
      double best = 0.0;
      int bestj = -1;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        Eigen::VectorXd v = cols.col(j);
        if (q.cols() > 0) v -= q * (q.transpose() * v);
        if (v.norm() > best) {
          best = v.norm();
          bestj = static_cast<int>(j);
        }
      }
      if (bestj < 0 || best < 1e-14) return 0.0;
      Eigen::VectorXd v = cols.col(bestj);
      chosen.conservativeResize(p, chosen.cols() + 1);
      chosen.col(chosen.cols() - 1) = v;
      if (q.cols() > 0) v -= q * (q.transpose() * v);
      v.normalize();
      q.conservativeResize(p, q.cols() + 1);
      q.col(q.cols() - 1) = v;
    }
    cmin = std::min(cmin, std::abs(chosen.determinant()));

    int i = 0;
    while (i < p && ++digit[i] == probes_per_axis) digit[i++] = 0;
    if (i == p) break;
  }
  return cmin;
}

}  // namespace hvf
