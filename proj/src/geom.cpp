#include "geom.hpp"

#include "rng.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace hvf {

namespace {

Rational factorial_of(const std::vector<unsigned>& beta) {
  Rational f = 1;
  for (unsigned b : beta)
    for (unsigned k = 2; k <= b; ++k) f *= k;
  return f;
}

}  // namespace

RegularizedFields taylor_regularize(const WeightedSystem& sys, std::span<const double> xbar) {
  int p = sys.p();
  RVector xr(p);
  for (int i = 0; i < p; ++i) xr[i] = rational_from_double(xbar[i]);

  // (x_i - xbar_i) building blocks.
  std::vector<Poly> shift;
  for (int i = 0; i < p; ++i)
    shift.push_back(Poly::variable(p, i) - Poly::constant(p, xr[i]));

  RegularizedFields out;
  std::vector<int> letters;
  if (sys.with_x0()) letters.push_back(0);
  for (int i = 1; i <= sys.n(); ++i) letters.push_back(i);

  for (int letter : letters) {
    int order = sys.r() - letter_weight(letter);
    const VectorField& X = sys.field(letter);
    std::vector<Expr> coeff;
    coeff.reserve(p);
    for (int j = 0; j < p; ++j) {
      // All partial derivatives of b up to `order`, reusing lower-order trees.
      std::map<std::vector<unsigned>, Expr> derivs;
      derivs[std::vector<unsigned>(p, 0)] = X.coeff[j];
      Poly taylor(p);
      for (const auto& beta : monomials_up_to(p, order)) {
        auto it = derivs.find(beta);
        Expr d;
        if (it != derivs.end()) {
          d = it->second;
        } else {
          int v = 0;
          while (beta[v] == 0) ++v;
          std::vector<unsigned> prev = beta;
          prev[v] -= 1;
          d = differentiate(derivs.at(prev), v);
          derivs[beta] = d;
        }
        Rational value;
        if (auto ev = evaluate_exact(d, xr)) {
          value = *ev;
        } else {
          try {
            value = rational_from_double(evaluate(d, xbar));
          } catch (const EvalError&) {
            throw Error(Error::Code::Precondition,
                        "Taylor regularization: derivative undefined at the base point "
                        "(Hölder base vanishes)");
          }
        }
        if (value == 0) continue;
        Poly term = Poly::constant(p, value / factorial_of(beta));
        for (int v = 0; v < p; ++v)
          if (beta[v] > 0) term = term * shift[v].pow(beta[v]);
        taylor = taylor + term;
      }
      coeff.push_back(taylor.to_expr());
    }
    out.fields.push_back(VectorField(std::move(coeff)));
  }
  return out;
}

// ---------------------------------------------------------------------------

Chart::Chart(WeightedSystem sys, Eigen::VectorXd xbar, ChartOptions opts)
    : sys_(std::move(sys)),
      flow_sys_(sys_),
      opts_(opts),
      xbar_(std::move(xbar)),
      p_(sys_.p()) {
  if (xbar_.size() != p_) throw Error(Error::Code::Precondition, "base point dimension mismatch");
  mode_ = sys_.nonsmooth() ? ChartMode::Regularized : opts.mode;
  if (mode_ == ChartMode::Regularized) {
    std::vector<double> xb(xbar_.data(), xbar_.data() + p_);
    auto reg = taylor_regularize(sys_, xb);
    flow_sys_ = WeightedSystem(p_, sys_.n(), sys_.with_x0(), sys_.r(), sys_.alpha(),
                               std::move(reg.fields), sys_.region());
  }

  // Bracket basis B: greedy pivoted selection in canonical order.
  if (opts_.fixed_basis) {
    basis_ = *opts_.fixed_basis;
    if (static_cast<int>(basis_.size()) != p_)
      throw Error(Error::Code::Precondition, "fixed basis has wrong size");
  } else {
    auto candidates = flow_sys_.bracket_indices(flow_sys_.r());
    std::vector<Eigen::VectorXd> cols;
    std::vector<double> colnorm;
    double maxnorm = 0.0;
    for (const auto& I : candidates) {
      Eigen::VectorXd v = flow_sys_.nested_bracket(I).eval(
          std::span<const double>(xbar_.data(), p_));
      cols.push_back(v);
      colnorm.push_back(v.norm());
      maxnorm = std::max(maxnorm, v.norm());
    }
    if (maxnorm == 0.0)
      throw Error(Error::Code::Precondition, "all brackets vanish at the base point");
    Eigen::MatrixXd q(p_, 0);
    for (std::size_t c = 0; c < candidates.size() && static_cast<int>(basis_.size()) < p_; ++c) {
      Eigen::VectorXd v = cols[c];
      if (q.cols() > 0) v -= q * (q.transpose() * v);
      if (v.norm() > opts_.basis_tol * maxnorm) {
        basis_.push_back(candidates[c]);
        v.normalize();
        q.conservativeResize(p_, q.cols() + 1);
        q.col(q.cols() - 1) = v;
      }
    }
    if (static_cast<int>(basis_.size()) < p_)
      throw Error(Error::Code::Precondition,
                  "Hormander condition fails at the base point (no bracket basis)");
  }
  for (const auto& I : basis_) weights_.push_back(I.weight());

  frame0_.resize(p_, p_);
  for (int k = 0; k < p_; ++k) {
    flow_fields_.push_back(flow_sys_.nested_bracket(basis_[k]));
    frame0_.col(k) = flow_fields_[k].eval(std::span<const double>(xbar_.data(), p_));
  }
  det0_ = frame0_.determinant();
  if (det0_ == 0.0)
    throw Error(Error::Code::Precondition, "bracket frame is singular at the base point");

  compiled_.resize(p_);
  for (int k = 0; k < p_; ++k) {
    compiled_[k].coeff.reserve(p_);
    compiled_[k].dcoeff.resize(p_);
    for (int j = 0; j < p_; ++j) {
      compiled_[k].coeff.emplace_back(flow_fields_[k].coeff[j]);
      for (int l = 0; l < p_; ++l)
        compiled_[k].dcoeff[j].emplace_back(differentiate(flow_fields_[k].coeff[j], l));
    }
  }
}

int Chart::Q() const {
  int q = 0;
  for (int w : weights_) q += w;
  return q;
}

double Chart::hom_norm(const Eigen::VectorXd& u) const {
  double norm = 0;
  int rmax = flow_sys_.r();
  for (int k = 1; k <= rmax; ++k) {
    double slice = 0;
    for (int i = 0; i < p_; ++i)
      if (weights_[i] == k) slice += std::abs(u[i]);
    if (slice > 0) norm += std::pow(slice, 1.0 / k);
  }
  return norm;
}

Eigen::VectorXd Chart::dilate(double lambda, const Eigen::VectorXd& u) const {
  Eigen::VectorXd out(p_);
  for (int i = 0; i < p_; ++i) out[i] = std::pow(lambda, weights_[i]) * u[i];
  return out;
}

void Chart::flow_rhs(const Eigen::VectorXd& u, const double* y, double* dy) const {
  if (!flow_sys_.region().contains(std::span<const double>(y, p_), opts_.region_margin))
    throw EvalError("flow exits the region");
  for (int i = 0; i < p_; ++i) dy[i] = 0.0;
  for (int k = 0; k < p_; ++k) {
    double uk = u[k];
    if (uk == 0.0) continue;
    for (int i = 0; i < p_; ++i) dy[i] += uk * compiled_[k].coeff[i].eval(y);
  }
}

void Chart::flow_var_rhs(const Eigen::VectorXd& u, const double* y, double* dy) const {
  flow_rhs(u, y, dy);
  // A = DV(x), dM = A*M + [F_1(x) .. F_p(x)]
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p_, p_);
  for (int k = 0; k < p_; ++k) {
    double uk = u[k];
    if (uk == 0.0) continue;
    for (int i = 0; i < p_; ++i)
      for (int l = 0; l < p_; ++l) A(i, l) += uk * compiled_[k].dcoeff[i][l].eval(y);
  }
  Eigen::Map<const Eigen::MatrixXd> M(y + p_, p_, p_);
  Eigen::Map<Eigen::MatrixXd> dM(dy + p_, p_, p_);
  dM = A * M;
  for (int l = 0; l < p_; ++l)
    for (int i = 0; i < p_; ++i) dM(i, l) += compiled_[l].coeff[i].eval(y);
}

Eigen::VectorXd Chart::exp_flow(const Eigen::VectorXd& u, double abstol) const {
  if (u.size() != p_) throw Error(Error::Code::Precondition, "coordinate dimension mismatch");
  OdeOptions opt;
  opt.abstol = abstol > 0 ? abstol : opts_.ode_abstol;
  Eigen::VectorXd y = xbar_;
  return integrate_unit_time([&](const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    flow_rhs(u, s.data(), ds.data());
  }, y, opt);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> Chart::exp_flow_with_jacobian(
    const Eigen::VectorXd& u, double abstol) const {
  if (opts_.fd_jacobian) {
    Eigen::VectorXd x = exp_flow(u, abstol);
    Eigen::MatrixXd J(p_, p_);
    double h = 1e-6;
    for (int j = 0; j < p_; ++j) {
      Eigen::VectorXd up = u, um = u;
      up[j] += h;
      um[j] -= h;
      J.col(j) = (exp_flow(up, abstol) - exp_flow(um, abstol)) / (2 * h);
    }
    return {x, J};
  }
  OdeOptions opt;
  opt.abstol = abstol > 0 ? abstol : opts_.ode_abstol;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(p_ + p_ * p_);
  y.head(p_) = xbar_;
  Eigen::VectorXd out = integrate_unit_time([&](const Eigen::VectorXd& s, Eigen::VectorXd& ds) {
    flow_var_rhs(u, s.data(), ds.data());
  }, y, opt);
  Eigen::MatrixXd J = Eigen::Map<const Eigen::MatrixXd>(out.data() + p_, p_, p_);
  return {out.head(p_), J};
}

Eigen::MatrixXd Chart::exp_jacobian(const Eigen::VectorXd& u, double abstol) const {
  return exp_flow_with_jacobian(u, abstol).second;
}

Eigen::VectorXd Chart::theta(const Eigen::VectorXd& x) const {
  if (x.size() != p_) throw Error(Error::Code::Precondition, "point dimension mismatch");
  Eigen::PartialPivLU<Eigen::MatrixXd> frame_lu(frame0_);
  Eigen::VectorXd u = frame_lu.solve(x - xbar_);
  double resid = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < opts_.newton_max_iter; ++iter) {
    auto [e, jac] = exp_flow_with_jacobian(u);
    Eigen::VectorXd r = e - x;
    resid = r.cwiseAbs().maxCoeff();
    if (resid <= opts_.newton_tol) return u;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    Eigen::VectorXd delta = lu.solve(r);
    if (!delta.allFinite()) break;
    double lambda = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 5; ++bt) {
      Eigen::VectorXd trial = u - lambda * delta;
      double tr;
      try {
        tr = (exp_flow(trial) - x).cwiseAbs().maxCoeff();
      } catch (const EvalError&) {
        lambda *= 0.5;
        continue;
      }
      if (tr < resid) {
        u = trial;
        moved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!moved) break;
  }

  // Damped contraction fallback: u <- u + A0^{-1}(E(u) - x), with damping.
  for (int iter = 0; iter < 400; ++iter) {
    Eigen::VectorXd e;
    try {
      e = exp_flow(u);
    } catch (const EvalError&) {
      u *= 0.5;
      continue;
    }
    Eigen::VectorXd r = e - x;
    if (r.cwiseAbs().maxCoeff() <= opts_.newton_tol) return u;
    u -= 0.5 * frame_lu.solve(r);
  }
  throw Error(Error::Code::Numeric, "theta did not converge (point outside validity region?)");
}

Eigen::VectorXd Chart::flow_controls(const Eigen::MatrixXd& a, double abstol) const {
  OdeOptions opt;
  opt.abstol = abstol;
  int segments = static_cast<int>(a.rows());
  Eigen::VectorXd y = xbar_;
  for (int s = 0; s < segments; ++s) {
    // Unit-time integration of the segment field scaled by 1/segments.
    Eigen::VectorXd u = a.row(s).transpose() / segments;
    y = integrate_unit_time([&](const Eigen::VectorXd& st, Eigen::VectorXd& ds) {
      flow_rhs(u, st.data(), ds.data());
    }, y, opt);
  }
  return y;
}

Eigen::VectorXd Chart::pushforward(const VectorField& X, const Eigen::VectorXd& u) const {
  auto [e, jac] = exp_flow_with_jacobian(u);
  Eigen::VectorXd xval = X.eval(std::span<const double>(e.data(), p_));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
  Eigen::VectorXd w = lu.solve(xval);
  if (!w.allFinite())
    throw Error(Error::Code::Numeric, "pushforward Jacobian is singular at u");
  return w;
}

double Chart::validity_radius() const {
  std::lock_guard<std::mutex> lk(validity_mutex_);
  if (validity_) return *validity_;
  CounterRng rng(0x9a3f5b21u);
  const int probes = 32;
  double radius = 0.0;
  for (double R = 1.0; R >= 1.0 / 1024; R *= 0.5) {
    bool ok = true;
    for (int k = 0; k < probes && ok; ++k) {
      Eigen::VectorXd s(p_);
      double smax = 0.0;
      for (int i = 0; i < p_; ++i) {
        s[i] = rng.uniform(k, i, -1.0, 1.0);
        smax = std::max(smax, std::abs(s[i]));
      }
      if (smax == 0.0) s[0] = smax = 1.0;
      Eigen::VectorXd u(p_);
      for (int i = 0; i < p_; ++i) u[i] = (s[i] / smax) * std::pow(R, weights_[i]);
      try {
        Eigen::VectorXd x = exp_flow(u);
        Eigen::VectorXd v = theta(x);
        if ((v - u).cwiseAbs().maxCoeff() > 1e-7) ok = false;
      } catch (const Error&) {
        ok = false;
      }
    }
    if (ok) {
      radius = R;
      break;
    }
  }
  validity_ = radius;
  return radius;
}

std::string Chart::diagnostics_json() const {
  nlohmann::ordered_json j;
  j["mode"] = mode_ == ChartMode::Smooth ? "smooth" : "regularized";
  j["center"] = std::vector<double>(xbar_.data(), xbar_.data() + p_);
  nlohmann::ordered_json b = nlohmann::ordered_json::array();
  for (const auto& I : basis_) b.push_back(I.str());
  j["basis"] = b;
  j["weights"] = weights_;
  j["homogeneous_dimension"] = Q();
  j["validity_radius"] = validity_radius();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(frame0_);
  j["frame_condition_number"] =
      svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
  j["frame_determinant"] = det0_;
  j["ode_abstol"] = opts_.ode_abstol;
  j["newton_tol"] = opts_.newton_tol;
  return j.dump(2);
}

}  // namespace hvf
