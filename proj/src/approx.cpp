#include "approx.hpp"

#include "rng.hpp"

#include <cmath>
#include <cstdio>

namespace hvf {

Eigen::VectorXd remainder_field(const Chart& chart, const GroupStructure& g,
                                const MultiIndex& I, const Eigen::VectorXd& u) {
  if (chart.dim() != g.dim())
    throw Error(Error::Code::Precondition, "chart and group dimensions differ");
  for (int k = 0; k < chart.dim(); ++k)
    if (!(chart.basis()[k] == g.basis().elems[k]))
      throw Error(Error::Code::Precondition, "chart basis does not match the group basis");

  Eigen::VectorXd push = chart.pushforward(chart.system().nested_bracket(I), u);
  int k = g.basis().index_of(I);
  Eigen::VectorXd model(chart.dim());
  if (k >= 0) {
    const VectorField& y = g.left_invariant_field(k);
    std::vector<double> ud(u.data(), u.data() + u.size());
    model = y.eval(ud);
  } else {
    // Off-basis bracket: expand through the structure of the free algebra by
    // evaluating Y_[I] as the nested bracket of the generator fields.
    WeightedSystem ysys = g.as_system();
    std::vector<double> ud(u.data(), u.data() + u.size());
    model = ysys.nested_bracket(I).eval(ud);
  }
  return push - model;
}

std::vector<OrderEstimate> weight_order_estimates(const Chart& chart, const GroupStructure& g,
                                                  const MultiIndex& I,
                                                  const Eigen::VectorXd& direction,
                                                  const OrderOptions& opts) {
  int p = chart.dim();
  double norm = chart.hom_norm(direction);
  if (norm <= 0) throw Error(Error::Code::Precondition, "zero direction");
  Eigen::VectorXd dir = chart.dilate(1.0 / norm, direction);

  // Samples of the remainder along the ray.
  std::vector<Eigen::VectorXd> values;
  for (double lam : opts.lambdas)
    values.push_back(remainder_field(chart, g, I, chart.dilate(lam, dir)));

  std::vector<OrderEstimate> out;
  for (int j = 0; j < p; ++j) {
    OrderEstimate est;
    est.I = I;
    est.J_index = j;
    est.floor_bound = opts.alpha - I.weight() + chart.weights()[j];

    std::vector<double> lx, ly;
    for (std::size_t s = 0; s < opts.lambdas.size(); ++s) {
      double v = std::abs(values[s][j]);
      if (v > opts.noise_floor) {
        lx.push_back(std::log(opts.lambdas[s]));
        ly.push_back(std::log(v));
      }
    }
    est.points_used = static_cast<int>(lx.size());
    if (lx.size() < 3) {
      est.vanishing = true;
      est.pass = true;
      out.push_back(est);
      continue;
    }
    double n = static_cast<double>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sx += lx[i];
      sy += ly[i];
      sxx += lx[i] * lx[i];
      sxy += lx[i] * ly[i];
    }
    est.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double intercept = (sy - est.slope * sx) / n;
    double ss = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      double r = ly[i] - (intercept + est.slope * lx[i]);
      ss += r * r;
    }
    est.residual = std::sqrt(ss / n);
    est.pass = est.slope >= est.floor_bound - opts.margin;
    out.push_back(est);
  }
  return out;
}

HolderEstimate holder_exponent_estimate(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probes) {
  if (probes.size() < 2)
    throw Error(Error::Code::Precondition, "need at least two probe pairs");
  std::vector<double> lx, ly;
  bool all_equal = true;
  double sep_min = std::numeric_limits<double>::infinity(), sep_max = 0;
  for (const auto& [a, b] : probes) {
    double sep = (a - b).norm();
    if (sep <= 0) throw Error(Error::Code::Precondition, "coincident probe pair");
    sep_min = std::min(sep_min, sep);
    sep_max = std::max(sep_max, sep);
    double d = (f(a) - f(b)).norm();
    if (d > 0) {
      all_equal = false;
      lx.push_back(std::log(sep));
      ly.push_back(std::log(d));
    }
  }
  HolderEstimate est;
  est.pairs_used = static_cast<int>(lx.size());
  if (all_equal) {
    est.exact = true;
    est.exponent = std::numeric_limits<double>::infinity();
    return est;
  }
  if (sep_max <= sep_min * (1 + 1e-12))
    throw Error(Error::Code::Precondition, "degenerate probe set: all separations equal");
  double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double intercept = (sy - slope * sx) / n;
  double ss = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    double r = ly[i] - (intercept + slope * lx[i]);
    ss += r * r;
  }
  est.residual = std::sqrt(ss / n);
  est.exponent = std::min(slope, 1.0);  // Lipschitz or better reports as 1
  return est;
}

JacobianCheck jacobian_check(const Chart& chart, const std::vector<Eigen::VectorXd>& ugrid) {
  JacobianCheck out;
  out.c = chart.center_det();

  for (const auto& u : ugrid) {
    double nu = chart.hom_norm(u);
    if (nu <= 0) continue;
    double det = chart.exp_jacobian(u).determinant();
    if (det == 0.0)
      throw Error(Error::Code::Numeric, "singular Jacobian inside the grid (validity violation)");
    out.K = std::max(out.K, std::abs(det - out.c) / nu);
    out.max_rel_dev_per_norm = std::max(out.max_rel_dev_per_norm,
                                        std::abs(det / out.c - 1.0) / nu);
    ++out.grid_used;
  }

  // c(xbar) * J(xbar) = 1 where J is the Jacobian determinant of Theta at the
  // center; dE/du(0) comes from the variational flow, c from the symbolic
  // frame, so the product checks the two routes against each other.
  Eigen::MatrixXd a0 = chart.exp_jacobian(Eigen::VectorXd::Zero(chart.dim()));
  double j_theta = 1.0 / a0.determinant();
  out.cJ_minus_one = std::abs(out.c * j_theta - 1.0);
  return out;
}

std::vector<Eigen::VectorXd> default_jacobian_grid(const Chart& chart, double radius,
                                                   int directions, int scales) {
  CounterRng rng(0x7e4a11u);
  std::vector<Eigen::VectorXd> grid;
  int p = chart.dim();
  for (int d = 0; d < directions; ++d) {
    Eigen::VectorXd dir(p);
    for (int i = 0; i < p; ++i) dir[i] = rng.uniform(d, i, -1.0, 1.0);
    double norm = chart.hom_norm(dir);
    if (norm <= 0) continue;
    dir = chart.dilate(1.0 / norm, dir);
    for (int s = 1; s <= scales; ++s)
      grid.push_back(chart.dilate(radius / std::pow(2.0, s), dir));
  }
  return grid;
}

std::string order_estimates_csv(const std::vector<OrderEstimate>& rows,
                                const std::vector<MultiIndex>& basis) {
  std::string out = "I,J,slope,floor,residual,verdict\n";
  char buf[200];
  for (const auto& r : rows) {
    std::string verdict = r.vanishing ? "vanishing" : (r.pass ? "pass" : "fail");
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%s\n", r.I.str().c_str(),
                  basis[r.J_index].str().c_str(), r.vanishing ? 0.0 : r.slope, r.floor_bound,
                  r.residual, verdict.c_str());
    out += buf;
  }
  return out;
}

}  // namespace hvf
