#ifndef HVF_APPROX_HPP
#define HVF_APPROX_HPP

#include "geom.hpp"
#include "liealg.hpp"
#include "metrics.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hvf {

// R_{xbar,[I]} at u: the pushforward of X_[I] into chart coordinates minus the
// left-invariant model field Y_[I]. The chart basis must equal the group basis.
Eigen::VectorXd remainder_field(const Chart& chart, const GroupStructure& g,
                                const MultiIndex& I, const Eigen::VectorXd& u);

struct OrderEstimate {
  MultiIndex I;
  int J_index = 0;           // coordinate (basis element) of the remainder component
  double slope = 0;          // fitted decay order along the dilation ray
  double floor_bound = 0;    // alpha - |I| + |J| (alpha = 1 in smooth mode)
  bool vanishing = false;    // all samples below the noise floor
  double residual = 0;
  int points_used = 0;
  bool pass = false;         // vanishing, or slope >= floor - margin
};

struct OrderOptions {
  std::vector<double> lambdas = {0.25, 0.176776695296636893, 0.125, 0.0883883476483184465,
                                 0.0625, 0.0441941738241592232, 0.03125,
                                 0.0220970869120796116, 0.015625, 0.0078125};
  double noise_floor = 1e-12;
  double margin = 0.2;
  double alpha = 1.0;  // 1 in smooth mode, system alpha in regularized mode
};

// Decay order of each remainder component along the dilation ray through
// `direction` (normalised to unit homogeneous norm).
std::vector<OrderEstimate> weight_order_estimates(const Chart& chart, const GroupStructure& g,
                                                  const MultiIndex& I,
                                                  const Eigen::VectorXd& direction,
                                                  const OrderOptions& opts);

struct HolderEstimate {
  double exponent = 0;   // capped at 1 for reporting
  bool exact = false;    // all samples identical
  double residual = 0;
  int pairs_used = 0;
};

// Fitted Hölder exponent of f from probe pairs (x1, x2) at geometrically
// spaced separations: slope of log||f(x1)-f(x2)|| against log|x1-x2|.
HolderEstimate holder_exponent_estimate(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& probes);

struct JacobianCheck {
  double c = 0;                  // det dE/du at u=0 (= det of the bracket frame)
  double max_rel_dev_per_norm = 0;  // max |det(u)/c - 1| / ||u||
  double K = 0;                  // max |det(u) - c| / ||u||
  double cJ_minus_one = 0;       // |c * J - 1| with J = det dTheta/dx at the center
  int grid_used = 0;
};

JacobianCheck jacobian_check(const Chart& chart, const std::vector<Eigen::VectorXd>& ugrid);

// Default grid: dilation images of a few deterministic directions.
std::vector<Eigen::VectorXd> default_jacobian_grid(const Chart& chart, double radius,
                                                   int directions = 6, int scales = 4);

std::string order_estimates_csv(const std::vector<OrderEstimate>& rows,
                                const std::vector<MultiIndex>& basis);

}  // namespace hvf

#endif
