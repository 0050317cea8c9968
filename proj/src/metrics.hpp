#ifndef HVF_METRICS_HPP
#define HVF_METRICS_HPP

#include "geom.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace hvf {

// Charts share one bracket basis per system ("fixed once and for all"); the
// factory pins the basis of the first chart it builds.
class ChartFactory {
 public:
  ChartFactory(WeightedSystem sys, ChartOptions opts);
  const Chart& at(const Eigen::VectorXd& xbar);
  const WeightedSystem& system() const { return sys_; }

 private:
  WeightedSystem sys_;
  ChartOptions opts_;
  std::map<std::vector<double>, std::unique_ptr<Chart>> cache_;
};

// rho(xi, eta) = ||Theta_eta(xi)|| in the chart at eta.
double quasidistance(ChartFactory& charts, const Eigen::VectorXd& xi, const Eigen::VectorXd& eta);

// x lies in Box(xbar, R): |Theta(x)_I| < R^{|I|} for every basis index.
bool box_membership(const Chart& chart, double R, const Eigen::VectorXd& x);

struct CcOptions {
  int segments = 4;
  int starts = 8;
  int bisect_iters = 10;
  int max_gn_iters = 10;
  double endpoint_tol = 1e-8;
  double ode_abstol = 1e-8;
  std::uint64_t seed = 1;
};

struct CcResult {
  bool ok = false;
  double delta = std::numeric_limits<double>::quiet_NaN();
  double endpoint_error = std::numeric_limits<double>::quiet_NaN();
  int segments = 0;
};

// Certified upper bound on the control distance d(center, y): bisection on
// delta with projected Gauss-Newton refinement of piecewise-constant controls
// |a_I| <= delta^{|I|}, seeded by the Theta coordinates (one admissible
// segment profile by construction). Doubling the segment count never
// increases the bound: each refinement level starts from the split controls
// of the previous one.
CcResult cc_distance_upper(const Chart& chart, const Eigen::VectorXd& y, const CcOptions& opts);

struct VolumePoint {
  double radius = 0;
  double volume = 0;
  double stderr_ = 0;
  long samples = 0;
};

// Monte-Carlo volume of {x : rho(xbar, x) < R} via the exact change of
// variables vol = integral over the u-box of 1{||u||<R} |det dE/du|.
// Counter-seeded per sample: bit-identical results for fixed (seed, samples).
VolumePoint ball_volume_mc(const Chart& chart, double R, long samples, std::uint64_t seed,
                           double ode_abstol = 1e-9);

struct MetricsOptions {
  int pairs = 200;
  int triples = 200;
  double pair_halfwidth_scale = 0.3;  // fraction of the region half-width
  CcOptions cc;
  double volume_ode_abstol = 1e-9;
};

struct MetricReport {
  std::vector<VolumePoint> volumes;
  int Q_chart = 0;
  double q_hat = 0, q_se = 0, q_residual = 0;
  std::vector<std::array<double, 3>> doubling;  // radius, ratio, stderr of ratio
  double c1_rho_over_d = 0, c2_rho_over_d = 0;  // min/max of rho / d_upper
  double fp_c1 = 0, fp_c2 = 0;                  // d >= c1|x-y|, d <= c2|x-y|^{1/r}
  double quasi_triangle = 0;
  double ballbox_C = 0;     // fitted: max over box samples of rho / R
  bool ball_in_box = true;  // sampled: rho < R implies box membership at R
  int pairs_used = 0, pair_failures = 0, triples_used = 0;
  long samples = 0;
  std::uint64_t seed = 0;
  int cc_segments = 0;

  std::string to_json_string() const;
  std::string volumes_csv() const;
};

MetricReport fit_reports(ChartFactory& charts, const Eigen::VectorXd& xbar,
                         const std::vector<double>& radii, long samples, std::uint64_t seed,
                         const MetricsOptions& opts);

}  // namespace hvf

#endif
