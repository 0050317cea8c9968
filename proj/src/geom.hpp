#ifndef HVF_GEOM_HPP
#define HVF_GEOM_HPP

#include "liealg.hpp"
#include "ode.hpp"
#include "vf.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hvf {

enum class ChartMode { Smooth, Regularized };

struct ChartOptions {
  ChartMode mode = ChartMode::Smooth;  // forced to Regularized on nonsmooth systems
  double ode_abstol = 1e-12;
  double newton_tol = 1e-10;
  int newton_max_iter = 60;
  bool fd_jacobian = false;  // central differences instead of the variational flow
  double basis_tol = 1e-9;
  double region_margin = 1.5;
  std::optional<std::vector<MultiIndex>> fixed_basis;
};

// Taylor polynomials of order (r - p_i) of every coefficient around xbar: the
// smooth fields S_i whose brackets agree with X_[I] at xbar up to weight r.
struct RegularizedFields {
  std::vector<VectorField> fields;  // same letter layout as the system
};
RegularizedFields taylor_regularize(const WeightedSystem& sys, std::span<const double> xbar);

// Canonical (or regularized canonical) coordinates around one base point:
// E(u) = exp(sum_I u_I F_[I])(xbar) for the bracket basis B, its inverse
// Theta, and the induced pushforwards.
class Chart {
 public:
  Chart(WeightedSystem sys, Eigen::VectorXd xbar, ChartOptions opts = {});

  int dim() const { return p_; }
  ChartMode mode() const { return mode_; }
  const Eigen::VectorXd& center() const { return xbar_; }
  const WeightedSystem& system() const { return sys_; }
  const WeightedSystem& flow_system() const { return flow_sys_; }
  const std::vector<MultiIndex>& basis() const { return basis_; }
  const std::vector<int>& weights() const { return weights_; }
  int Q() const;
  const ChartOptions& options() const { return opts_; }

  const VectorField& flow_field(int k) const { return flow_fields_[k]; }
  const Eigen::MatrixXd& frame_at_center() const { return frame0_; }
  double center_det() const { return det0_; }

  double hom_norm(const Eigen::VectorXd& u) const;
  Eigen::VectorXd dilate(double lambda, const Eigen::VectorXd& u) const;

  // abstol < 0 means the chart default.
  Eigen::VectorXd exp_flow(const Eigen::VectorXd& u, double abstol = -1) const;
  Eigen::MatrixXd exp_jacobian(const Eigen::VectorXd& u, double abstol = -1) const;
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> exp_flow_with_jacobian(const Eigen::VectorXd& u,
                                                                     double abstol = -1) const;

  Eigen::VectorXd theta(const Eigen::VectorXd& x) const;

  // Components of X expressed in u-coordinates, evaluated at u.
  Eigen::VectorXd pushforward(const VectorField& X, const Eigen::VectorXd& u) const;

  // Integrate the piecewise-constant control path: on segment s (time 1/rows
  // each) the velocity is sum_k a(s,k) F_[B_k]. Starts at the chart center.
  Eigen::VectorXd flow_controls(const Eigen::MatrixXd& a, double abstol) const;

  double validity_radius() const;  // estimated lazily, memoized

  std::string diagnostics_json() const;

 private:
  struct CompiledField {
    std::vector<CompiledExpr> coeff;
    std::vector<std::vector<CompiledExpr>> dcoeff;  // dcoeff[j][l] = d coeff_j / d x_l
  };

  void flow_rhs(const Eigen::VectorXd& u, const double* y, double* dy) const;
  void flow_var_rhs(const Eigen::VectorXd& u, const double* y, double* dy) const;

  WeightedSystem sys_;
  WeightedSystem flow_sys_;
  ChartMode mode_;
  ChartOptions opts_;
  Eigen::VectorXd xbar_;
  int p_;
  std::vector<MultiIndex> basis_;
  std::vector<int> weights_;
  std::vector<VectorField> flow_fields_;
  std::vector<CompiledField> compiled_;
  Eigen::MatrixXd frame0_;
  double det0_ = 0.0;
  mutable std::optional<double> validity_;
  mutable std::mutex validity_mutex_;
};

}  // namespace hvf

#endif
