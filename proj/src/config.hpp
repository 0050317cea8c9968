#ifndef HVF_CONFIG_HPP
#define HVF_CONFIG_HPP

#include "vf.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hvf {

inline constexpr const char* kVersion = "0.1.0";

// Experiment tolerances; the defaults match the documented margins.
struct Tolerances {
  double q_fit = 0.25;
  double doubling_rel = 0.15;
  double equivalence_spread = 20.0;
  double quasi_triangle = 3.0;
  double roundtrip = 1e-8;
  double antisymmetry = 1e-7;
  double order_margin = 0.2;
  double holder_margin = 0.1;
  double jacobian_product = 1e-7;
};

struct ExperimentConfig {
  std::string system_name;  // builtin name or "inline"
  int p = 0, n = 0, r = 0;
  bool with_x0 = false;
  double alpha = 1.0;
  std::vector<std::vector<std::string>> field_exprs;  // X0 first when with_x0
  std::vector<double> region_min, region_max;

  std::vector<std::string> stages;
  std::vector<Eigen::VectorXd> base_points;
  std::vector<double> radii = {0.05, 0.1, 0.2, 0.4};
  long samples = 100000;
  std::uint64_t seed = 0;
  std::string mode = "smooth";  // "smooth" | "regularized"
  int pairs = 200;
  int triples = 200;
  int segments = 4;
  Tolerances tol;

  std::string canonical_json() const;  // sorted-key dump used for hashing
  std::uint64_t config_hash() const;   // FNV-1a over the canonical dump

  WeightedSystem build_system() const;
};

// Parse and validate a config document. Throws Error(Config) on any problem.
ExperimentConfig parse_config(const std::string& json_text);

// Builtin families: abelian(p), heisenberg, grushin, kolmogorov,
// perturbed-heisenberg(alpha).
bool is_builtin_system(const std::string& name);
ExperimentConfig builtin_config(const std::string& name);

}  // namespace hvf

#endif
