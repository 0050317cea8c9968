#include "run.hpp"

#include "approx.hpp"
#include "lifting.hpp"
#include "metrics.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace hvf {

using nlohmann::ordered_json;

namespace {

struct StageContext {
  const ExperimentConfig& cfg;
  WeightedSystem sys;                 // current system (lifted when the lift stage ran)
  std::vector<Eigen::VectorXd> base_points;
  bool lifted = false;
  int original_p = 0;
};

char hexdigit(int v) { return v < 10 ? static_cast<char>('0' + v) : static_cast<char>('a' + v - 10); }

std::string hash_hex(std::uint64_t h) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = hexdigit(static_cast<int>(h & 0xF));
    h >>= 4;
  }
  return s;
}

ordered_json header_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["library_version"] = kVersion;
  j["config_hash"] = hash_hex(cfg.config_hash());
  j["seed"] = cfg.seed;
  j["system"] = cfg.system_name;
  return j;
}

ChartMode chart_mode(const ExperimentConfig& cfg, const WeightedSystem& sys) {
  if (sys.nonsmooth()) return ChartMode::Regularized;
  return cfg.mode == "regularized" ? ChartMode::Regularized : ChartMode::Smooth;
}

// ---------------------------------------------------------------------------

ordered_json stage_lift(StageContext& ctx, bool& pass) {
  ordered_json out = ordered_json::array();
  std::vector<Eigen::VectorXd> new_points;
  bool all_ok = true;
  LiftResult last{ctx.sys, 0, {}, ctx.sys.p()};
  for (const auto& bp : ctx.base_points) {
    LiftResult res = lift(ctx.sys, std::span<const double>(bp.data(), bp.size()));
    ordered_json entry = ordered_json::parse(res.to_json_string());

    // Projection: dropping the added variables recovers the original fields.
    bool projection_ok = true;
    std::vector<int> letters;
    if (ctx.sys.with_x0()) letters.push_back(0);
    for (int i = 1; i <= ctx.sys.n(); ++i) letters.push_back(i);
    for (int letter : letters) {
      const auto& orig = ctx.sys.field(letter);
      const auto& lifted = res.lifted.field(letter);
      for (int j = 0; j < ctx.sys.p(); ++j)
        if (!orig.coeff[j].same_tree(lifted.coeff[j])) projection_ok = false;
    }
    // Triangularity: step j may only use variables x, t_1..t_{j-1}.
    bool triangular_ok = true;
    for (std::size_t s = 0; s < res.steps.size(); ++s) {
      for (const auto& u : res.steps[s].u)
        if (max_var_index(u) >= ctx.sys.p() + static_cast<int>(s)) triangular_ok = false;
    }
    entry["projection_exact"] = projection_ok;
    entry["triangular"] = triangular_ok;
    all_ok = all_ok && projection_ok && triangular_ok;

    Eigen::VectorXd ext = Eigen::VectorXd::Zero(res.lifted.p());
    ext.head(bp.size()) = bp;
    new_points.push_back(ext);
    last = std::move(res);
    out.push_back(entry);
  }
  // Downstream stages operate on the lifted system of the last base point
  // (base points beyond the first are lifted independently for reporting).
  ctx.sys = last.lifted;
  ctx.lifted = true;
  ctx.base_points = std::move(new_points);
  pass = all_ok;
  return out;
}

ordered_json stage_chart(StageContext& ctx, bool& pass) {
  ordered_json out = ordered_json::array();
  bool all_ok = true;
  for (const auto& bp : ctx.base_points) {
    ChartOptions opts;
    opts.mode = chart_mode(ctx.cfg, ctx.sys);
    Chart chart(ctx.sys, bp, opts);
    ordered_json entry = ordered_json::parse(chart.diagnostics_json());

    double radius = chart.validity_radius();
    double rt_scale = radius > 0 ? radius / 2 : 0.05;
    CounterRng rng(ctx.cfg.seed ^ 0xABCD1234u);
    double worst_rt = 0.0;
    int p = chart.dim();
    for (int k = 0; k < 100; ++k) {
      Eigen::VectorXd u(p);
      for (int i = 0; i < p; ++i)
        u[i] = rng.uniform(k, i, -1.0, 1.0) * std::pow(rt_scale, chart.weights()[i]);
      Eigen::VectorXd x = chart.exp_flow(u);
      Eigen::VectorXd v = chart.theta(x);
      worst_rt = std::max(worst_rt, (v - u).cwiseAbs().maxCoeff());
    }
    entry["roundtrip_max_error"] = worst_rt;
    entry["roundtrip_samples"] = 100;
    bool ok = worst_rt <= ctx.cfg.tol.roundtrip;

    if (chart.mode() == ChartMode::Smooth) {
      // Antisymmetry of Theta in smooth mode.
      double worst_as = 0.0;
      for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd eta = bp, xi = bp;
        for (int i = 0; i < p; ++i) {
          eta[i] += rng.uniform(1000 + k, i, -0.1, 0.1);
          xi[i] += rng.uniform(2000 + k, i, -0.1, 0.1);
        }
        Chart ce(ctx.sys, eta, opts);
        Chart cx(ctx.sys, xi, opts);
        Eigen::VectorXd a = ce.theta(xi), b = cx.theta(eta);
        worst_as = std::max(worst_as, (a + b).cwiseAbs().maxCoeff());
      }
      entry["antisymmetry_max_error"] = worst_as;
      ok = ok && worst_as <= ctx.cfg.tol.antisymmetry;
    }

    // Jacobian at 0 against the symbolic frame.
    Eigen::MatrixXd j0 = chart.exp_jacobian(Eigen::VectorXd::Zero(p));
    double frame_err = (j0 - chart.frame_at_center()).cwiseAbs().maxCoeff();
    entry["jacobian_at_zero_error"] = frame_err;
    ok = ok && frame_err <= 1e-7 * std::max(1.0, chart.frame_at_center().cwiseAbs().maxCoeff());

    entry["pass"] = ok;
    all_ok = all_ok && ok;
    out.push_back(entry);
  }
  pass = all_ok;
  return out;
}

ordered_json stage_metrics(StageContext& ctx, bool& pass,
                           std::map<std::string, std::string>& artifacts) {
  ordered_json out = ordered_json::array();
  bool all_ok = true;
  int idx = 0;
  for (const auto& bp : ctx.base_points) {
    ChartOptions copts;
    copts.mode = chart_mode(ctx.cfg, ctx.sys);
    ChartFactory factory(ctx.sys, copts);
    MetricsOptions mopts;
    mopts.pairs = ctx.cfg.pairs;
    mopts.triples = ctx.cfg.triples;
    mopts.cc.segments = ctx.cfg.segments;
    MetricReport rep =
        fit_reports(factory, bp, ctx.cfg.radii, ctx.cfg.samples, ctx.cfg.seed, mopts);

    ordered_json entry = ordered_json::parse(rep.to_json_string());
    bool ok = std::abs(rep.q_hat - rep.Q_chart) <= ctx.cfg.tol.q_fit;
    double expected_doubling = std::pow(2.0, rep.Q_chart);
    for (const auto& d : rep.doubling)
      if (std::abs(d[1] / expected_doubling - 1.0) > ctx.cfg.tol.doubling_rel) ok = false;
    if (rep.pairs_used > 0) {
      if (!(rep.c1_rho_over_d > 0) ||
          rep.c2_rho_over_d / rep.c1_rho_over_d > ctx.cfg.tol.equivalence_spread)
        ok = false;
      if (!(rep.fp_c1 > 0) || !std::isfinite(rep.fp_c2)) ok = false;
    }
    if (rep.triples_used > 0 && rep.quasi_triangle > ctx.cfg.tol.quasi_triangle) ok = false;
    if (!rep.ball_in_box) ok = false;
    entry["pass"] = ok;
    all_ok = all_ok && ok;
    out.push_back(entry);

    std::string suffix = ctx.base_points.size() > 1 ? "_bp" + std::to_string(idx) : "";
    artifacts["volumes" + suffix + ".csv"] = rep.volumes_csv();
    ++idx;
  }
  pass = all_ok;
  return out;
}

ordered_json stage_approx(StageContext& ctx, bool& pass,
                          std::map<std::string, std::string>& artifacts) {
  ordered_json out = ordered_json::array();
  bool all_ok = true;
  GroupStructure group(ctx.sys.n(), ctx.sys.with_x0(), ctx.sys.r());
  int idx = 0;
  for (const auto& bp : ctx.base_points) {
    ChartOptions copts;
    copts.mode = chart_mode(ctx.cfg, ctx.sys);
    copts.fixed_basis = group.basis().elems;
    Chart chart(ctx.sys, bp, copts);

    ordered_json entry;
    entry["base_point"] = std::vector<double>(bp.data(), bp.data() + bp.size());
    entry["mode"] = chart.mode() == ChartMode::Smooth ? "smooth" : "regularized";

    OrderOptions oopts;
    oopts.margin = ctx.cfg.tol.order_margin;
    oopts.alpha = chart.mode() == ChartMode::Regularized && ctx.sys.nonsmooth()
                      ? ctx.sys.alpha()
                      : 1.0;
    double radius = chart.validity_radius();
    double scale = radius > 0 ? radius / 2 : 0.05;
    // Shrink the dilation grid into the validity region.
    for (auto& l : oopts.lambdas) l *= scale / 0.25;

    bool orders_ok = true;
    std::vector<OrderEstimate> rows;
    CounterRng rng(ctx.cfg.seed ^ 0x77AA77u);
    int p = chart.dim();
    std::vector<Eigen::VectorXd> directions;
    directions.push_back(Eigen::VectorXd::Ones(p));
    for (int d = 1; d < 3; ++d) {
      Eigen::VectorXd v(p);
      for (int i = 0; i < p; ++i) v[i] = rng.uniform(d, i, -1.0, 1.0);
      directions.push_back(v);
    }
    for (const auto& I : chart.basis()) {
      for (const auto& dir : directions) {
        auto ests = weight_order_estimates(chart, group, I, dir, oopts);
        for (const auto& e : ests) {
          orders_ok = orders_ok && e.pass;
          rows.push_back(e);
        }
      }
    }
    entry["order_estimates"] = rows.size();
    entry["orders_pass"] = orders_ok;

    auto grid = default_jacobian_grid(chart, scale);
    JacobianCheck jc = jacobian_check(chart, grid);
    entry["jacobian_c"] = jc.c;
    entry["jacobian_K"] = jc.K;
    entry["jacobian_rel_dev_per_norm"] = jc.max_rel_dev_per_norm;
    entry["jacobian_cJ_minus_one"] = jc.cJ_minus_one;
    bool jac_ok = jc.cJ_minus_one <= ctx.cfg.tol.jacobian_product && std::isfinite(jc.K);

    bool holder_ok = true;
    if (ctx.sys.nonsmooth()) {
      // Theta and its Jacobian as functions of the base point.
      Eigen::VectorXd x0 = bp;
      for (int i = 0; i < p; ++i) x0[i] += 0.02;
      std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> probes;
      for (int d = 0; d < std::min(p, 4); ++d) {
        for (int k = 2; k <= 6; ++k) {
          Eigen::VectorXd a = bp, b = bp;
          a[d] += std::pow(2.0, -k) * 0.2;
          probes.emplace_back(a, b);
        }
      }
      auto theta_of = [&](const Eigen::VectorXd& z) {
        ChartOptions o = copts;
        Chart cz(ctx.sys, z, o);
        return cz.theta(x0);
      };
      auto jac_of = [&](const Eigen::VectorXd& z) {
        ChartOptions o = copts;
        Chart cz(ctx.sys, z, o);
        Eigen::VectorXd u = cz.theta(x0);
        Eigen::MatrixXd ji = cz.exp_jacobian(u).inverse();
        return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(ji.data(), ji.size()));
      };
      HolderEstimate ht = holder_exponent_estimate(theta_of, probes);
      HolderEstimate hj = holder_exponent_estimate(jac_of, probes);
      entry["theta_holder_exponent"] = ht.exact ? 1.0 : ht.exponent;
      entry["theta_jacobian_holder_exponent"] = hj.exact ? 1.0 : hj.exponent;
      double floor = ctx.sys.alpha() - ctx.cfg.tol.holder_margin;
      holder_ok = (ht.exact || ht.exponent >= floor) && (hj.exact || hj.exponent >= floor);

      // Base-point continuity of the remainder fields, measured in the sup
      // norm over a fixed grid in the half-validity box (the choice of norm
      // is recorded here).
      auto rem_of = [&](const Eigen::VectorXd& z) {
        ChartOptions o = copts;
        Chart cz(ctx.sys, z, o);
        auto ugrid = default_jacobian_grid(cz, scale / 2, 2, 2);
        Eigen::VectorXd acc(static_cast<int>(chart.basis().size()));
        int bi = 0;
        for (const auto& I : chart.basis()) {
          double worst = 0;
          for (const auto& u : ugrid)
            worst = std::max(worst, remainder_field(cz, group, I, u).cwiseAbs().maxCoeff());
          acc[bi++] = worst;
        }
        return acc;
      };
      HolderEstimate hr = holder_exponent_estimate(rem_of, probes);
      entry["remainder_holder_exponent"] = hr.exact ? 1.0 : hr.exponent;
      entry["remainder_holder_norm"] = "sup over fixed grid in the half-validity box";
    }

    bool ok = orders_ok && jac_ok && holder_ok;
    entry["pass"] = ok;
    all_ok = all_ok && ok;
    out.push_back(entry);

    std::string suffix = ctx.base_points.size() > 1 ? "_bp" + std::to_string(idx) : "";
    artifacts["orders" + suffix + ".csv"] = order_estimates_csv(rows, chart.basis());
    ++idx;
  }
  pass = all_ok;
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  RunResult result;
  try {
    StageContext ctx{cfg, cfg.build_system(), cfg.base_points, false, cfg.p};

    ordered_json report = header_json(cfg);
    ordered_json stage_results;
    bool all_pass = true;

    for (const std::string& stage : cfg.stages) {
      bool pass = true;
      if (stage == "lift") {
        stage_results["lift"] = stage_lift(ctx, pass);
        result.artifacts["lift.json"] = stage_results["lift"].dump(2);
      } else if (stage == "chart") {
        stage_results["chart"] = stage_chart(ctx, pass);
        result.artifacts["chart.json"] = stage_results["chart"].dump(2);
      } else if (stage == "metrics") {
        stage_results["metrics"] = stage_metrics(ctx, pass, result.artifacts);
        result.artifacts["metrics.json"] = stage_results["metrics"].dump(2);
      } else if (stage == "approx") {
        stage_results["approx"] = stage_approx(ctx, pass, result.artifacts);
        result.artifacts["approx.json"] = stage_results["approx"].dump(2);
      }
      stage_results[stage + "_pass"] = pass;
      all_pass = all_pass && pass;
    }

    report["stages"] = cfg.stages;
    report["results"] = stage_results;
    report["pass"] = all_pass;
    result.artifacts["report.json"] = report.dump(2);
    result.exit_code = all_pass ? 0 : 1;
    if (!all_pass) result.message = "verification margins not met (see report.json)";
  } catch (const Error& e) {
    result.exit_code = (e.code == Error::Code::Config || e.code == Error::Code::Parse) ? 2 : 3;
    result.message = e.what();
    result.artifacts.clear();
  } catch (const std::exception& e) {
    result.exit_code = 3;
    result.message = e.what();
    result.artifacts.clear();
  }
  return result;
}

RunResult run_config_text(const std::string& config_json, const std::string& out_dir) {
  RunResult result;
  ExperimentConfig cfg;
  try {
    cfg = parse_config(config_json);
  } catch (const Error& e) {
    result.exit_code = 2;
    result.message = e.what();
    return result;
  }
  result = run_experiment(cfg);
  if (result.exit_code <= 1 && !out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, content] : result.artifacts) {
      std::ofstream f(std::filesystem::path(out_dir) / name, std::ios::binary);
      f << content;
    }
  }
  return result;
}

}  // namespace hvf
