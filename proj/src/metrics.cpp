#include "metrics.hpp"

#include "rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>

namespace hvf {

ChartFactory::ChartFactory(WeightedSystem sys, ChartOptions opts)
    : sys_(std::move(sys)), opts_(std::move(opts)) {}

const Chart& ChartFactory::at(const Eigen::VectorXd& xbar) {
  std::vector<double> key(xbar.data(), xbar.data() + xbar.size());
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;
  auto chart = std::make_unique<Chart>(sys_, xbar, opts_);
  if (!opts_.fixed_basis) opts_.fixed_basis = chart->basis();  // pin B once and for all
  return *cache_.emplace(std::move(key), std::move(chart)).first->second;
}

double quasidistance(ChartFactory& charts, const Eigen::VectorXd& xi, const Eigen::VectorXd& eta) {
  const Chart& chart = charts.at(eta);
  return chart.hom_norm(chart.theta(xi));
}

bool box_membership(const Chart& chart, double R, const Eigen::VectorXd& x) {
  Eigen::VectorXd u = chart.theta(x);
  for (int i = 0; i < chart.dim(); ++i)
    if (std::abs(u[i]) >= std::pow(R, chart.weights()[i])) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Control distance upper bound
// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd clamp_controls(Eigen::MatrixXd a, const std::vector<double>& bound) {
  for (int s = 0; s < a.rows(); ++s)
    for (int k = 0; k < a.cols(); ++k)
      a(s, k) = std::clamp(a(s, k), -bound[k], bound[k]);
  return a;
}

struct CcWork {
  const Chart& chart;
  const Eigen::VectorXd& y;
  const CcOptions& opts;
  long flow_budget;

  double endpoint_error(const Eigen::MatrixXd& a) {
    --flow_budget;
    return (chart.flow_controls(a, opts.ode_abstol) - y).cwiseAbs().maxCoeff();
  }

  // Projected Gauss-Newton refinement of the controls for fixed bounds.
  bool refine(Eigen::MatrixXd& a, const std::vector<double>& bound) {
    a = clamp_controls(a, bound);
    int nvar = static_cast<int>(a.size());
    int p = chart.dim();
    double lambda = 1e-8;
    double err = endpoint_error(a);
    for (int iter = 0; iter < opts.max_gn_iters && flow_budget > 0; ++iter) {
      if (err <= opts.endpoint_tol) return true;
      Eigen::VectorXd e = chart.flow_controls(a, opts.ode_abstol) - y;
      --flow_budget;
      Eigen::MatrixXd J(p, nvar);
      int col = 0;
      for (int s = 0; s < a.rows(); ++s) {
        for (int k = 0; k < a.cols(); ++k, ++col) {
          double h = 1e-6 * (1.0 + bound[k]);
          Eigen::MatrixXd ah = a;
          ah(s, k) += h;
          J.col(col) = (chart.flow_controls(ah, opts.ode_abstol) - y - e) / h;
          --flow_budget;
        }
      }
      bool improved = false;
      for (int attempt = 0; attempt < 5; ++attempt) {
        Eigen::MatrixXd H = J.transpose() * J + lambda * Eigen::MatrixXd::Identity(nvar, nvar);
        Eigen::VectorXd dx = H.ldlt().solve(-J.transpose() * e);
        Eigen::MatrixXd anew = a;
        int c2 = 0;
        for (int s = 0; s < a.rows(); ++s)
          for (int k = 0; k < a.cols(); ++k, ++c2) anew(s, k) += dx[c2];
        anew = clamp_controls(anew, bound);
        double enew = endpoint_error(anew);
        if (enew < err) {
          a = anew;
          err = enew;
          lambda = std::max(lambda / 3, 1e-10);
          improved = true;
          break;
        }
        lambda *= 10;
      }
      if (!improved) break;
    }
    return err <= opts.endpoint_tol;
  }
};

}  // namespace

CcResult cc_distance_upper(const Chart& chart, const Eigen::VectorXd& y, const CcOptions& opts) {
  CcResult res;
  res.segments = opts.segments;
  Eigen::VectorXd u0 = chart.theta(y);

  const auto& weights = chart.weights();
  int p = chart.dim();
  double delta = 0.0;
  for (int k = 0; k < p; ++k)
    delta = std::max(delta, std::pow(std::abs(u0[k]), 1.0 / weights[k]));
  if (delta == 0.0) {
    res.ok = true;
    res.delta = 0.0;
    res.endpoint_error = 0.0;
    return res;
  }

  CcWork work{chart, y, opts, 200000};
  CounterRng rng(opts.seed);
  std::uint64_t jitter_counter = 0;

  // The one-segment Theta profile is admissible at delta and endpoint-exact.
  Eigen::MatrixXd best = u0.transpose();
  {
    double e0 = work.endpoint_error(best);
    if (e0 > opts.endpoint_tol) {
      // Inflate until feasible (Theta/ODE tolerance slack).
      std::vector<double> bound(p);
      bool ok = false;
      for (int grow = 0; grow < 6 && !ok; ++grow) {
        delta *= 1.0 + 1e-3 * (1 << grow);
        for (int k = 0; k < p; ++k) bound[k] = std::pow(delta, weights[k]);
        Eigen::MatrixXd a = best;
        ok = work.refine(a, bound);
        if (ok) best = a;
      }
      if (!ok) {
        res.ok = false;
        return res;
      }
    }
  }

  int level_segments = 1;
  for (;;) {
    // Bisection at the current segment count, warm-started from `best`.
    double lo = 0.0, hi = delta;
    for (int it = 0; it < opts.bisect_iters && hi - lo > 0.02 * hi; ++it) {
      double mid = 0.5 * (lo + hi);
      std::vector<double> bound(p);
      for (int k = 0; k < p; ++k) bound[k] = std::pow(mid, weights[k]);
      bool ok = false;
      Eigen::MatrixXd winner;
      for (int start = 0; start < opts.starts && !ok; ++start) {
        Eigen::MatrixXd a = best;
        if (start > 0) {
          for (int s = 0; s < a.rows(); ++s)
            for (int k = 0; k < a.cols(); ++k)
              a(s, k) += bound[k] * rng.uniform(++jitter_counter, k, -0.4, 0.4);
        }
        if (work.refine(a, bound)) {
          ok = true;
          winner = a;
        }
        if (work.flow_budget <= 0) break;
      }
      if (ok) {
        hi = mid;
        best = winner;
      } else {
        lo = mid;
      }
      if (work.flow_budget <= 0) break;
    }
    delta = hi;
    if (level_segments >= opts.segments) break;
    // Split each segment in two; the path and its endpoint are unchanged.
    int next = std::min(level_segments * 2, opts.segments);
    Eigen::MatrixXd split(next, p);
    for (int s = 0; s < next; ++s) split.row(s) = best.row(s * level_segments / next);
    best = split;
    level_segments = next;
  }

  res.ok = true;
  res.delta = delta;
  res.endpoint_error = work.endpoint_error(best);
  return res;
}

// ---------------------------------------------------------------------------
// Ball volumes
// ---------------------------------------------------------------------------

VolumePoint ball_volume_mc(const Chart& chart, double R, long samples, std::uint64_t seed,
                           double ode_abstol) {
  int p = chart.dim();
  const auto& weights = chart.weights();
  double box_vol = 1.0;
  std::vector<double> half(p);
  for (int i = 0; i < p; ++i) {
    half[i] = std::pow(R, weights[i]);
    box_vol *= 2 * half[i];
  }
  CounterRng rng(seed);
  double acc = 0.0, acc2 = 0.0;
  Eigen::VectorXd u(p);
  for (long s = 0; s < samples; ++s) {
    for (int i = 0; i < p; ++i) u[i] = rng.uniform(static_cast<std::uint64_t>(s), i, -half[i], half[i]);
    double w = 0.0;
    if (chart.hom_norm(u) < R) {
      w = std::abs(chart.exp_flow_with_jacobian(u, ode_abstol).second.determinant());
    }
    acc += w;
    acc2 += w * w;
  }
  double mean = acc / samples;
  double var = std::max(acc2 / samples - mean * mean, 0.0);
  VolumePoint out;
  out.radius = R;
  out.volume = box_vol * mean;
  out.stderr_ = box_vol * std::sqrt(var / samples);
  out.samples = samples;
  return out;
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

MetricReport fit_reports(ChartFactory& charts, const Eigen::VectorXd& xbar,
                         const std::vector<double>& radii, long samples, std::uint64_t seed,
                         const MetricsOptions& opts) {
  MetricReport rep;
  rep.samples = samples;
  rep.seed = seed;
  rep.cc_segments = opts.cc.segments;

  const Chart& chart = charts.at(xbar);
  rep.Q_chart = chart.Q();
  int p = chart.dim();

  for (double R : radii)
    rep.volumes.push_back(ball_volume_mc(chart, R, samples, seed, opts.volume_ode_abstol));

  // Weighted least squares of log V against log R.
  {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& v : rep.volumes) {
      if (v.volume <= 0) continue;
      double se = v.stderr_ / v.volume;
      double w = se > 0 ? 1.0 / (se * se) : 1.0;
      double x = std::log(v.radius), y = std::log(v.volume);
      sw += w;
      sx += w * x;
      sy += w * y;
      sxx += w * x * x;
      sxy += w * x * y;
    }
    double denom = sw * sxx - sx * sx;
    rep.q_hat = (sw * sxy - sx * sy) / denom;
    rep.q_se = std::sqrt(sw / denom);
    double intercept = (sy - rep.q_hat * sx) / sw;
    double ss = 0;
    int cnt = 0;
    for (const auto& v : rep.volumes) {
      if (v.volume <= 0) continue;
      double r = std::log(v.volume) - (intercept + rep.q_hat * std::log(v.radius));
      ss += r * r;
      ++cnt;
    }
    rep.q_residual = cnt ? std::sqrt(ss / cnt) : 0.0;
  }

  for (const auto& v1 : rep.volumes) {
    for (const auto& v2 : rep.volumes) {
      if (std::abs(v2.radius - 2 * v1.radius) > 1e-12 * v1.radius) continue;
      if (v1.volume <= 0) continue;
      double ratio = v2.volume / v1.volume;
      double se = ratio * std::sqrt(std::pow(v1.stderr_ / v1.volume, 2) +
                                    std::pow(v2.stderr_ / v2.volume, 2));
      rep.doubling.push_back({v1.radius, ratio, se});
    }
  }

  const auto& region = charts.system().region();
  std::vector<double> center(xbar.data(), xbar.data() + p);
  std::vector<double> halfw(p);
  for (int i = 0; i < p; ++i)
    halfw[i] = opts.pair_halfwidth_scale * 0.5 * (region.hi[i] - region.lo[i]);

  CounterRng rng(seed ^ 0x5bd1e995u);
  auto draw_point = [&](std::uint64_t counter, int block) {
    Eigen::VectorXd x(p);
    for (int i = 0; i < p; ++i)
      x[i] = center[i] + rng.uniform(counter, static_cast<std::uint64_t>(block * p + i),
                                     -halfw[i], halfw[i]);
    return x;
  };

  // rho vs d_upper over sampled pairs, plus the Euclidean comparison.
  if (opts.pairs > 0) {
    double cmin = std::numeric_limits<double>::infinity();
    double cmax = 0.0;
    double fp1 = std::numeric_limits<double>::infinity();
    double fp2 = 0.0;
    int r = charts.system().r();
    for (int k = 0; k < opts.pairs; ++k) {
      Eigen::VectorXd eta = draw_point(k, 0);
      Eigen::VectorXd xi = draw_point(k, 1);
      try {
        const Chart& ch = charts.at(eta);
        double rho = ch.hom_norm(ch.theta(xi));
        CcOptions cc = opts.cc;
        cc.seed = seed + 7919 * static_cast<std::uint64_t>(k);
        CcResult d = cc_distance_upper(ch, xi, cc);
        if (!d.ok || d.delta <= 0) {
          ++rep.pair_failures;
          continue;
        }
        double ratio = rho / d.delta;
        cmin = std::min(cmin, ratio);
        cmax = std::max(cmax, ratio);
        double eu = (xi - eta).norm();
        if (eu > 0) {
          fp1 = std::min(fp1, d.delta / eu);
          fp2 = std::max(fp2, d.delta / std::pow(eu, 1.0 / r));
        }
        ++rep.pairs_used;
      } catch (const Error&) {
        ++rep.pair_failures;
      }
    }
    rep.c1_rho_over_d = cmin;
    rep.c2_rho_over_d = cmax;
    rep.fp_c1 = fp1;
    rep.fp_c2 = fp2;
  }

  if (opts.triples > 0) {
    double worst = 0.0;
    for (int k = 0; k < opts.triples; ++k) {
      Eigen::VectorXd xi = draw_point(100000 + k, 0);
      Eigen::VectorXd eta = draw_point(100000 + k, 1);
      Eigen::VectorXd zeta = draw_point(100000 + k, 2);
      try {
        double ab = quasidistance(charts, xi, eta);
        double ac = quasidistance(charts, xi, zeta);
        double cb = quasidistance(charts, zeta, eta);
        if (ac + cb > 0) worst = std::max(worst, ab / (ac + cb));
        ++rep.triples_used;
      } catch (const Error&) {
      }
    }
    rep.quasi_triangle = worst;
  }

  // Sampled ball-box comparison at the middle radius.
  {
    double R = radii.empty() ? 0.1 : radii[radii.size() / 2];
    double chat = 0.0;
    bool ball_in_box = true;
    for (int k = 0; k < 200; ++k) {
      Eigen::VectorXd u(p);
      for (int i = 0; i < p; ++i)
        u[i] = rng.uniform(200000 + k, i) * 2 * std::pow(R, chart.weights()[i]) -
               std::pow(R, chart.weights()[i]);
      try {
        Eigen::VectorXd x = chart.exp_flow(u);
        double rho = chart.hom_norm(chart.theta(x));
        chat = std::max(chat, rho / R);
        if (rho < R && !box_membership(chart, R, x)) ball_in_box = false;
      } catch (const Error&) {
      }
    }
    rep.ballbox_C = chat;
    rep.ball_in_box = ball_in_box;
  }

  return rep;
}

std::string MetricReport::to_json_string() const {
  nlohmann::ordered_json j;
  j["samples_per_radius"] = samples;
  j["seed"] = seed;
  j["homogeneous_dimension"] = Q_chart;
  nlohmann::ordered_json vols = nlohmann::ordered_json::array();
  for (const auto& v : volumes) {
    nlohmann::ordered_json e;
    e["radius"] = v.radius;
    e["volume"] = v.volume;
    e["stderr"] = v.stderr_;
    e["samples"] = v.samples;
    vols.push_back(e);
  }
  j["volumes"] = vols;
  j["q_hat"] = q_hat;
  j["q_se"] = q_se;
  j["q_fit_residual"] = q_residual;
  nlohmann::ordered_json dj = nlohmann::ordered_json::array();
  for (const auto& d : doubling) {
    nlohmann::ordered_json e;
    e["radius"] = d[0];
    e["ratio"] = d[1];
    e["stderr"] = d[2];
    dj.push_back(e);
  }
  j["doubling"] = dj;
  j["pairs_used"] = pairs_used;
  j["pair_failures"] = pair_failures;
  j["c1_rho_over_d"] = c1_rho_over_d;
  j["c2_rho_over_d"] = c2_rho_over_d;
  j["fefferman_phong_c1"] = fp_c1;
  j["fefferman_phong_c2"] = fp_c2;
  j["triples_used"] = triples_used;
  j["quasi_triangle_constant"] = quasi_triangle;
  j["ballbox_C"] = ballbox_C;
  j["ball_in_box_sampled"] = ball_in_box;
  j["cc_segments"] = cc_segments;
  return j.dump(2);
}

std::string MetricReport::volumes_csv() const {
  std::string out = "radius,volume,stderr,samples\n";
  char buf[160];
  for (const auto& v : volumes) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%ld\n", v.radius, v.volume, v.stderr_,
                  v.samples);
    out += buf;
  }
  return out;
}

}  // namespace hvf
