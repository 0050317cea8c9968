#include "lifting.hpp"

#include <json.hpp>

#include <Eigen/Dense>

namespace hvf {

namespace {

// X_J m for all words J of weight <= s (suffix-shared application).
std::map<Word, Expr> apply_words(const WeightedSystem& sys, const Expr& m,
                                 const std::vector<MultiIndex>& words) {
  std::map<Word, Expr> applied;
  applied[Word{}] = m;
  // Canonical order is weight-then-length, so the tail of each word (one
  // letter shorter, lower or equal weight) is already present.
  for (const auto& J : words) {
    const Expr& inner = applied.at(J.tail());
    applied[J] = sys.field(J.idx[0]).apply(inner);
  }
  return applied;
}

}  // namespace

Expr interpolation_polynomial(const WeightedSystem& sys, int s,
                              const std::map<MultiIndex, Rational>& targets,
                              std::span<const Rational> x0,
                              const Rational& value_at_x0) {
  if (s < 0) throw Error(Error::Code::Precondition, "negative interpolation weight");
  int p = sys.p();
  auto monos = monomials_up_to(p, s);
  auto words = enumerate_multiindices(sys.n(), sys.with_x0(), s);
  int rows = static_cast<int>(words.size()) + 1;
  int cols = static_cast<int>(monos.size());

  for (const auto& [J, c] : targets)
    if (J.weight() > s)
      throw Error(Error::Code::Precondition, "interpolation target beyond requested weight");

  RVector b(rows, Rational(0));
  b[0] = value_at_x0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    auto it = targets.find(words[i]);
    if (it != targets.end()) b[i + 1] = it->second;
  }

  if (sys.polynomial_rational()) {
    RMatrix M(rows, RVector(cols, Rational(0)));
    for (int c = 0; c < cols; ++c) {
      std::vector<Expr> factors;
      for (int v = 0; v < p; ++v)
        if (monos[c][v] > 0) factors.push_back(Expr::int_pow(Expr::variable(v), monos[c][v]));
      Expr mono = Expr::product(std::move(factors));
      auto applied = apply_words(sys, mono, words);
      auto v0 = evaluate_exact(applied.at(Word{}), x0);
      M[0][c] = *v0;
      for (std::size_t i = 0; i < words.size(); ++i) {
        auto v = evaluate_exact(applied.at(words[i]), x0);
        if (!v) throw Error(Error::Code::Internal, "exact evaluation failed");
        M[i + 1][c] = *v;
      }
    }
    auto u = rational_min_norm_solve(M, b);
    if (!u)
      throw Error(Error::Code::Precondition,
                  "interpolation infeasible: system is not free of weight " + std::to_string(s));
    Poly res(p);
    for (int c = 0; c < cols; ++c) res.add_term(monos[c], (*u)[c]);
    return res.to_expr();
  }

  // Numeric fallback.
  std::vector<double> x0d(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) x0d[i] = to_double(x0[i]);
  Eigen::MatrixXd M(rows, cols);
  for (int c = 0; c < cols; ++c) {
    std::vector<Expr> factors;
    for (int v = 0; v < p; ++v)
      if (monos[c][v] > 0) factors.push_back(Expr::int_pow(Expr::variable(v), monos[c][v]));
    Expr mono = Expr::product(std::move(factors));
    auto applied = apply_words(sys, mono, words);
    M(0, c) = evaluate(applied.at(Word{}), x0d);
    for (std::size_t i = 0; i < words.size(); ++i)
      M(i + 1, c) = evaluate(applied.at(words[i]), x0d);
  }
  Eigen::VectorXd bd(rows);
  for (int i = 0; i < rows; ++i) bd[i] = to_double(b[i]);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(M);
  Eigen::VectorXd u = cod.solve(bd);
  double resid = (M * u - bd).norm();
  if (resid > 1e-9 * (1.0 + bd.norm()))
    throw Error(Error::Code::Precondition,
                "interpolation infeasible: system is not free of weight " + std::to_string(s));
  Poly res(p);
  for (int c = 0; c < cols; ++c) res.add_term(monos[c], rational_from_double(u[c]));
  return res.to_expr();
}

namespace {

struct StepPlan {
  int failing_weight = 0;
  std::vector<MultiIndex> index_set;
  RVector certificate;
  Word violating_word;
  int generator = 0;
  int span_dim = 0;
  bool already_free = false;
};

StepPlan plan_step(const WeightedSystem& sys, std::span<const double> x0) {
  StepPlan plan;
  bool exact = sys.polynomial_rational();
  RVector x0r(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) x0r[i] = rational_from_double(x0[i]);

  for (int s = 1; s <= sys.r(); ++s) {
    if (exact) {
      auto fr = freeness_check_exact(sys, x0r, s);
      plan.span_dim = fr.span_dim;
      if (fr.free) continue;
      plan.failing_weight = s;
      plan.index_set = fr.index_set;
      plan.certificate = fr.certificate;
    } else {
      auto fr = freeness_check(sys, x0, s);
      plan.span_dim = fr.span_dim;
      if (fr.free) continue;
      plan.failing_weight = s;
      plan.index_set = fr.index_set;
      plan.certificate.resize(fr.certificate.size());
      for (int i = 0; i < fr.certificate.size(); ++i)
        plan.certificate[i] = rational_from_double(fr.certificate[i]);
    }
    // Violating word with the largest |sum_I a_I A_IJ| (canonical tie-break).
    std::map<Word, Rational> row;
    for (std::size_t i = 0; i < plan.index_set.size(); ++i) {
      if (plan.certificate[i] == 0) continue;
      for (const auto& [w, k] : bracket_expansion(plan.index_set[i]).terms)
        row[w] += plan.certificate[i] * k;
    }
    Rational best = 0;
    for (const auto& [w, v] : row) {
      Rational av = abs(v);
      if (av > best) {
        best = av;
        plan.violating_word = w;
      }
    }
    if (best == 0)
      throw Error(Error::Code::Internal, "certificate does not violate the A-relations");
    plan.generator = plan.violating_word.last();
    return plan;
  }
  plan.already_free = true;
  return plan;
}

std::pair<WeightedSystem, LiftStep> lift_step_impl(const WeightedSystem& sys,
                                                   std::span<const double> x0,
                                                   const StepPlan& plan) {
  int p = sys.p();
  RVector x0r(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) x0r[i] = rational_from_double(x0[i]);

  Word jm = plan.violating_word.drop_last();
  int w = plan.failing_weight - letter_weight(plan.generator);
  std::map<MultiIndex, Rational> targets;
  Rational value0 = 0;
  if (jm.empty()) value0 = 1;
  else targets[jm] = 1;

  Expr uq = interpolation_polynomial(sys, w, targets, x0r, value0);

  std::vector<int> letters;
  if (sys.with_x0()) letters.push_back(0);
  for (int i = 1; i <= sys.n(); ++i) letters.push_back(i);

  LiftStep step;
  step.failing_weight = plan.failing_weight;
  step.index_set = plan.index_set;
  step.certificate = plan.certificate;
  step.violating_word = plan.violating_word;
  step.generator = plan.generator;

  std::vector<VectorField> lifted;
  for (int letter : letters) {
    VectorField f = sys.field(letter).extended(p + 1);
    if (letter == plan.generator) f.coeff[p] = uq;
    step.u.push_back(letter == plan.generator ? uq : Expr::constant(0));
    lifted.push_back(std::move(f));
  }
  WeightedSystem out(p + 1, sys.n(), sys.with_x0(), sys.r(), sys.alpha(), std::move(lifted),
                     sys.region().extended(-1.0, 1.0));
  return {std::move(out), std::move(step)};
}

}  // namespace

WeightedSystem lift_one_step(const WeightedSystem& sys, std::span<const double> x0) {
  StepPlan plan = plan_step(sys, x0);
  if (plan.already_free)
    throw Error(Error::Code::Precondition, "system is already free of weight r");
  return lift_step_impl(sys, x0, plan).first;
}

LiftResult lift(const WeightedSystem& sys, std::span<const double> x0) {
  // Hörmander condition at x0: brackets of weight <= r span R^p.
  {
    auto fr = freeness_check(sys, x0, sys.r());
    if (fr.span_dim < sys.p())
      throw Error(Error::Code::Precondition,
                  "Hormander condition fails at the base point (span " +
                      std::to_string(fr.span_dim) + " < " + std::to_string(sys.p()) + ")");
  }
  int bound = graded_basis(sys.n(), sys.with_x0(), sys.r()).dim();

  WeightedSystem cur = sys;
  std::vector<double> x0cur(x0.begin(), x0.end());
  LiftResult result{cur, 0, {}, sys.p()};

  for (;;) {
    StepPlan plan = plan_step(cur, x0cur);
    if (plan.already_free) break;
    if (cur.p() + 1 > bound)
      throw Error(Error::Code::Numeric,
                  "lifting iteration bound exceeded (numerical rank misjudgment?)");
    int old_span = freeness_check(cur, x0cur, cur.r()).span_dim;
    auto [next, step] = lift_step_impl(cur, x0cur, plan);
    cur = std::move(next);
    x0cur.push_back(0.0);
    result.steps.push_back(std::move(step));
    result.m += 1;

    // Prop.-3 postconditions: still free of weight s-1, span grew by one.
    if (plan.failing_weight > 1) {
      auto fr = freeness_check(cur, x0cur, plan.failing_weight - 1);
      if (!fr.free)
        throw Error(Error::Code::Numeric, "lift step broke freeness of weight s-1");
    }
    auto fr_full = freeness_check(cur, x0cur, cur.r());
    if (fr_full.span_dim != old_span + 1)
      throw Error(Error::Code::Numeric, "lift step did not raise the span dimension by one");
  }

  result.lifted = cur;
  {
    auto fr = freeness_check(cur, x0cur, cur.r());
    if (fr.span_dim != cur.p())
      throw Error(Error::Code::Numeric, "lifted fields do not span the lifted space");
  }
  return result;
}

std::string LiftResult::to_json_string() const {
  nlohmann::ordered_json j;
  j["original_dim"] = original_p;
  j["added_vars"] = m;
  j["lifted_dim"] = lifted.p();
  j["r"] = lifted.r();
  nlohmann::ordered_json fields = nlohmann::ordered_json::array();
  std::vector<int> letters;
  if (lifted.with_x0()) letters.push_back(0);
  for (int i = 1; i <= lifted.n(); ++i) letters.push_back(i);
  for (int letter : letters) {
    nlohmann::ordered_json f;
    f["letter"] = letter;
    nlohmann::ordered_json coeffs = nlohmann::ordered_json::array();
    for (const auto& c : lifted.field(letter).coeff) coeffs.push_back(print_expr(c, original_p));
    f["coefficients"] = coeffs;
    fields.push_back(f);
  }
  j["lifted_fields"] = fields;

  nlohmann::ordered_json steps_json = nlohmann::ordered_json::array();
  for (const auto& st : steps) {
    nlohmann::ordered_json s;
    s["failing_weight"] = st.failing_weight;
    nlohmann::ordered_json cert = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < st.index_set.size(); ++i) {
      if (st.certificate[i] == 0) continue;
      cert.push_back(nlohmann::ordered_json::array(
          {st.index_set[i].str(), rational_to_string(st.certificate[i])}));
    }
    s["certificate"] = cert;
    s["violating_word"] = st.violating_word.str();
    s["generator"] = st.generator;
    nlohmann::ordered_json us = nlohmann::ordered_json::array();
    for (const auto& u : st.u) us.push_back(print_expr(u, original_p));
    s["u"] = us;
    steps_json.push_back(s);
  }
  j["steps"] = steps_json;
  return j.dump(2);
}

}  // namespace hvf
