#include "config.hpp"

#include "expr.hpp"

#include <json.hpp>

#include <regex>

namespace hvf {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(Error::Code::Config, "config: " + msg);
}

void fill_system_fields(ExperimentConfig& cfg, const json& sys) {
  for (const char* key : {"p", "n", "r", "fields", "region"})
    if (!sys.contains(key)) config_error(std::string("system is missing '") + key + "'");
  cfg.system_name = "inline";
  cfg.p = sys["p"].get<int>();
  cfg.n = sys["n"].get<int>();
  cfg.r = sys["r"].get<int>();
  cfg.alpha = sys.value("alpha", 1.0);
  cfg.with_x0 = sys.value("x0_present", false);
  if (!sys["fields"].is_array()) config_error("system.fields must be an array of arrays");
  for (const auto& f : sys["fields"]) {
    std::vector<std::string> coeffs;
    for (const auto& c : f) coeffs.push_back(c.get<std::string>());
    cfg.field_exprs.push_back(std::move(coeffs));
  }
  const auto& region = sys["region"];
  if (!region.contains("min") || !region.contains("max"))
    config_error("system.region needs 'min' and 'max'");
  cfg.region_min = region["min"].get<std::vector<double>>();
  cfg.region_max = region["max"].get<std::vector<double>>();
}

}  // namespace

bool is_builtin_system(const std::string& name) {
  static const std::regex pat(
      R"(^(heisenberg|grushin|kolmogorov|abelian\(\d+\)|perturbed-heisenberg\([0-9.]+\))$)");
  return std::regex_match(name, pat);
}

ExperimentConfig builtin_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.system_name = name;
  std::smatch m;
  if (name == "heisenberg" || std::regex_match(name, m, std::regex(R"(^perturbed-heisenberg\(([0-9.]+)\)$)"))) {
    cfg.p = 3;
    cfg.n = 2;
    cfg.r = 2;
    std::string x1_third = "0 - 1/2*x2";
    if (!m.empty()) {
      double a = std::stod(m[1].str());
      if (!(a > 0 && a <= 1)) config_error("perturbed-heisenberg alpha must be in (0,1]");
      cfg.alpha = a;
      if (a >= 1.0) {
        x1_third += " + x1^3";  // smooth cubic perturbation
      } else {
        // Hölder term |x1|^(1+alpha): C^{1,alpha} but not C^2.
        std::string beta = std::to_string(1.0 + a);
        x1_third += " + abs(x1)^" + beta;
      }
    }
    cfg.field_exprs = {{"1", "0", x1_third}, {"0", "1", "1/2*x1"}};
    cfg.region_min = {-1, -1, -1};
    cfg.region_max = {1, 1, 1};
  } else if (name == "grushin") {
    cfg.p = 2;
    cfg.n = 2;
    cfg.r = 2;
    cfg.field_exprs = {{"1", "0"}, {"0", "x1"}};
    cfg.region_min = {-1, -1};
    cfg.region_max = {1, 1};
  } else if (name == "kolmogorov") {
    cfg.p = 2;
    cfg.n = 1;
    cfg.r = 3;
    cfg.with_x0 = true;
    cfg.field_exprs = {{"0", "x1"}, {"1", "0"}};  // X0 first, then X1
    cfg.region_min = {-1, -1};
    cfg.region_max = {1, 1};
  } else if (std::regex_match(name, m, std::regex(R"(^abelian\((\d+)\)$)"))) {
    int p = std::stoi(m[1].str());
    if (p < 1 || p > 8) config_error("abelian(p) needs 1 <= p <= 8");
    cfg.p = p;
    cfg.n = p;
    cfg.r = 1;
    for (int i = 0; i < p; ++i) {
      std::vector<std::string> coeffs(p, "0");
      coeffs[i] = "1";
      cfg.field_exprs.push_back(coeffs);
    }
    cfg.region_min.assign(p, -1);
    cfg.region_max.assign(p, 1);
  } else {
    config_error("unknown builtin system '" + name + "'");
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) config_error("top level must be an object");
  if (!doc.contains("seed")) config_error("'seed' is mandatory");
  if (!doc.contains("system")) config_error("'system' is mandatory");

  ExperimentConfig cfg;
  const auto& sys = doc["system"];
  if (sys.is_string()) {
    std::string name = sys.get<std::string>();
    if (!is_builtin_system(name)) config_error("unknown builtin system '" + name + "'");
    cfg = builtin_config(name);
  } else if (sys.is_object()) {
    fill_system_fields(cfg, sys);
  } else {
    config_error("'system' must be a builtin name or an object");
  }

  cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("stages")) {
    for (const auto& s : doc["stages"]) {
      std::string st = s.get<std::string>();
      if (st != "lift" && st != "chart" && st != "metrics" && st != "approx")
        config_error("unknown stage '" + st + "'");
      cfg.stages.push_back(st);
    }
  } else {
    cfg.stages = {"lift", "chart", "metrics", "approx"};
  }
  if (doc.contains("base_points")) {
    for (const auto& bp : doc["base_points"]) {
      auto v = bp.get<std::vector<double>>();
      if (static_cast<int>(v.size()) != cfg.p) config_error("base point dimension mismatch");
      cfg.base_points.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
    }
  }
  if (cfg.base_points.empty()) cfg.base_points.push_back(Eigen::VectorXd::Zero(cfg.p));
  if (doc.contains("radii")) cfg.radii = doc["radii"].get<std::vector<double>>();
  for (double r : cfg.radii)
    if (!(r > 0)) config_error("radii must be positive");
  if (doc.contains("samples")) cfg.samples = doc["samples"].get<long>();
  if (cfg.samples < 100) config_error("samples must be >= 100");
  if (doc.contains("mode")) {
    cfg.mode = doc["mode"].get<std::string>();
    if (cfg.mode != "smooth" && cfg.mode != "regularized")
      config_error("mode must be 'smooth' or 'regularized'");
  }
  if (doc.contains("pairs")) cfg.pairs = doc["pairs"].get<int>();
  if (doc.contains("triples")) cfg.triples = doc["triples"].get<int>();
  if (doc.contains("segments")) cfg.segments = doc["segments"].get<int>();
  if (cfg.segments < 1) config_error("segments must be >= 1");
  if (doc.contains("tolerances")) {
    const auto& t = doc["tolerances"];
    cfg.tol.q_fit = t.value("q_fit", cfg.tol.q_fit);
    cfg.tol.doubling_rel = t.value("doubling_rel", cfg.tol.doubling_rel);
    cfg.tol.equivalence_spread = t.value("equivalence_spread", cfg.tol.equivalence_spread);
    cfg.tol.quasi_triangle = t.value("quasi_triangle", cfg.tol.quasi_triangle);
    cfg.tol.roundtrip = t.value("roundtrip", cfg.tol.roundtrip);
    cfg.tol.antisymmetry = t.value("antisymmetry", cfg.tol.antisymmetry);
    cfg.tol.order_margin = t.value("order_margin", cfg.tol.order_margin);
    cfg.tol.holder_margin = t.value("holder_margin", cfg.tol.holder_margin);
    cfg.tol.jacobian_product = t.value("jacobian_product", cfg.tol.jacobian_product);
  }

  // Validate the system by building it once.
  cfg.build_system();
  return cfg;
}

WeightedSystem ExperimentConfig::build_system() const {
  int expected = n + (with_x0 ? 1 : 0);
  if (static_cast<int>(field_exprs.size()) != expected)
    config_error("expected " + std::to_string(expected) + " fields, got " +
                 std::to_string(field_exprs.size()));
  std::vector<VectorField> fields;
  for (const auto& f : field_exprs) {
    if (static_cast<int>(f.size()) != p) config_error("field coefficient count != p");
    std::vector<Expr> coeffs;
    for (const auto& src : f) {
      try {
        coeffs.push_back(parse_expr(src));
      } catch (const ParseError& e) {
        config_error("bad field expression '" + src + "': " + e.what());
      }
      if (max_var_index(coeffs.back()) >= p)
        config_error("field expression '" + src + "' references a variable beyond p");
    }
    fields.push_back(VectorField(std::move(coeffs)));
  }
  if (static_cast<int>(region_min.size()) != p || static_cast<int>(region_max.size()) != p)
    config_error("region dimension mismatch");
  for (int i = 0; i < p; ++i)
    if (!(region_min[i] < region_max[i])) config_error("region min must be < max");
  try {
    return WeightedSystem(p, n, with_x0, r, alpha, std::move(fields),
                          Box{region_min, region_max});
  } catch (const Error& e) {
    config_error(e.what());
  }
}

std::string ExperimentConfig::canonical_json() const {
  json j;  // nlohmann::json sorts keys
  j["system_name"] = system_name;
  j["p"] = p;
  j["n"] = n;
  j["r"] = r;
  j["with_x0"] = with_x0;
  j["alpha"] = alpha;
  j["fields"] = field_exprs;
  j["region_min"] = region_min;
  j["region_max"] = region_max;
  j["stages"] = stages;
  json bps = json::array();
  for (const auto& bp : base_points)
    bps.push_back(std::vector<double>(bp.data(), bp.data() + bp.size()));
  j["base_points"] = bps;
  j["radii"] = radii;
  j["samples"] = samples;
  j["seed"] = seed;
  j["mode"] = mode;
  j["pairs"] = pairs;
  j["triples"] = triples;
  j["segments"] = segments;
  j["tolerances"] = {{"q_fit", tol.q_fit},
                     {"doubling_rel", tol.doubling_rel},
                     {"equivalence_spread", tol.equivalence_spread},
                     {"quasi_triangle", tol.quasi_triangle},
                     {"roundtrip", tol.roundtrip},
                     {"antisymmetry", tol.antisymmetry},
                     {"order_margin", tol.order_margin},
                     {"holder_margin", tol.holder_margin},
                     {"jacobian_product", tol.jacobian_product}};
  return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const {
  std::string s = canonical_json();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hvf
