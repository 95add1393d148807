#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qsk/ball.hpp"
#include "qsk/fields.hpp"
#include "qsk/function_analysis.hpp"
#include "qsk/heisenberg.hpp"

namespace qsk::experiments {

using json = nlohmann::json;

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{
      "group-geometry",   "kernel-identities", "kernel-bounds",      "weights-and-norms", "commutator-boundedness",
      "truncation-gap",   "vmo-diagnostics",   "compactness-probe",  "f0-bounds"};
  return names;
}

inline bool is_scenario(const std::string& name) {
  const auto& n = scenario_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

/// Invalid configuration; one message per violation, each led by a field path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& m : v) s += (s.empty() ? "" : "\n") + m;
    return s;
  }
  std::vector<std::string> violations_;
};

/// A group point given by its t and y coordinates; missing entries are zero.
struct PointSpec {
  std::vector<double> t;
  std::vector<double> y;

  GroupPoint point(GroupDims d) const {
    GroupPoint g = GroupPoint::identity(d);
    for (std::size_t a = 0; a < t.size(); ++a) g.t[a] = t[a];
    for (std::size_t i = 0; i < y.size(); ++i) g.y[i] = y[i];
    return g;
  }
  json to_json() const { return {{"t", t}, {"y", y}}; }
};

/// b or f: constant | smooth-bump | log-hnorm | power-hnorm | ball-indicator.
struct FieldSpec {
  std::string kind;
  double value = 1.0;   ///< constant
  double a = 0.5;       ///< power-hnorm exponent
  PointSpec center;     ///< smooth-bump, ball-indicator
  double radius = 1.0;  ///< smooth-bump, ball-indicator

  json to_json() const {
    json j{{"kind", kind}};
    if (kind == "constant") j["value"] = value;
    if (kind == "power-hnorm") j["a"] = a;
    if (kind == "smooth-bump" || kind == "ball-indicator") {
      j["center"] = center.to_json();
      j["radius"] = radius;
    }
    return j;
  }

  ScalarField build(GroupDims d) const {
    if (kind == "constant") return fields::constant(value);
    if (kind == "smooth-bump") return fields::smooth_bump(center.point(d), radius);
    if (kind == "log-hnorm") return fields::log_hnorm(d);
    if (kind == "power-hnorm") return fields::power_hnorm(d, a);
    if (kind == "ball-indicator") return fields::ball_indicator(Ball(center.point(d), radius));
    throw std::invalid_argument("FieldSpec: unknown kind " + kind);
  }

  /// Membership known in closed form: constants and bumps lie in VMO, log-hnorm
  /// in BMO but not VMO, power-hnorm with a > 0 outside BMO.
  bool in_bmo() const { return kind != "power-hnorm" || a == 0.0; }
  bool in_vmo() const { return kind == "constant" || kind == "smooth-bump" || (kind == "power-hnorm" && a == 0.0); }
};

/// "unit" or "power" (w = hnorm^a).
struct WeightSpec {
  std::string kind = "power";
  double a = 2.0;

  json to_json() const { return kind == "unit" ? json{{"kind", kind}} : json{{"kind", kind}, {"a", a}}; }
  Weight build(GroupDims d) const { return kind == "unit" ? weights::unit() : weights::power(d, a); }
};

/// Balls B(c, r) for every listed center and radius.
struct FamilySpec {
  std::vector<PointSpec> centers{PointSpec{}};
  std::vector<double> radii{0.5, 1.0, 2.0};
  std::size_t samples_per_ball = 256;
  bool equivariant = true;
  int radial_strata = 8;

  json to_json() const {
    json cs = json::array();
    for (const auto& c : centers) cs.push_back(c.to_json());
    return {{"centers", cs},
            {"radii", radii},
            {"samples_per_ball", samples_per_ball},
            {"equivariant", equivariant},
            {"radial_strata", radial_strata}};
  }

  RuleConfig rule(double scale = 1.0) const {
    RuleConfig rc = uniform_config(std::max<std::size_t>(8, static_cast<std::size_t>(std::llround(samples_per_ball * scale))));
    rc.equivariant = equivariant;
    rc.radial_strata = radial_strata;
    return rc;
  }

  std::vector<Ball> balls(GroupDims d) const {
    std::vector<GroupPoint> cs;
    for (const auto& c : centers) cs.push_back(c.point(d));
    return balls_from(cs, radii);
  }
};

/// Sample budgets; each is multiplied by budget_scale where it is used.
struct Budgets {
  std::size_t samples = 100000;       ///< random instances for exact identities
  std::size_t scan_samples = 1000000; ///< sphere samples per running sup
  std::size_t sources = 2048;         ///< source nodes per target
  std::size_t targets = 256;          ///< target nodes per region
  std::size_t trials = 50;            ///< random (b, ball) pairs
  std::size_t base_points = 100;      ///< companion-scan base points
  std::size_t ball_samples = 4096;    ///< nodes per ball for weights, medians and oscillations

  static const std::vector<std::string>& keys() {
    static const std::vector<std::string> k{"samples", "scan_samples", "sources", "targets",
                                            "trials", "base_points", "ball_samples"};
    return k;
  }
  std::size_t& at(const std::string& key) {
    if (key == "samples") return samples;
    if (key == "scan_samples") return scan_samples;
    if (key == "sources") return sources;
    if (key == "targets") return targets;
    if (key == "trials") return trials;
    if (key == "base_points") return base_points;
    if (key == "ball_samples") return ball_samples;
    throw std::invalid_argument("Budgets: unknown key " + key);
  }
  std::size_t get(const std::string& key) const { return const_cast<Budgets*>(this)->at(key); }
  json to_json() const {
    json j;
    for (const auto& k : keys()) j[k] = get(k);
    return j;
  }
};

struct RunConfig {
  std::string scenario;
  int n = 2;
  double kernel_c = 1.0;
  std::vector<double> eta{0.2, 0.1, 0.05};
  MorreyParams morrey;
  WeightSpec weight;
  bool divergence_test = false;  ///< admit weight exponents outside the A_p range
  std::vector<FieldSpec> b;
  std::vector<FieldSpec> f;
  FamilySpec family;
  Budgets budgets;
  double budget_scale = 1.0;
  std::uint64_t seed = 1;
  std::string output_dir = "runs";
  json options = json::object();

  GroupDims dims() const { return GroupDims(n); }

  /// budgets[key] * budget_scale, at least `floor`.
  std::size_t budget(const std::string& key, std::size_t floor = 2) const {
    const double v = std::round(static_cast<double>(budgets.get(key)) * budget_scale);
    return std::max<std::size_t>(floor, static_cast<std::size_t>(v));
  }

  json to_json() const {
    json bs = json::array(), fs = json::array();
    for (const auto& x : b) bs.push_back(x.to_json());
    for (const auto& x : f) fs.push_back(x.to_json());
    return {{"scenario", scenario},
            {"n", n},
            {"kernel_c", kernel_c},
            {"eta", eta},
            {"morrey", {{"p", morrey.p}, {"kappa", morrey.kappa}}},
            {"weight", weight.to_json()},
            {"divergence_test", divergence_test},
            {"b", bs},
            {"f", fs},
            {"family", family.to_json()},
            {"budgets", budgets.to_json()},
            {"budget_scale", budget_scale},
            {"seed", seed},
            {"output_dir", output_dir},
            {"options", options}};
  }
};

namespace detail {

inline FieldSpec field(std::string kind) {
  FieldSpec s;
  s.kind = std::move(kind);
  return s;
}

inline FieldSpec bump(double radius) {
  FieldSpec s = field("smooth-bump");
  s.radius = radius;
  return s;
}

inline FieldSpec indicator(double radius, std::vector<double> y = {}) {
  FieldSpec s = field("ball-indicator");
  s.radius = radius;
  s.center.y = std::move(y);
  return s;
}

inline FieldSpec power(double a) {
  FieldSpec s = field("power-hnorm");
  s.a = a;
  return s;
}

}  // namespace detail

/// Scenario-specific settings and their defaults; keys outside these are rejected.
inline json default_options(const std::string& scenario) {
  if (scenario == "kernel-bounds")
    return {{"holder_separation", 2.0}, {"companion_radius", 0.1}, {"A1", 3.0}, {"A2", 10.0},
            {"directions", 64},         {"pairs", 256}};
  if (scenario == "weights-and-norms") return {{"lambdas", {2.0, 4.0, 8.0}}, {"refinements", 3}, {"base_depth", 3}};
  if (scenario == "commutator-boundedness") return {{"decades", 3}, {"eta", 0.002}};
  if (scenario == "truncation-gap") return {{"maximal_radii", 8}, {"boundary_targets", 6}, {"interior_targets", 3}};
  if (scenario == "vmo-diagnostics") return {{"centers", 12}, {"curve_points", 9}};
  if (scenario == "compactness-probe")
    return {{"levels", 5},
            {"eta_fraction", 0.01},
            {"tail_M", {2.0, 4.0, 8.0, 16.0, 32.0}},
            {"tail_ball_factors", {2.0, 4.0}},
            {"xi_norms", {0.0, 0.05, 0.1}},
            {"xi_directions", 2}};
  if (scenario == "f0-bounds") return {{"ks", {2, 3, 4}}, {"level_set_nodes", 65536}};
  return json::object();
}

/// Complete defaults for one scenario.
inline RunConfig default_config(const std::string& scenario) {
  using namespace detail;
  RunConfig c;
  c.scenario = scenario;
  c.options = default_options(scenario);
  if (scenario == "kernel-bounds") c.budgets.scan_samples = 1000000;
  if (scenario == "weights-and-norms") {
    c.weight.a = 2.0;
    c.budgets.ball_samples = 2048;
  }
  if (scenario == "commutator-boundedness") {
    c.b = {field("log-hnorm"), power(0.5)};
    c.budgets.sources = 8192;
    c.budgets.targets = 256;
  }
  if (scenario == "truncation-gap") {
    c.b = {bump(2.0)};
    c.f = {indicator(1.0)};
    c.budgets.sources = 20000;
  }
  if (scenario == "vmo-diagnostics") {
    c.b = {bump(1.0), field("log-hnorm")};
    c.budgets.ball_samples = 512;
  }
  if (scenario == "compactness-probe") {
    c.b = {bump(2.0), field("log-hnorm")};
    c.f = {indicator(1.0), indicator(1.0, {0.5}), indicator(1.0, {1.0})};
    c.budgets.sources = 2048;
    c.budgets.targets = 512;
    c.family.samples_per_ball = 128;
    c.family.radii = {0.5, 1.0, 2.0, 4.0};
  }
  if (scenario == "f0-bounds") {
    c.b = {field("log-hnorm")};
    c.budgets.targets = 512;
    c.budgets.ball_samples = 1024;
  }
  return c;
}

namespace detail {

/// Reads typed values out of a JSON object, recording errors with field paths.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& msg) { errors_.push_back(path + ": " + msg); }

  bool object(const json& j, const std::string& path, const std::vector<std::string>& allowed) {
    if (!j.is_object()) {
      error(path.empty() ? "config" : path, "expected an object");
      return false;
    }
    for (const auto& [k, v] : j.items())
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) error(join(path, k), "unknown key");
    return true;
  }

  static std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
  static std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

  void number(const json& j, const std::string& path, double& out) {
    if (!j.is_number()) return error(path, "expected a number");
    out = j.get<double>();
    if (!std::isfinite(out)) error(path, "must be finite");
  }
  void integer(const json& j, const std::string& path, long long& out) {
    if (!j.is_number_integer()) return error(path, "expected an integer");
    out = j.get<long long>();
  }
  void count(const json& j, const std::string& path, std::size_t& out) {
    long long v = 0;
    integer(j, path, v);
    if (j.is_number_integer()) {
      if (v < 1) return error(path, "must be a positive integer");
      out = static_cast<std::size_t>(v);
    }
  }
  void boolean(const json& j, const std::string& path, bool& out) {
    if (!j.is_boolean()) return error(path, "expected true or false");
    out = j.get<bool>();
  }
  void text(const json& j, const std::string& path, std::string& out) {
    if (!j.is_string()) return error(path, "expected a string");
    out = j.get<std::string>();
  }
  void numbers(const json& j, const std::string& path, std::vector<double>& out) {
    if (!j.is_array()) return error(path, "expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < j.size(); ++i) {
      double v = 0.0;
      number(j[i], index(path, i), v);
      out.push_back(v);
    }
  }

 private:
  std::vector<std::string>& errors_;
};

inline void read_point(Reader& r, const json& j, const std::string& path, PointSpec& p) {
  if (!r.object(j, path, {"t", "y"})) return;
  if (j.contains("t")) r.numbers(j["t"], path + ".t", p.t);
  if (j.contains("y")) r.numbers(j["y"], path + ".y", p.y);
}

inline void read_field(Reader& r, const json& j, const std::string& path, FieldSpec& s) {
  if (!r.object(j, path, {"kind", "value", "a", "center", "radius"})) return;
  if (!j.contains("kind")) return r.error(path + ".kind", "required");
  r.text(j["kind"], path + ".kind", s.kind);
  if (j.contains("value")) r.number(j["value"], path + ".value", s.value);
  if (j.contains("a")) r.number(j["a"], path + ".a", s.a);
  if (j.contains("center")) read_point(r, j["center"], path + ".center", s.center);
  if (j.contains("radius")) r.number(j["radius"], path + ".radius", s.radius);
}

inline void read_fields(Reader& r, const json& j, const std::string& path, std::vector<FieldSpec>& out) {
  if (!j.is_array()) return r.error(path, "expected an array of field specs");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    FieldSpec s;
    read_field(r, j[i], Reader::index(path, i), s);
    out.push_back(s);
  }
}

/// Options must match the default's keys and value shapes.
inline void read_options(Reader& r, const json& j, const std::string& path, json& out) {
  if (!j.is_object()) return r.error(path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    const std::string p = Reader::join(path, k);
    if (!out.contains(k)) {
      r.error(p, "unknown key");
      continue;
    }
    const json& def = out[k];
    const bool ok = def.is_number_integer()  ? v.is_number_integer()
                    : def.is_number()        ? v.is_number()
                    : def.is_boolean()       ? v.is_boolean()
                    : def.is_array()         ? v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })
                                             : false;
    if (!ok) {
      r.error(p, def.is_number_integer() ? "expected an integer"
                 : def.is_number()       ? "expected a number"
                 : def.is_boolean()      ? "expected true or false"
                                         : "expected an array of numbers");
      continue;
    }
    out[k] = v;
  }
}

inline void check_point(Reader& r, const PointSpec& p, GroupDims d, const std::string& path) {
  if (p.t.size() > 3) r.error(path + ".t", "at most 3 entries");
  if (p.y.size() > static_cast<std::size_t>(d.horizontal())) r.error(path + ".y", "at most " + std::to_string(d.horizontal()) + " entries for n = " + std::to_string(d.n()));
}

inline void check_field(Reader& r, const FieldSpec& s, GroupDims d, const std::string& path, bool is_b) {
  static const std::vector<std::string> b_kinds{"constant", "smooth-bump", "log-hnorm", "power-hnorm"};
  static const std::vector<std::string> f_kinds{"ball-indicator", "smooth-bump"};
  const auto& kinds = is_b ? b_kinds : f_kinds;
  if (std::find(kinds.begin(), kinds.end(), s.kind) == kinds.end()) {
    std::string list;
    for (const auto& k : kinds) list += (list.empty() ? "" : " | ") + k;
    return r.error(path + ".kind", "unknown kind \"" + s.kind + "\" (expected " + list + ")");
  }
  if (s.kind == "smooth-bump" || s.kind == "ball-indicator") {
    if (!(s.radius > 0.0)) r.error(path + ".radius", "must be positive");
    check_point(r, s.center, d, path + ".center");
  }
  if (s.kind == "power-hnorm" && !(s.a >= 0.0)) r.error(path + ".a", "must be nonnegative");
}

}  // namespace detail

/// Range checks on a complete configuration.
inline void check_config(const RunConfig& c) {
  std::vector<std::string> errors;
  detail::Reader r(errors);
  if (!is_scenario(c.scenario)) r.error("scenario", "unknown scenario \"" + c.scenario + "\"");
  if (c.n < 2 || c.n > kMaxN) r.error("n", "n≥2 required, at most " + std::to_string(kMaxN) + "; got " + std::to_string(c.n));
  const GroupDims d(std::clamp(c.n, 2, kMaxN));
  if (!(c.kernel_c > 0.0)) r.error("kernel_c", "must be positive");
  if (c.eta.empty()) r.error("eta", "at least one value");
  for (std::size_t i = 0; i < c.eta.size(); ++i)
    if (!(c.eta[i] > 0.0)) r.error(detail::Reader::index("eta", i), "η>0 required");
  if (!(c.morrey.p > 1.0)) r.error("morrey.p", "p>1 required, got " + json(c.morrey.p).dump());
  if (!(c.morrey.kappa > 0.0 && c.morrey.kappa < 1.0))
    r.error("morrey.kappa", "κ∈(0,1) required, got " + json(c.morrey.kappa).dump());
  if (c.weight.kind != "unit" && c.weight.kind != "power") {
    r.error("weight.kind", "unknown kind \"" + c.weight.kind + "\" (expected unit | power)");
  } else if (c.weight.kind == "power" && !c.divergence_test) {
    // hnorm^a is in A_p exactly for -Q < a < Q(p - 1)
    const double lo = -d.Q(), hi = d.Q() * (c.morrey.p - 1.0);
    if (!(c.weight.a > lo && c.weight.a < hi))
      r.error("weight.a", "a∈(" + json(lo).dump() + "," + json(hi).dump() + ") required for an A_p weight, got " +
                              json(c.weight.a).dump() + " (set divergence_test to admit it)");
  }
  for (std::size_t i = 0; i < c.b.size(); ++i) detail::check_field(r, c.b[i], d, detail::Reader::index("b", i), true);
  for (std::size_t i = 0; i < c.f.size(); ++i) detail::check_field(r, c.f[i], d, detail::Reader::index("f", i), false);
  if (c.family.centers.empty()) r.error("family.centers", "at least one center");
  for (std::size_t i = 0; i < c.family.centers.size(); ++i)
    detail::check_point(r, c.family.centers[i], d, detail::Reader::index("family.centers", i));
  if (c.family.radii.empty()) r.error("family.radii", "at least one radius");
  for (std::size_t i = 0; i < c.family.radii.size(); ++i)
    if (!(c.family.radii[i] > 0.0)) r.error(detail::Reader::index("family.radii", i), "must be positive");
  if (c.family.radial_strata < 1) r.error("family.radial_strata", "must be positive");
  if (!(c.budget_scale > 0.0)) r.error("budget_scale", "must be positive");
  if (c.output_dir.empty()) r.error("output_dir", "must not be empty");
  if (!errors.empty()) throw ConfigError(errors);
}

/// Parses a JSON document over the scenario's defaults and range-checks it.
/// `scenario` fills in a missing "scenario" key and must agree with a present one.
inline RunConfig validate_config(const std::string& raw, const std::string& scenario = "") {
  json j;
  try {
    j = raw.find_first_not_of(" \t\r\n") == std::string::npos ? json::object() : json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config: malformed document: ") + e.what()});
  }
  std::vector<std::string> errors;
  detail::Reader r(errors);
  static const std::vector<std::string> top{"scenario", "n",       "kernel_c",     "eta",  "morrey",      "weight",
                                            "divergence_test", "b", "f", "family", "budgets", "budget_scale",
                                            "seed", "output_dir", "options"};
  if (!r.object(j, "", top)) throw ConfigError(errors);

  std::string name = scenario;
  if (j.contains("scenario")) {
    std::string given;
    r.text(j["scenario"], "scenario", given);
    if (!scenario.empty() && given != scenario)
      r.error("scenario", "\"" + given + "\" does not match the requested scenario \"" + scenario + "\"");
    name = given;
  }
  if (name.empty()) r.error("scenario", "required");
  else if (!is_scenario(name)) r.error("scenario", "unknown scenario \"" + name + "\"");
  if (!errors.empty()) throw ConfigError(errors);

  RunConfig c = default_config(name);
  if (j.contains("n")) {
    long long v = c.n;
    r.integer(j["n"], "n", v);
    c.n = static_cast<int>(std::clamp<long long>(v, -1000, 1000));
  }
  if (j.contains("kernel_c")) r.number(j["kernel_c"], "kernel_c", c.kernel_c);
  if (j.contains("eta")) r.numbers(j["eta"], "eta", c.eta);
  if (j.contains("morrey") && r.object(j["morrey"], "morrey", {"p", "kappa"})) {
    if (j["morrey"].contains("p")) r.number(j["morrey"]["p"], "morrey.p", c.morrey.p);
    if (j["morrey"].contains("kappa")) r.number(j["morrey"]["kappa"], "morrey.kappa", c.morrey.kappa);
  }
  if (j.contains("weight") && r.object(j["weight"], "weight", {"kind", "a"})) {
    if (j["weight"].contains("kind")) r.text(j["weight"]["kind"], "weight.kind", c.weight.kind);
    if (j["weight"].contains("a")) r.number(j["weight"]["a"], "weight.a", c.weight.a);
  }
  if (j.contains("divergence_test")) r.boolean(j["divergence_test"], "divergence_test", c.divergence_test);
  if (j.contains("b")) detail::read_fields(r, j["b"], "b", c.b);
  if (j.contains("f")) detail::read_fields(r, j["f"], "f", c.f);
  if (j.contains("family") &&
      r.object(j["family"], "family", {"centers", "radii", "samples_per_ball", "equivariant", "radial_strata"})) {
    const json& fj = j["family"];
    if (fj.contains("centers")) {
      if (!fj["centers"].is_array()) {
        r.error("family.centers", "expected an array of points");
      } else {
        c.family.centers.clear();
        for (std::size_t i = 0; i < fj["centers"].size(); ++i) {
          PointSpec p;
          detail::read_point(r, fj["centers"][i], detail::Reader::index("family.centers", i), p);
          c.family.centers.push_back(p);
        }
      }
    }
    if (fj.contains("radii")) r.numbers(fj["radii"], "family.radii", c.family.radii);
    if (fj.contains("samples_per_ball")) r.count(fj["samples_per_ball"], "family.samples_per_ball", c.family.samples_per_ball);
    if (fj.contains("equivariant")) r.boolean(fj["equivariant"], "family.equivariant", c.family.equivariant);
    if (fj.contains("radial_strata")) {
      std::size_t v = 1;
      r.count(fj["radial_strata"], "family.radial_strata", v);
      c.family.radial_strata = static_cast<int>(std::min<std::size_t>(v, 1 << 20));
    }
  }
  if (j.contains("budgets") && r.object(j["budgets"], "budgets", Budgets::keys()))
    for (const auto& [k, v] : j["budgets"].items())
      if (std::find(Budgets::keys().begin(), Budgets::keys().end(), k) != Budgets::keys().end())
        r.count(v, "budgets." + k, c.budgets.at(k));
  if (j.contains("budget_scale")) r.number(j["budget_scale"], "budget_scale", c.budget_scale);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) r.error("seed", "expected a nonnegative integer");
    else c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) r.text(j["output_dir"], "output_dir", c.output_dir);
  if (j.contains("options")) detail::read_options(r, j["options"], "options", c.options);
  if (!errors.empty()) throw ConfigError(errors);
  check_config(c);
  return c;
}

}  // namespace qsk::experiments
