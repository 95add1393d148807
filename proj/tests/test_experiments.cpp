#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>

#include "qsk/experiments.hpp"

using namespace qsk::experiments;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> violations_of(const std::string& raw, const std::string& scenario = "group-geometry") {
  try {
    validate_config(raw, scenario);
  } catch (const ConfigError& e) {
    return e.violations();
  }
  return {};
}

bool has_violation(const std::vector<std::string>& v, const std::string& prefix, const std::string& fragment) {
  for (const auto& m : v)
    if (m.rfind(prefix + ":", 0) == 0 && m.find(fragment) != std::string::npos) return true;
  return false;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qsk_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config defaults and overlays", "[experiments][config]") {
  const RunConfig c = validate_config("", "group-geometry");
  CHECK(c.scenario == "group-geometry");
  CHECK(c.n == 2);
  CHECK(c.morrey.p == 2.0);
  CHECK(c.morrey.kappa == 0.5);
  CHECK(c.budget_scale == 1.0);

  const RunConfig d = validate_config(R"({"n": 3, "seed": 9, "budgets": {"samples": 10}, "budget_scale": 0.5})",
                                      "group-geometry");
  CHECK(d.n == 3);
  CHECK(d.seed == 9);
  CHECK(d.budget("samples") == 5);
  CHECK(d.budget("samples", 64) == 64);

  // the document may name the scenario itself
  CHECK(validate_config(R"({"scenario": "kernel-bounds"})").scenario == "kernel-bounds");
  for (const auto& name : scenario_names()) CHECK_NOTHROW(validate_config("{}", name));
}

TEST_CASE("config violations lead with a field path", "[experiments][config]") {
  CHECK(has_violation(violations_of(R"({"morrey": {"kappa": 1}})"), "morrey.kappa", "κ∈(0,1)"));
  CHECK(has_violation(violations_of(R"({"morrey": {"kappa": 0}})"), "morrey.kappa", "κ∈(0,1)"));
  CHECK(has_violation(violations_of(R"({"morrey": {"p": 1}})"), "morrey.p", "p>1"));
  CHECK(has_violation(violations_of(R"({"n": 1})"), "n", "n≥2"));
  CHECK(has_violation(violations_of(R"({"weight": {"kind": "power", "a": 10.5}})"), "weight.a", "a∈("));
  CHECK(violations_of(R"({"weight": {"kind": "power", "a": 10.5}, "divergence_test": true})").empty());
  CHECK(has_violation(violations_of(R"({"colour": 1})"), "colour", "unknown key"));
  CHECK(has_violation(violations_of(R"({"morrey": {"q": 2}})"), "morrey.q", "unknown key"));
  CHECK(has_violation(violations_of(R"({"b": [{"kind": "log-hnorm", "radius": 1, "bogus": 0}]})"), "b[0].bogus",
                      "unknown key"));
  CHECK(has_violation(violations_of(R"({"b": [{"kind": "wavelet"}]})"), "b[0].kind", "wavelet"));
  CHECK(has_violation(violations_of(R"({"seed": "abc"})"), "seed", ""));
  CHECK(has_violation(violations_of(R"({"scenario": "kernel-bounds"})", "group-geometry"), "scenario", "does not match"));
  CHECK(has_violation(violations_of("{}", "no-such-scenario"), "scenario", "unknown scenario"));
  CHECK(has_violation(violations_of("{\"n\": 2,"), "config", "malformed"));
  CHECK(has_violation(violations_of("[1, 2]"), "config", "expected an object"));

  // every violation is reported, not only the first
  const auto v = violations_of(R"({"morrey": {"p": 0.5, "kappa": 2}, "budget_scale": -1})");
  CHECK(has_violation(v, "morrey.p", "p>1"));
  CHECK(has_violation(v, "morrey.kappa", "κ∈(0,1)"));
  CHECK(has_violation(v, "budget_scale", "positive"));
}

TEST_CASE("option types follow the defaults", "[experiments][config]") {
  CHECK(validate_config(R"({"options": {"decades": 2}})", "commutator-boundedness").options["decades"] == 2);
  CHECK(has_violation(violations_of(R"({"options": {"decades": "two"}})", "commutator-boundedness"), "options.decades", ""));
  CHECK(has_violation(violations_of(R"({"options": {"nonsense": 1}})", "commutator-boundedness"), "options.nonsense",
                      "unknown key"));
}

TEST_CASE("config round-trips through its echo", "[experiments][config]") {
  for (const auto& name : scenario_names()) {
    const RunConfig c = validate_config("{}", name);
    const RunConfig again = validate_config(c.to_json().dump(), name);
    CHECK(again.to_json() == c.to_json());
  }
}

TEST_CASE("table csv carries its schema", "[experiments][report]") {
  Table t("demo", "qsk.demo/1", {"name", "count", "value"});
  t.add({cell(std::string("a")), cell(3), cell(0.1)});
  CHECK(t.csv() == "# schema: qsk.demo/1\nname,count,value\na,3,0.10000000000000001\n");
  CHECK_THROWS_AS(t.add({cell(1)}), std::invalid_argument);
}

TEST_CASE("checks evaluate their relation", "[experiments][report]") {
  CHECK(make_check("x", "", "", 1.0, 0.0, "<=", 1.0).pass);
  CHECK_FALSE(make_check("x", "", "", 1.0, 0.0, "<", 1.0).pass);
  CHECK(make_check("x", "", "", 2.0, 0.0, ">", 1.0).pass);
  CHECK_FALSE(make_check("x", "", "", 0.5, 0.0, ">=", 1.0).pass);
  CHECK_THROWS_AS(make_check("x", "", "", 0.5, 0.0, "==", 1.0), std::invalid_argument);
}

TEST_CASE("emit_report writes a hashed manifest", "[experiments][report]") {
  const fs::path dir = scratch("emit");
  RunReport empty;
  empty.config = validate_config("", "group-geometry");
  const Manifest m = emit_report(empty, dir);
  REQUIRE(m.files.size() == 1);
  CHECK(m.files[0].file == "summary.json");
  CHECK(fs::exists(m.directory / "manifest.json"));
  CHECK(m.directory.parent_path() == dir);
  CHECK(empty.passed());

  const std::string text = read_file(m.directory / "summary.json");
  CHECK(sha256_hex(text) == m.files[0].sha256);
  CHECK(text.size() == m.files[0].bytes);
  const auto summary = json::parse(text);
  CHECK(summary["config"]["scenario"] == "group-geometry");
  CHECK(summary["checks"].empty());

  // a second emission never reuses the directory
  const Manifest again = emit_report(empty, dir);
  CHECK(again.directory != m.directory);
  fs::remove_all(dir);

  // sha256 of "abc"
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("summary numbers carry an error or a tolerance", "[experiments][report]") {
  RunConfig c = validate_config(R"({"budget_scale": 0.01})", "group-geometry");
  const RunReport r = run_scenario(c);
  const json s = r.summary();
  for (const auto& chk : s["checks"]) {
    CHECK(chk.contains("std_error"));
    CHECK(chk.contains("tolerance"));
  }
  for (const auto& k : s["constants"]) CHECK(k.contains("std_error"));
}

TEST_CASE("group-geometry passes and reruns byte-identically", "[experiments][scenario]") {
  RunConfig c = validate_config(R"({"seed": 7, "budget_scale": 0.05})", "group-geometry");
  const RunReport a = run_scenario(c);
  CHECK(a.passed());
  CHECK(a.checks.size() >= 12);
  const RunReport b = run_scenario(c);
  REQUIRE(a.tables.size() == b.tables.size());
  for (std::size_t i = 0; i < a.tables.size(); ++i) CHECK(a.tables[i].csv() == b.tables[i].csv());

  const fs::path dir = scratch("rerun");
  const Manifest ma = emit_report(a, dir), mb = emit_report(b, dir);
  REQUIRE(ma.files.size() == mb.files.size());
  for (std::size_t i = 0; i < ma.files.size(); ++i) CHECK(ma.files[i].sha256 == mb.files[i].sha256);
  fs::remove_all(dir);
}

TEST_CASE("kernel-identities passes at a small budget", "[experiments][scenario]") {
  const RunReport r = run_scenario(validate_config(R"({"budget_scale": 0.05})", "kernel-identities"));
  CHECK(r.passed());
  bool closed = false;
  for (const auto& c : r.checks) closed = closed || c.id == "kernel.s_at_1";
  CHECK(closed);
}

TEST_CASE("scenario config errors surface as ConfigError", "[experiments][scenario]") {
  RunConfig c = validate_config("", "truncation-gap");
  c.b = {FieldSpec{}};
  c.b[0].kind = "log-hnorm";
  CHECK_THROWS_AS(run_scenario(c), ConfigError);
  c = validate_config("", "group-geometry");
  c.morrey.kappa = 1.0;
  CHECK_THROWS_AS(run_scenario(c), ConfigError);
}
