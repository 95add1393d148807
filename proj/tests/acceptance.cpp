// Acceptance run: every scenario at its default config, checks grouped into
// criteria AC1-AC12, one PASS/FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qsk/experiments.hpp"

namespace ex = qsk::experiments;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  std::string id;
  std::string scenario;
  std::vector<std::string> checks;  ///< check ids; empty selects all of the scenario's checks
  double limit_s;
  std::string what;
};

struct Outcome {
  ex::RunReport report;
  ex::Manifest manifest;
  double seconds = 0.0;
};

std::string describe(const ex::Check& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s %.4g %s %.4g", c.id.c_str(), c.value, c.relation.c_str(), c.tolerance);
  return buf;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance-runs");
  fs::remove_all(out);

  const std::vector<Criterion> criteria{
      {"AC1", "group-geometry", {}, 10, "algebra and group identities, abs err <= 1e-12"},
      {"AC2", "kernel-identities",
       {"kernel.component1_closed_form", "kernel.component1_second_difference", "kernel.s_at_1", "kernel.s_at_2"}, 1,
       "n=2 kernel component 1 closed form, s(1)=12, s(2)=0.375"},
      {"AC3", "kernel-identities", {"kernel.homogeneity", "kernel.gradient_homogeneity"}, 30,
       "homogeneity of K and |Y_j K|, rel err <= 1e-10"},
      {"AC4", "kernel-bounds", {"size.stable", "gradient.stable", "holder.stable"}, 300,
       "running sups stable from 5e5 to 1e6 samples"},
      {"AC5", "kernel-bounds", {"lower_bound.success", "lower_bound.c_positive"}, 300,
       "companion scan: >= 95% of base points, global c > 0"},
      {"AC6", "f0-bounds", {"median.split", "f0.a0", "f0.mean_zero", "f0.sign"}, 120,
       "sampled median split, |a0| <= 1/2, mean zero, sign"},
      {"AC7", "weights-and-norms", {"ap.", "doubling."}, 300, "A_p characteristics, refinement, doubling, divergence"},
      {"AC8", "truncation-gap", {}, 600, "truncation-gap constant stable within 2x over eta"},
      {"AC9", "commutator-boundedness", {}, 1200, "Morrey ratio growth per decade: BMO < 30%, non-BMO >= 2x"},
      {"AC10", "vmo-diagnostics+compactness-probe", {"separation."}, 1800,
       "VMO curves vanish, log floor, separation bounded below and uniform"},
      {"AC11", "compactness-probe", {"kr."}, 600, "Kolmogorov-Riesz tails decay, exponent >= 0.9 kappa Q"},
  };

  std::map<std::string, Outcome> runs;
  std::vector<std::string> order;
  const auto run = [&](const std::string& scenario, const fs::path& dir) {
    const ex::RunConfig cfg = ex::validate_config("", scenario);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    o.report = ex::run_scenario(cfg);
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.manifest = ex::emit_report(o.report, dir);
    return o;
  };
  for (const auto& name : ex::scenario_names()) {
    runs[name] = run(name, out / "first");
    order.push_back(name);
    std::fprintf(stderr, "ran %s in %.1f s\n", name.c_str(), runs[name].seconds);
  }

  int failed = 0;
  const auto line = [&](const std::string& id, bool pass, const std::string& detail) {
    std::printf("%s %s %s\n", id.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
    failed += pass ? 0 : 1;
  };

  for (const auto& c : criteria) {
    std::vector<std::string> scenarios;
    if (c.id == "AC10") scenarios = {"vmo-diagnostics", "compactness-probe"};
    else scenarios = {c.scenario};
    bool pass = true;
    double seconds = 0.0;
    std::string detail;
    std::size_t used = 0;
    for (const auto& s : scenarios) {
      const Outcome& o = runs.at(s);
      seconds += o.seconds;
      for (const auto& chk : o.report.checks) {
        bool take = c.checks.empty() || s == "vmo-diagnostics";
        for (const auto& prefix : c.checks) take = take || starts_with(chk.id, prefix);
        if (!take) continue;
        ++used;
        pass = pass && chk.pass;
        detail += (detail.empty() ? "" : "; ") + describe(chk) + (chk.pass ? "" : " [fail]");
      }
    }
    if (used == 0) {
      pass = false;
      detail = "no checks selected";
    }
    const bool in_time = seconds < c.limit_s;
    char timing[96];
    std::snprintf(timing, sizeof timing, " | %.1f s < %.0f s%s", seconds, c.limit_s, in_time ? "" : " [over]");
    line(c.id, pass && in_time, c.what + " | " + detail + timing);
  }

  // AC12: a second run of every scenario must reproduce every CSV byte for byte
  bool same = true;
  std::string diff;
  std::size_t files = 0;
  for (const auto& name : order) {
    const Outcome again = run(name, out / "second");
    const auto& a = runs.at(name).manifest.files;
    const auto& b = again.manifest.files;
    if (a.size() != b.size()) {
      same = false;
      diff += " " + name + ":file-count";
      continue;
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].file.size() < 4 || a[i].file.substr(a[i].file.size() - 4) != ".csv") continue;
      ++files;
      if (a[i].file != b[i].file || a[i].sha256 != b[i].sha256) {
        same = false;
        diff += " " + name + "/" + a[i].file;
      }
    }
  }
  line("AC12", same && files > 0,
       "rerun with the same config and seed | " + std::to_string(files) + " CSV files compared by SHA-256" +
           (same ? "" : "; differ:" + diff));
  return failed == 0 ? 0 : 1;
}
