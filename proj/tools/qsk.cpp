#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qsk/experiments.hpp"

namespace ex = qsk::experiments;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> budget_scale;
};

int run(const std::string& scenario, const Flags& flags) {
  ex::RunConfig cfg;
  try {
    const std::string raw = flags.config.empty() ? std::string() : ex::read_file(flags.config);
    cfg = ex::validate_config(raw, scenario);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.output_dir = *flags.out;
    if (flags.budget_scale) cfg.budget_scale = *flags.budget_scale;
    ex::check_config(cfg);
  } catch (const ex::ConfigError& e) {
    for (const auto& v : e.violations()) std::cerr << "config error: " << v << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  ex::RunReport report;
  try {
    report = ex::run_scenario(cfg);
  } catch (const ex::ConfigError& e) {
    for (const auto& v : e.violations()) std::cerr << "config error: " << v << "\n";
    return 2;
  }
  for (const auto& c : report.checks)
    std::printf("%s %-40s %.6g %s %.6g  [%s]\n", c.pass ? "PASS" : "FAIL", c.id.c_str(), c.value, c.relation.c_str(),
                c.tolerance, c.operation.c_str());
  const ex::Manifest m = ex::emit_report(report, cfg.output_dir);
  std::printf("wrote %s\n", m.directory.string().c_str());
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quaternionic Heisenberg group experiments"};
  app.require_subcommand(0, 1);
  bool list = false;
  app.add_flag("--list-scenarios", list, "Print the scenario names and exit");

  Flags flags;
  std::string chosen;
  for (const auto& name : ex::scenario_names()) {
    CLI::App* sub = app.add_subcommand(name, "Run the " + name + " scenario");
    sub->add_option("--config", flags.config, "JSON config overlaid on the scenario defaults")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Master seed");
    sub->add_option("--out", flags.out, "Output directory; each run gets a fresh subdirectory");
    sub->add_option("--budget-scale", flags.budget_scale, "Multiplier on every sample budget");
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& name : ex::scenario_names()) std::cout << name << "\n";
    return 0;
  }
  if (chosen.empty()) {
    std::cerr << app.help();
    return 2;
  }
  try {
    return run(chosen, flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
