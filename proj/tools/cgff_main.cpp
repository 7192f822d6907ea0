#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cgff/config.hpp"
#include "cgff/experiments.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitUsage = 2;

struct Flags {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> replicas;
  std::optional<int> threads;
};

int run_kind(const std::string& kind, const Flags& f) {
  cgff::ExperimentConfig c;
  try {
    c = cgff::load_config(f.config, kind);
    cgff::apply_env_overrides(c);
    if (f.seed) c.seed = *f.seed;
    if (f.out) c.out = *f.out;
    if (f.replicas) c.replicas = *f.replicas;
    if (f.threads) c.threads = *f.threads;
    cgff::validate(c);
  } catch (const cgff::ConfigError& e) {
    std::cerr << f.config << ": " << e.what() << "\n";
    return kExitUsage;
  }
  std::cout << kind << " config " << c.hash() << " seed " << c.seed << " replicas " << c.replicas << "\n";
  cgff::ExperimentResult r;
  try {
    r = cgff::run(c, c.out);
  } catch (const std::exception& e) {
    r = cgff::ExperimentResult{};
    r.config = c;
    r.complete = false;
    r.error = e.what();
    std::cerr << "run failed: " << e.what() << "\n";
  }
  try {
    for (const auto& p : cgff::emit_report(r, c.out)) std::cout << "wrote " << p << "\n";
  } catch (const std::exception& e) {
    std::cerr << "report: " << e.what() << "\n";
    return kExitInvariant;
  }
  for (const auto& ch : r.checks) {
    std::cout << (ch.pass ? "PASS " : "FAIL ") << ch.name;
    if (!ch.detail.empty()) std::cout << " (" << ch.detail << ")";
    std::cout << "\n";
  }
  if (!r.complete) std::cout << "INCOMPLETE " << r.error << "\n";
  return r.all_pass() ? kExitPass : kExitInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Level-set percolation experiments for the Gaussian free field"};
  app.require_subcommand(1);
  Flags flags;
  std::string chosen;
  for (const auto& kind : cgff::experiment_kinds()) {
    CLI::App* sub = app.add_subcommand(kind, "run the " + kind + " experiment");
    sub->add_option("--config", flags.config, "INI or JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "override run.seed");
    sub->add_option("--out", flags.out, "override run.out");
    sub->add_option("--replicas", flags.replicas, "override run.replicas");
    sub->add_option("--threads", flags.threads, "override run.threads");
    sub->callback([&chosen, kind] { chosen = kind; });
  }
  CLI::App* keys = app.add_subcommand("config-keys", "list every accepted config key");
  keys->callback([&chosen] { chosen = "config-keys"; });
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }
  if (chosen == "config-keys") {
    for (const auto& k : cgff::config_keys()) std::cout << k << "\n";
    return kExitPass;
  }
  return run_kind(chosen, flags);
}
