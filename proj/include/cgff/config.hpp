#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cgff/cable.hpp"

namespace cgff {

// Validation failure; line is 0 when the problem is not tied to one line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

const std::vector<std::string>& experiment_kinds();

struct ExperimentConfig {
  std::string kind;

  // lattice
  int d = 3;
  std::vector<int64_t> L{16, 32, 64};
  int64_t slab_thickness = 4;
  int64_t window = 10;  // side of the sampling window for iso / connectivity
  std::string mode = "lattice";

  // levels
  std::vector<double> h;
  std::vector<double> u{1.0};
  std::vector<double> eps{0.25};

  // run
  int replicas = 400;
  uint64_t seed = 1;
  int threads = 1;
  int bootstrap = 1000;
  std::string out = "out";

  // constants
  TruncationConstants constants;
  double delta = 1.0 / 6.0;
  double halo_factor = 4.0;
  double buffer_fraction = 0.25;
  double truncation_K = 3.5;

  // renorm
  int64_t L0 = 2;
  int64_t l0 = 5;
  int64_t ld = 2;
  int n_max = 2;
  double q = 0.02;
  double K = 2.1;
  std::string seed_kind = "gff-c";
  int cascade_instances = 20;
  int cascade_d = 2;

  // decouple
  std::string decouple_kind = "both";
  int64_t r = 4;
  int64_t s = 8;
  int pilot = 400;

  // flip
  int boundaries = 200;
  int inner = 4000;

  // psi growth
  std::vector<int64_t> T{64, 256, 1024};
  int k = 1;
  int64_t confine_from = 0;  // confinement is asserted for T >= confine_from

  // laplace
  int potentials = 5;
  double strength = 0.05;

  // Canonical "section.key = value" lines of every field, sorted; the hash input.
  std::string canonical() const;
  std::string hash() const;  // 16 hex digits (FNV-1a 64)
};

// Defaults depend on the experiment kind; file values override them.
ExperimentConfig default_config(const std::string& kind);

// INI-style text ("[section]" headers, "key = value", '#' or ';' comments).
// Unknown sections or keys are rejected with their line number.
ExperimentConfig parse_config_text(const std::string& text, const std::string& kind_hint = "");
// JSON object {"section": {"key": value}}.
ExperimentConfig parse_config_json(const std::string& text, const std::string& kind_hint = "");
// Picks the parser by extension (.json) or first non-blank character.
ExperimentConfig load_config(const std::string& path, const std::string& kind_hint = "");

// Sets one "section.key" from its text form.
void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value, int line = 0);
// Applies CGFF_<SECTION>_<KEY> variables (e.g. CGFF_RUN_SEED); returns the keys applied.
std::vector<std::string> apply_env_overrides(ExperimentConfig& c);
// Range and consistency checks for the configured kind.
void validate(const ExperimentConfig& c);

std::vector<std::string> config_keys();

}  // namespace cgff
