#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cgff/config.hpp"
#include "cgff/interlace.hpp"

namespace cgff {

inline constexpr const char* kReportSchema = "cgff-report/1";

// Every estimate carries its interval, replica count and seed.
struct Estimate {
  std::string name;
  double point = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  int64_t replicas = 0;
  uint64_t seed = 0;
};

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

// One CSV file: <kind>_<name>.csv.
struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<Estimate> estimates;
  std::vector<Check> checks;
  std::vector<Table> tables;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> field_dumps;  // relative paths written during the run
  bool complete = true;
  std::string error;
  bool all_pass() const;
};

Estimate rate_estimate(const std::string& name, const RateEstimate& r, uint64_t seed);
// Normal interval point +- 1.96 se.
Estimate mean_estimate(const std::string& name, double mean, double se, int64_t replicas, uint64_t seed);

// Runs the experiment named by config.kind. The config is validated first.
// Field dumps, if any, go to <out_dir>/fields; an empty out_dir skips them.
ExperimentResult run(const ExperimentConfig& config, const std::string& out_dir = "");

// JSON document of a result; the "timestamp" member is the only field that
// differs between replays of the same config.
nlohmann::json report_json(const ExperimentResult& r, bool with_timestamp = true);
std::string to_csv(const Table& t);
// Writes <dir>/<kind>.json and one CSV per table. Files are written to a
// temporary name and renamed, so a failed write leaves no partial report.
std::vector<std::string> emit_report(const ExperimentResult& r, const std::string& dir);

// Quarter bridges from a vertex whose boundary values all equal `boundary`
// (NaN means K(h)): simulated frequency of G against the closed form.
struct CompositionCheck {
  double h = 0.0, K = 0.0, boundary = 0.0;
  double exact = 0.0;
  double estimate = 0.0, se = 0.0, z = 0.0;
  int64_t replicas = 0;
};
CompositionCheck flip_composition_check(int d, double h, double boundary, int replicas, uint64_t seed,
                                        const TruncationConstants& c = {});

// psi growth summary for one T.
struct PsiGrowthRow {
  int64_t T = 0;
  double median_capacity = 0.0;
  Interval median_ci;          // order-statistic interval
  double confinement_radius = 0.0;  // R = T^{(1+eps)/2}
  RateEstimate confined;
  RunningStats capacity;
};
std::vector<PsiGrowthRow> psi_growth_experiment(int d, double u, const std::vector<int64_t>& T, int k, double eps,
                                                int replicas, uint64_t seed, int threads);

// Small random potentials on [0, 4)^d and their exponential moments.
struct LaplaceRow {
  std::vector<std::pair<Point, double>> V;
  double exact = 0.0;
  double norm = 0.0;
  RunningStats empirical;
  double z = 0.0;
};
struct LaplaceCheckReport {
  RunningStats mean_local_time;  // window average of ell per replica
  std::vector<LaplaceRow> rows;
};
LaplaceCheckReport laplace_check(int d, double u, int potentials, double strength, int replicas, uint64_t seed,
                                 int threads, double halo_factor = 4.0);

}  // namespace cgff
