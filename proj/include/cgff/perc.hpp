#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cgff/cable.hpp"
#include "cgff/gff.hpp"
#include "cgff/interlace.hpp"
#include "cgff/lattice.hpp"
#include "cgff/stats.hpp"

namespace cgff {

enum class PercMode { lattice, cable, slab, truncated };
std::string to_string(PercMode m);
PercMode parse_mode(const std::string& s);

// Open vertices and edges of a box; edge index vertex * d + axis.
struct OpenConfig {
  Box box;
  std::vector<uint8_t> vertex_open;
  std::vector<uint8_t> edge_open;
  double h = 0.0;
  std::string mode = "lattice";
  uint64_t field_seed = 0;
  uint64_t field_stream = 0;
};

// E^{>=h}: vertex open iff value >= h, edge open iff both ends open.
OpenConfig vertex_level_set(const VertexField& f, double h);
// {h <= value <= K}.
OpenConfig truncated_level_set(const VertexField& f, double h, double K);

// One uniform per edge slot (vertex * d + axis), for nested level sets.
std::vector<double> edge_uniforms(const Box& box, Stream& rng);
// Cable set {phi >= -h}: vertices with phi >= -h, edge open iff the bridge
// stays above -h, i.e. U < 1 - exp(-2 (phi_x + h)(phi_y + h)).
OpenConfig cable_level_set(const VertexField& f, double h, const std::vector<double>& uniforms);
OpenConfig cable_level_set(const VertexField& f, double h, Stream& rng);
// Smallest h at which the cable edge with uniform U is open.
double cable_edge_threshold(double phi_x, double phi_y, double uniform);

struct ClusterLabeling {
  std::vector<int64_t> label;  // component id (dense, from 0) or -1 for closed vertices
  std::vector<int64_t> sizes;
  std::vector<uint8_t> crossing;  // per axis: one component touches both faces
  int64_t largest = 0;
};

ClusterLabeling label_clusters(const OpenConfig& cfg);

// Window of a box with `buffer` vertices removed on every side of the listed axes.
Box inner_window(const Box& box, int64_t buffer, int axes = kMaxDim);

// Largest t such that {value >= t} (lattice) or the cable set {phi >= t}
// crosses `window` along axis 0. -inf if it never does.
double crossing_threshold(const VertexField& f, const Box& window, bool cable, Stream& rng);
// Crossing indicator at each listed level, same edge randomness for all levels.
std::vector<uint8_t> crosses_at(const VertexField& f, const Box& window, bool cable, const std::vector<double>& h,
                                Stream& rng);

struct CrossingOptions {
  double buffer_fraction = 0.25;
  int64_t slab_thickness = 4;
  double truncation_K = 3.5;  // upper cut in truncated mode
  int threads = 1;
};

inline constexpr size_t kDirectLevels = 3;

struct CrossingRow {
  int64_t L = 0;
  double h = 0.0;
  PercMode mode = PercMode::lattice;
  RateEstimate crossing;
};

struct CrossingTable {
  int d = 3;
  PercMode mode = PercMode::lattice;
  uint64_t seed = 0;
  std::vector<int64_t> L;
  std::vector<double> h;
  std::vector<CrossingRow> rows;
  // per L, per replica: crossing threshold; filled for grids longer than kDirectLevels
  std::vector<std::vector<double>> thresholds;
  const CrossingRow& at(size_t li, size_t hi) const { return rows[li * h.size() + hi]; }
};

// Fraction of replicas whose level set {>= h} crosses the inner window of
// side L (field sampled on side L + 2 buffer, zero outside).
CrossingTable crossing_curve(int d, const std::vector<int64_t>& L, const std::vector<double>& h, int replicas,
                             PercMode mode, uint64_t seed, const CrossingOptions& opt = {});

struct HstarEstimate {
  std::optional<double> hstar;
  Interval ci;
  double ci_coverage = 0.0;  // fraction of bootstrap replicates with a crossing
  std::vector<double> pair_estimates;
  std::optional<double> pc;
  bool indeterminate = true;
};

// Crossing point of two curves sampled on a common grid; none if they never cross.
std::optional<double> curve_crossing(const std::vector<double>& h, const std::vector<double>& small_box,
                                     const std::vector<double>& large_box);
HstarEstimate estimate_hstar(const CrossingTable& t, int bootstrap, uint64_t seed);
double estimate_pc(double hstar, int d);

struct SignClusterRow {
  double h = 0.0;
  RateEstimate plus;   // E^{>=h} spans
  RateEstimate minus;  // E^{<h} spans
  RateEstimate both;
};

std::vector<SignClusterRow> sign_cluster_experiment(int d, int64_t L, int replicas, const std::vector<double>& h,
                                                    uint64_t seed, const CrossingOptions& opt = {});

// Star of x: quarter edges x + [0, v/4). Boundary values at the 2d points x + v/4.
struct FlipBoundary {
  int d = 3;
  std::vector<double> b;  // order: axis 0 +, axis 0 -, axis 1 +, ...
  double beta() const;
};

struct FlipEvents {
  double h = 0.0;
  double K = 0.0;
  bool all_within_K = false;  // every boundary value in [-K, K]
  bool E = false;             // union over v of E^{x,v}
  bool G = false;
  bool phi_above_h = false;
  std::vector<uint8_t> E_v, F_v;
};

// Realises the events given the boundary, the centre value and one uniform per quarter bridge.
FlipEvents flip_events(const FlipBoundary& b, double h, double K, double phi_x, const std::vector<double>& uniforms);

// Exact conditional probabilities given the boundary (one-dimensional quadrature over phi_x).
double flip_prob_G(const FlipBoundary& b, double h, double K);
double flip_prob_E_above(const FlipBoundary& b, double h, double K);

// Boundary values drawn from the cable field law around a vertex.
FlipBoundary sample_flip_boundary(int d, Stream& rng);

struct FlipBoundaryRow {
  double beta = 0.0;
  double p_G = 0.0, p_E = 0.0;  // estimated
  double diff = 0.0, diff_se = 0.0;
  double exact_G = 0.0, exact_E = 0.0;
  bool estimate_holds = true;  // diff <= 3 se
  bool exact_holds = true;
};

struct FlipLevelReport {
  double h = 0.0;
  double K = 0.0;
  std::vector<FlipBoundaryRow> boundaries;
  bool all_hold = true;
  int64_t exact_violations = 0;
  double worst_z = -1e300;
};

struct FlipReport {
  std::vector<FlipLevelReport> levels;
  std::optional<double> h1;  // largest grid h where every boundary passes
};

FlipReport flip_experiment(int d, const std::vector<double>& h_grid, int boundary_samples, int inner_replicas,
                           uint64_t seed, int threads = 1, const TruncationConstants& c = {});

// Monotone pair (1{Y <= pf}, 1{Y <= pg}) from one uniform Y.
std::pair<bool, bool> shared_uniform_pair(double pf, double pg, double Y);

}  // namespace cgff
