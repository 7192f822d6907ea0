#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cgff/gff.hpp"
#include "cgff/interlace.hpp"
#include "cgff/iso.hpp"
#include "cgff/lattice.hpp"
#include "cgff/rng.hpp"
#include "cgff/stats.hpp"

namespace cgff {

// Scale ladder L_n = l0^n L0 on the coarse lattices G_n = L_n Z^d.
// Coarse vertices are stored in index units of their own level: point / L_n.
struct ScaleSystem {
  int d = 3;
  int64_t L0 = 1;
  int64_t l0 = 0;
  int64_t ld = 0;         // l(d)
  int n_max = 0;
  int shells = 0;         // concentric shells used by the cascade, 5*4^d+1 when they fit
  bool surrogate = false;
  std::vector<int64_t> L;  // L[0..n_max]

  // Minimal l-inf distance between two witnesses, in index units of the child level:
  // smallest k with k * l(d) >= l0.
  int64_t separation() const { return (l0 + ld - 1) / ld; }
  // Shells fit into the annulus L_n..2L_n: 16 (shells - 1) + 2 <= l0.
  bool shells_fit() const { return 16 * (shells - 1) + 2 <= l0; }
  // Pigeonhole closes: more than 5 * 4^d shells and 12 L_{n-1} >= L_n / l(d).
  bool pigeonhole_guaranteed() const;
  std::string describe() const;
};

int64_t reference_shell_count(int d);  // 5 * 4^d + 1
int64_t reference_ld(int d);           // 4 (5 * 4^d + 1)
int64_t reference_l0(int d);           // 4 l(d)

// Reference parameters unless (l0, l(d)) is given. Accepts d >= 2 (the planar case is used by the cascade).
ScaleSystem build_scales(int d, int64_t L0, int n_max, std::optional<std::pair<int64_t, int64_t>> surrogate = {});

// Seed families, one bit each; a set bit means the complement event occurs (the vertex is bad for it).
enum SeedFamily : uint8_t { kFamC = 1, kFamChat = 2, kFamD = 4, kFamE = 8, kFamF = 16 };
constexpr int kNumFamilies = 5;
const char* family_name(int bit_index);

struct SeedOutcome {
  Point x{};  // index units of G_0
  bool C = true, Chat = true, D = true, E = true, F = true;
  uint8_t bad_mask() const;
  bool good() const { return bad_mask() == 0; }
};

struct SeedParams {
  double u = 1.0;
  double K = 1.0;
  int64_t L0 = 1;
};

// Inputs of the seed events. Any of ell/trace, phi, theta may be null, in
// which case the corresponding events are reported as holding.
struct SeedLayers {
  const LocalTimes* ell = nullptr;
  const std::vector<uint8_t>* trace = nullptr;  // edge trace over ell->window
  const VertexField* phi = nullptr;
  const ThetaField* theta = nullptr;
};

// Events C, Chat, D, E, F for every G_0 vertex of `region` (index units).
std::vector<SeedOutcome> classify_seeds(const SeedLayers& layers, const Box& region, const SeedParams& p);

// Sparse bad configuration: coarse vertex -> family mask (nonzero entries only).
using CoarseConfig = std::unordered_map<Point, uint8_t, PointHash>;
CoarseConfig to_config(const std::vector<SeedOutcome>& seeds);

int64_t floor_div(int64_t a, int64_t b);

struct Witness {
  Point x{};   // level-n vertex, index units of G_n
  int family = 0;
  Point x1{}, x2{};  // level-(n-1) children, index units of G_{n-1}
};

struct LevelEval {
  int n = 0;
  CoarseConfig bad;
  std::vector<Witness> witnesses;  // one per (vertex, family) that holds
};

// Level n from level n-1: a family holds at x when two children in Lambda_{x,n}
// at separation >= L_n / l(d) both hold for it.
LevelEval eval_recursive(const CoarseConfig& children, const ScaleSystem& s, int n);
// Level 0 (the seeds) through n.
std::vector<LevelEval> eval_levels(const CoarseConfig& seeds, const ScaleSystem& s, int n);
// Independent re-check of membership, separation and child outcomes.
bool validate_witness(const Witness& w, const CoarseConfig& children, const ScaleSystem& s);

// Exact one-step recursion for i.i.d. seeds: probability that Lambda contains two
// true children at separation, given each child is true independently with probability p.
double iid_recursion_step(double p, const ScaleSystem& s);
std::vector<double> iid_recursion(double q, const ScaleSystem& s, int n);

// Planar bitmap of G_0 vertices x + L0 * (i, j), |i|, |j| <= half.
struct PlanarGrid {
  int64_t half = 0;
  std::vector<uint8_t> bad;
  explicit PlanarGrid(int64_t h = 0) : half(h), bad(static_cast<size_t>((2 * h + 1) * (2 * h + 1)), 0) {}
  int64_t side() const { return 2 * half + 1; }
  bool inside(int64_t i, int64_t j) const { return std::max(std::abs(i), std::abs(j)) <= half; }
  uint8_t& at(int64_t i, int64_t j) { return bad[size_t((i + half) * side() + (j + half))]; }
  uint8_t at(int64_t i, int64_t j) const { return bad[size_t((i + half) * side() + (j + half))]; }
};

// *-path (l-inf steps) of bad vertices from the box |.|_inf <= m to the sphere
// |.|_inf = nn, staying inside |.|_inf <= nn. Radii in index units, 0 <= m < nn <= half.
std::optional<std::vector<std::pair<int64_t, int64_t>>> find_bad_star_path(const PlanarGrid& g, int64_t m, int64_t nn);
// Bad *-circuit inside the annulus m < |.|_inf < nn surrounding the m-box,
// detected by the absence of a nearest-neighbour good crossing of the annulus.
bool bad_star_circuit(const PlanarGrid& g, int64_t m, int64_t nn);

struct CascadeResult {
  enum class Status { witness, counterexample, refused };
  Status status = Status::refused;
  std::string reason;
  int n = 0;
  Point x0{};      // level-n bad vertex, index units of G_n
  int family = 0;
  Point z1{}, z2{};  // the two level-(n-1) witnesses, index units of G_{n-1}
  int64_t path_length = 0;
  std::vector<Point> shell_points;  // y_i at the top level, index units of G_{n-1}
};

// Replays the shell construction on a level-0 bad configuration (index units of G_0)
// around x (index units of G_n): *-path from x + [-L_n, L_n]^d to x + d[-2L_n, 2L_n]^d,
// shell witnesses, pigeonhole onto a level-n cell.
CascadeResult cascade_witness(const CoarseConfig& bad0, const ScaleSystem& s, int n, const Point& x);
// Random bad *-path from the inner box to the outer sphere at level n around 0, random
// family masks, plus `noise` isolated bad vertices.
CoarseConfig random_bad_path(const ScaleSystem& s, int n, int64_t noise, Stream& rng);

// ---------------------------------------------------------------- decoupling

enum class DecoupleKind { interlacement, gff };
enum class Monotonicity { increasing, decreasing };

struct BoxEvent {
  std::string name;
  Monotonicity dir = Monotonicity::increasing;
  // statistic of the box values compared against a threshold
  enum class Stat { average, maximum, minimum, occupied_fraction } stat = Stat::average;
  bool above = true;       // event {stat >= t} when true, {stat <= t} otherwise
  double threshold = 0.0;  // fixed before the measurement run
  bool eval(const std::vector<double>& v) const;
};

struct DecouplingOptions {
  int d = 3;
  int64_t r = 4;
  int64_t s = 8;
  double eps = 0.25;
  double u = 1.0;
  int replicas = 4000;
  int pilot_replicas = 400;  // for the event thresholds
  uint64_t seed = 1;
  int threads = 1;
  double halo_factor = 4.0;
};

struct DecouplingRow {
  BoxEvent event;
  double lhs = 0.0, lhs_se = 0.0;        // E[f1 f2]
  double rhs = 0.0, rhs_se = 0.0;        // E'[f1] E'[f2] at the sprinkled level
  double diff_se = 0.0;                  // se of rhs - lhs, delta method on shared samples
  double slack = 0.0;                    // max(0, lhs - rhs)
  double z = 0.0;                        // (lhs - rhs) / diff_se
  int64_t monotonicity_violations = 0;
  bool pass = false;                     // lhs <= rhs + 3 diff_se
};

struct DecouplingReport {
  DecoupleKind kind = DecoupleKind::interlacement;
  DecouplingOptions options;
  Box A1, A2;
  std::vector<DecouplingRow> rows;
  bool all_pass() const;
};

std::string to_string(DecoupleKind k);
DecoupleKind parse_decouple_kind(const std::string& s);
// Four monotone families per kind; thresholds are filled from the pilot run.
std::vector<BoxEvent> default_events(DecoupleKind k);
DecouplingReport decoupling_test(DecoupleKind kind, std::vector<BoxEvent> events, const DecouplingOptions& opt);

// ------------------------------------------------------------ decay of bad events

enum class SeedKind { iid, gff_c };

struct DecayOptions {
  SeedKind kind = SeedKind::iid;
  int d = 3;
  double q = 0.02;   // iid seed badness
  double K = 1.5;    // gff_c: C fails when max > K, Chat fails when min < -K
  int64_t L0 = 1;
  int64_t l0 = 4;
  int64_t ld = 2;
  int n_max = 2;
  int replicas = 1000;
  uint64_t seed = 1;
  int threads = 1;
  int64_t field_buffer = 8;
};

struct DecayRow {
  int n = 0;
  RunningStats fraction;  // per replica: fraction of level-n vertices of the cell that are bad
  double p_hat = 0.0, se = 0.0;
  Interval ci;
  std::optional<double> exact;  // iid kind
  double z = 0.0;               // against exact when available
};

struct DecayReport {
  DecayOptions options;
  ScaleSystem scales;
  ScaleSystem reference_scales;
  std::vector<DecayRow> rows;
  bool strictly_decreasing = false;
  std::optional<double> loglog_slope;  // fit of log2(-log2 P_n) against n
};

std::string to_string(SeedKind k);
SeedKind parse_seed_kind(const std::string& s);
DecayReport renorm_decay_experiment(const DecayOptions& opt);

}  // namespace cgff
