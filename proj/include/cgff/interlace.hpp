#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cgff/greens.hpp"
#include "cgff/lattice.hpp"
#include "cgff/rng.hpp"
#include "cgff/stats.hpp"

namespace cgff {

// Walker alias table over a finite distribution.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  size_t sample(Stream& rng) const;
  size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<uint32_t> alias_;
};

// Exit law of the walk started at the centre of the cube [-w, w]^d. By
// symmetry every face is hit with probability 1/(2d); the position on the
// face is g_C(0, q) normalised, q the inside neighbour of the exit point.
class CubeExitLaw {
 public:
  CubeExitLaw(int d, int w);
  int half_width() const { return w_; }
  // Displacement from the centre to the exit point.
  Point sample(Stream& rng) const;
  // 2d * sum over one face of g_C(0, q); equals 1 exactly in exact arithmetic.
  double total_mass() const { return total_; }
  const std::vector<double>& face_weights() const { return face_; }
  static std::shared_ptr<const CubeExitLaw> get(int d, int w);
  static int max_half_width(int d);

 private:
  int d_, w_;
  std::vector<double> face_;
  double total_ = 0.0;
  AliasTable alias_;
};

// Contiguous run of unit steps. Direction code c: axis c / 2, sign + for even c.
struct TrajectoryPiece {
  Point start{};
  std::vector<uint8_t> steps;
};

struct Trajectory {
  double label = 0.0;
  uint64_t hold_seed = 0;    // stream for holding times, so thinning keeps them
  uint64_t hold_stream = 0;
  std::vector<TrajectoryPiece> pieces;
  int far_exits = 0;
  int far_returns = 0;
};

struct InterlacementSample {
  int d = 3;
  double u = 0.0;
  Box window;
  Box key;   // window dilated by one vertex
  Box halo;  // walks leaving it either return (exact probability) or are dropped
  double halo_factor = 4.0;
  double capacity = 0.0;  // cap(key)
  uint64_t seed = 0;
  uint64_t stream = 0;
  std::vector<Trajectory> trajectories;  // sorted by label
  int64_t far_exits = 0;
  int64_t far_returns = 0;
  double max_return_prob = 0.0;

  // Trajectories with label <= u2 (Poisson thinning).
  InterlacementSample restrict_to(double u2) const;
};

// Superposition of independent samples on the same window; labels of b are shifted by a.u.
InterlacementSample merge(const InterlacementSample& a, const InterlacementSample& b);

class InterlacementSampler {
 public:
  InterlacementSampler(const Box& window, double halo_factor = 4.0, double tol = kDefaultGreenTol);

  InterlacementSample sample(double u, Stream& rng) const;
  // Forward walk from an equilibrium start; exposed for psi growth and tests.
  Trajectory walk(Stream& rng) const;

  const Box& window() const { return window_; }
  const Box& key() const { return key_; }
  const Box& halo() const { return halo_; }
  double capacity() const { return eq_.capacity; }
  const EquilibriumMeasure& equilibrium_measure() const { return eq_; }
  // P_z(walk ever hits the key set) = sum_y g(z - y) e_K(y).
  double hit_probability(const Point& z) const;
  // diam(key) / distance of the halo from the key: size of the entrance-law
  // approximation used after a return.
  double entrance_spread() const;

  static std::shared_ptr<const InterlacementSampler> get(const Box& window, double halo_factor);

 private:
  Point sample_entry(Stream& rng) const;

  int d_;
  Box window_, key_, halo_;
  double halo_factor_;
  int64_t halo_margin_;
  std::shared_ptr<const GreenTable> g_;
  EquilibriumMeasure eq_;
  std::vector<Point> entry_points_;
  std::vector<double> entry_weights_;
  AliasTable entry_alias_;
  std::vector<std::shared_ptr<const CubeExitLaw>> cubes_;  // index k: half-width 2^k
};

InterlacementSample sample_interlacement(const Box& window, double u, double halo_factor, Stream& rng);

struct LocalTimes {
  Box window;
  std::vector<double> values;
  std::string normalization = "exp(1) holding times / 2d";
  double at(const Point& p) const { return values[size_t(window.index(p))]; }
};

// Calls f(point) for every visit of the trajectory that is recorded in a piece.
template <class F>
void for_each_visit(const Trajectory& t, int d, F&& f);
// Calls f(from, to, code) for every recorded unit step.
template <class F>
void for_each_step(const Trajectory& t, int d, F&& f);

LocalTimes local_time_field(const InterlacementSample& s);
std::vector<uint8_t> occupied_set(const InterlacementSample& s);
// Per window vertex and axis: 1 if the edge (x, x + e_axis) was traversed, both ends in the window.
std::vector<uint8_t> edge_trace(const InterlacementSample& s);

// exp(u <V, (I - G V)^{-1} 1>); potential given as (point, value) pairs.
struct LaplaceResult {
  double value = 0.0;
  double norm = 0.0;  // max row sum of |G V|
};
LaplaceResult laplace_exact(const std::vector<std::pair<Point, double>>& V, double u, int d);

struct RateEstimate {
  int64_t events = 0;
  int64_t trials = 0;
  double rate = 0.0;
  Interval ci;
};
// Wilson 95% interval.
RateEstimate make_rate(int64_t events, int64_t trials);

struct ConnectivityRow {
  double eps = 0.0;
  RateEstimate failure;
};

// Failure of "all occupied vertices of [0,R)^d are connected by traversed
// edges inside [-eps R, (1+eps) R)^d". All eps share the same samples.
std::vector<ConnectivityRow> connectivity_experiment(int d, double u, int64_t R, const std::vector<double>& eps,
                                                     int replicas, uint64_t seed, int threads,
                                                     double halo_factor = 4.0);
bool connectivity_fails(const InterlacementSample& s, int64_t R, int64_t margin);

struct LargeDeviationRow {
  int64_t R = 0;
  RateEstimate deviation;
  RunningStats average;  // of R^{-d} sum l
};
std::vector<LargeDeviationRow> large_deviation_experiment(int d, double u, const std::vector<int64_t>& R_list,
                                                          double eps, int replicas, uint64_t seed, int threads,
                                                          double halo_factor = 4.0);
bool strictly_decreasing(const std::vector<LargeDeviationRow>& rows);

struct PsiStep {
  int iteration = 0;
  int64_t size = 0;
  double capacity = 0.0;
  int64_t extent = 0;  // max l-inf distance from the starting point
  int64_t walks = 0;
};
// Psi(u, A, T): A together with T-step traces of Poisson(u cap(A)) walks started from e_A / cap(A).
std::vector<Point> psi(double u, const std::vector<Point>& A, int64_t T, int d, Stream& rng, int64_t* walks = nullptr);
// Iterates U^(1) = T-step trace from x, U^(j) = Psi(u, U^(j-1), T).
std::vector<PsiStep> psi_growth(double u, const Point& x, int64_t T, int k, int d, Stream& rng);

// "ITL1" binary dump with a JSON manifest at path + ".json".
void save_trajectories(const InterlacementSample& s, const std::string& path);
InterlacementSample load_trajectories(const std::string& path);

}  // namespace cgff

#include "cgff/interlace_impl.hpp"
