#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgff/lattice.hpp"

namespace cgff {

constexpr double kDefaultGreenTol = 1e-8;

// Expected number of visits to x of the discrete walk started at 0.
double visits_zd(const Point& x, int d, double tol = kDefaultGreenTol);
// g(0,x) = visits / (2d), the inverse of (2d I - adjacency) on Z^d.
double green_zd(const Point& x, int d, double tol = kDefaultGreenTol);

// g on all displacements with |x|_inf <= radius, keyed by sorted absolute
// coordinates. Built in one pass over the quadrature nodes.
class GreenTable {
 public:
  GreenTable(int d, int64_t radius, double tol = kDefaultGreenTol);

  // Shared immutable table covering at least `radius`.
  static std::shared_ptr<const GreenTable> get(int d, int64_t radius, double tol = kDefaultGreenTol);

  int dim() const { return d_; }
  int64_t radius() const { return radius_; }
  double tolerance() const { return tol_; }
  double estimated_error() const { return err_; }
  size_t entries() const { return values_.size(); }

  // g(0, x). Falls back to direct quadrature outside the tabulated radius.
  double operator()(const Point& x) const;
  double at(const Point& x, const Point& y) const { return (*this)(sub(x, y)); }

  // Binary cache: magic "GRN1", u32 version, u32 d, i64 radius, f64 tol,
  // u64 count, then (u64 key, f64 value) pairs little-endian; JSON sidecar
  // path + ".json" records d and tol.
  void save(const std::string& path) const;
  static GreenTable load(const std::string& path);

 private:
  GreenTable() = default;
  uint64_t key(const Point& x) const;

  int d_ = 0;
  int64_t radius_ = 0;
  double tol_ = 0.0;
  double err_ = 0.0;
  int bits_ = 16;
  std::unordered_map<uint64_t, double> values_;
};

// Killed Green function: inverse of (2d I - A) restricted to U.
class KilledGreen {
 public:
  KilledGreen(int d, std::vector<Point> U);
  double operator()(const Point& x, const Point& y) const;
  // Column g_U(., y) over U in the order of points().
  std::vector<double> column(const Point& y) const;
  const std::vector<Point>& points() const { return pts_; }
  int64_t index_of(const Point& x) const;
  // Dense matrix, row-major, for |U| <= 4096.
  std::vector<double> dense() const;

 private:
  int d_;
  std::vector<Point> pts_;
  std::unordered_map<Point, int64_t, PointHash> idx_;
};

double killed_green(int d, const std::vector<Point>& U, const Point& x, const Point& y);

struct EquilibriumMeasure {
  int d = 3;
  std::vector<Point> points;    // every vertex of A
  std::vector<double> weights;  // e_A, zero off the inner boundary
  double capacity = 0.0;
  double residual = 0.0;  // max_y |sum_x e_A(x) g(x,y) - 1|
};

// e_A from the hitting identity; solved on the inner vertex boundary of A.
EquilibriumMeasure equilibrium(const std::vector<Point>& A, int d, double tol = kDefaultGreenTol);
// Same with a caller-supplied table (must cover diam(A)).
EquilibriumMeasure equilibrium(const std::vector<Point>& A, const GreenTable& g);

std::vector<Point> box_points(const Box& b);
// Vertices of A with at least one neighbour outside A.
std::vector<Point> inner_boundary(const std::vector<Point>& A, int d);

// Conditional variance of the cable field at a vertex given its values at
// the 2d quarter-edge points: 2 * (1/4) / (2d).
double sigma0_sq(int d);

}  // namespace cgff
