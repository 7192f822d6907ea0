#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgff {

constexpr int kMaxDim = 8;

// Lattice point; coordinates past the box dimension are kept at zero so
// that equality and hashing work without carrying d around.
using Point = std::array<int64_t, kMaxDim>;

struct PointHash {
  size_t operator()(const Point& p) const noexcept {
    uint64_t h = 0xcbf29ce484222325ull;
    for (int64_t c : p) {
      h ^= uint64_t(c) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return size_t(h);
  }
};

Point make_point(std::initializer_list<int64_t> coords);
int64_t norm1(const Point& p, int d);
int64_t norm_inf(const Point& p, int d);
Point sub(const Point& a, const Point& b);
Point add(const Point& a, const Point& b);

// Half-open box [lo, hi) per axis with row-major indexing (last axis fastest).
class Box {
 public:
  Box() = default;
  Box(int d, const Point& lo, const Point& hi);

  int dim() const { return d_; }
  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  int64_t side(int axis) const { return hi_[axis] - lo_[axis]; }
  int64_t size() const { return n_; }
  int64_t stride(int axis) const { return stride_[axis]; }

  bool contains(const Point& p) const;
  int64_t index(const Point& p) const;
  Point point(int64_t idx) const;
  // Index of the neighbour idx +/- e_axis, or -1 when it leaves the box.
  int64_t neighbor(int64_t idx, int axis, int sign) const;
  int64_t coord(int64_t idx, int axis) const { return lo_[axis] + (idx / stride_[axis]) % side(axis); }
  bool operator==(const Box& o) const { return d_ == o.d_ && lo_ == o.lo_ && hi_ == o.hi_; }

  std::string shape_string() const;

 private:
  int d_ = 0;
  Point lo_{}, hi_{};
  std::array<int64_t, kMaxDim> stride_{};
  int64_t n_ = 0;
};

// Box [0, sides[i]) per axis. Rejects d < 3 since the model needs a transient walk.
Box make_box(int d, const std::vector<int64_t>& sides);
Box make_box_centered(int d, int64_t half_width);
Box slab_box(int64_t long_extent, int64_t thickness, int d);
// Box grown by r on every side.
Box dilate(const Box& b, int64_t r);
// l-infinity distance from p to the box, 0 inside.
int64_t dist_inf(const Box& b, const Point& p);

// Undirected nearest-neighbour edge stored as (x, x + e_axis): x is the
// lexicographically smaller endpoint.
struct Edge {
  Point x{};
  int axis = 0;
  Point y() const {
    Point p = x;
    ++p[axis];
    return p;
  }
  bool operator==(const Edge& o) const { return x == o.x && axis == o.axis; }
};

std::vector<Edge> edges(const Box& box);
int64_t edge_count(const Box& box);
// Calls f(a, b, axis) with vertex indices for every internal edge, a < b.
void for_each_edge(const Box& box, const std::function<void(int64_t, int64_t, int)>& f);

// Point x + 2t e_axis on the cable of edge (x, x + e_axis); the cable has length 1/2.
struct CablePoint {
  Edge edge;
  double t = 0.0;
};

CablePoint vertex_point(const Point& x);
double cable_distance(const Box& box, const CablePoint& p, const CablePoint& q);

}  // namespace cgff
