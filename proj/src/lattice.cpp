#include "cgff/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cgff {

Point make_point(std::initializer_list<int64_t> coords) {
  if (coords.size() > size_t(kMaxDim)) throw std::invalid_argument("too many coordinates");
  Point p{};
  std::copy(coords.begin(), coords.end(), p.begin());
  return p;
}

int64_t norm1(const Point& p, int d) {
  int64_t s = 0;
  for (int i = 0; i < d; ++i) s += std::abs(p[i]);
  return s;
}

int64_t norm_inf(const Point& p, int d) {
  int64_t s = 0;
  for (int i = 0; i < d; ++i) s = std::max<int64_t>(s, std::abs(p[i]));
  return s;
}

Point sub(const Point& a, const Point& b) {
  Point r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] - b[i];
  return r;
}

Point add(const Point& a, const Point& b) {
  Point r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] + b[i];
  return r;
}

Box::Box(int d, const Point& lo, const Point& hi) : d_(d), lo_(lo), hi_(hi) {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("box dimension out of range");
  for (int i = d; i < kMaxDim; ++i) lo_[i] = hi_[i] = 0;
  n_ = 1;
  for (int i = d - 1; i >= 0; --i) {
    if (hi_[i] <= lo_[i]) throw std::invalid_argument("empty box side on axis " + std::to_string(i));
    stride_[i] = n_;
    const int64_t s = hi_[i] - lo_[i];
    if (n_ > std::numeric_limits<int64_t>::max() / s) throw std::overflow_error("box vertex count overflows");
    n_ *= s;
  }
  if (n_ > (int64_t(1) << 40)) throw std::overflow_error("box vertex count exceeds addressable limit");
}

bool Box::contains(const Point& p) const {
  for (int i = 0; i < d_; ++i) {
    if (p[i] < lo_[i] || p[i] >= hi_[i]) return false;
  }
  return true;
}

int64_t Box::index(const Point& p) const {
  int64_t idx = 0;
  for (int i = 0; i < d_; ++i) idx += (p[i] - lo_[i]) * stride_[i];
  return idx;
}

Point Box::point(int64_t idx) const {
  Point p{};
  for (int i = 0; i < d_; ++i) {
    p[i] = lo_[i] + idx / stride_[i];
    idx %= stride_[i];
  }
  return p;
}

int64_t Box::neighbor(int64_t idx, int axis, int sign) const {
  const int64_t c = (idx / stride_[axis]) % side(axis);
  if (sign > 0) return c + 1 < side(axis) ? idx + stride_[axis] : -1;
  return c > 0 ? idx - stride_[axis] : -1;
}

std::string Box::shape_string() const {
  std::string s;
  for (int i = 0; i < d_; ++i) {
    if (i) s += "x";
    s += std::to_string(side(i));
  }
  return s;
}

Box make_box(int d, const std::vector<int64_t>& sides) {
  if (d < 3) throw std::invalid_argument("d must be >= 3: the walk has to be transient for g to be finite");
  if (int(sides.size()) != d) throw std::invalid_argument("need one side per axis");
  Point lo{}, hi{};
  for (int i = 0; i < d; ++i) {
    if (sides[i] <= 0) throw std::invalid_argument("box sides must be positive");
    hi[i] = sides[i];
  }
  return Box(d, lo, hi);
}

Box make_box_centered(int d, int64_t half_width) {
  Point lo{}, hi{};
  for (int i = 0; i < d; ++i) {
    lo[i] = -half_width;
    hi[i] = half_width + 1;
  }
  return Box(d, lo, hi);
}

Box slab_box(int64_t long_extent, int64_t thickness, int d) {
  if (thickness < 1) throw std::invalid_argument("slab thickness must be >= 1");
  std::vector<int64_t> sides(size_t(d), thickness);
  sides[0] = sides[1] = long_extent;
  return make_box(d, sides);
}

Box dilate(const Box& b, int64_t r) {
  Point lo = b.lo(), hi = b.hi();
  for (int i = 0; i < b.dim(); ++i) {
    lo[i] -= r;
    hi[i] += r;
  }
  return Box(b.dim(), lo, hi);
}

int64_t dist_inf(const Box& b, const Point& p) {
  int64_t m = 0;
  for (int i = 0; i < b.dim(); ++i) {
    m = std::max(m, b.lo()[i] - p[i]);
    m = std::max(m, p[i] - (b.hi()[i] - 1));
  }
  return m;
}

int64_t edge_count(const Box& box) {
  int64_t total = 0;
  for (int a = 0; a < box.dim(); ++a) total += box.size() / box.side(a) * (box.side(a) - 1);
  return total;
}

void for_each_edge(const Box& box, const std::function<void(int64_t, int64_t, int)>& f) {
  for (int64_t i = 0; i < box.size(); ++i) {
    for (int a = 0; a < box.dim(); ++a) {
      const int64_t j = box.neighbor(i, a, +1);
      if (j >= 0) f(i, j, a);
    }
  }
}

std::vector<Edge> edges(const Box& box) {
  std::vector<Edge> out;
  out.reserve(size_t(edge_count(box)));
  for_each_edge(box, [&](int64_t i, int64_t, int a) { out.push_back(Edge{box.point(i), a}); });
  return out;
}

CablePoint vertex_point(const Point& x) { return CablePoint{Edge{x, 0}, 0.0}; }

double cable_distance(const Box& box, const CablePoint& p, const CablePoint& q) {
  for (const CablePoint* c : {&p, &q}) {
    if (c->t < 0.0 || c->t > 0.5) throw std::invalid_argument("cable position must lie in [0, 1/2]");
    if (!box.contains(c->edge.x)) throw std::invalid_argument("cable point outside the ambient box");
    if (c->t > 0.0 && !box.contains(c->edge.y())) throw std::invalid_argument("cable edge leaves the ambient box");
  }
  if (p.edge == q.edge) return std::abs(p.t - q.t);
  const int d = box.dim();
  const Point pe[2] = {p.edge.x, p.edge.y()};
  const Point qe[2] = {q.edge.x, q.edge.y()};
  const double pd[2] = {p.t, 0.5 - p.t};
  const double qd[2] = {q.t, 0.5 - q.t};
  double best = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double v = pd[a] + 0.5 * double(norm1(sub(pe[a], qe[b]), d)) + qd[b];
      best = std::min(best, v);
    }
  }
  return best;
}

}  // namespace cgff
