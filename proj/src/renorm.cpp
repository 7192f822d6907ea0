#include "cgff/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "cgff/parallel.hpp"
#include "cgff/union_find.hpp"

namespace cgff {

// ------------------------------------------------------------------ scales

int64_t reference_shell_count(int d) {
  int64_t p = 1;
  for (int i = 0; i < d; ++i) p *= 4;
  return 5 * p + 1;
}
int64_t reference_ld(int d) { return 4 * reference_shell_count(d); }
int64_t reference_l0(int d) { return 4 * reference_ld(d); }

bool ScaleSystem::pigeonhole_guaranteed() const {
  return shells_fit() && shells >= reference_shell_count(d) && 12 * ld >= l0;
}

std::string ScaleSystem::describe() const {
  std::ostringstream o;
  o << "d=" << d << " L0=" << L0 << " l0=" << l0 << " l(d)=" << ld << " shells=" << shells
    << (surrogate ? " (surrogate)" : " (reference)") << " L=[";
  for (size_t i = 0; i < L.size(); ++i) o << (i ? "," : "") << L[i];
  o << "]";
  return o.str();
}

ScaleSystem build_scales(int d, int64_t L0, int n_max, std::optional<std::pair<int64_t, int64_t>> surrogate) {
  if (d < 2 || d > kMaxDim) throw std::invalid_argument("scale system needs 2 <= d <= " + std::to_string(kMaxDim));
  if (L0 < 1) throw std::invalid_argument("L0 must be >= 1");
  if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
  ScaleSystem s;
  s.d = d;
  s.L0 = L0;
  s.n_max = n_max;
  if (surrogate) {
    s.l0 = surrogate->first;
    s.ld = surrogate->second;
    s.surrogate = true;
    if (s.l0 < 2 || s.ld < 1) throw std::invalid_argument("surrogate needs l0 >= 2 and l(d) >= 1");
  } else {
    s.l0 = reference_l0(d);
    s.ld = reference_ld(d);
  }
  if (s.separation() >= s.l0) {
    throw std::invalid_argument("separation l0 / l(d) must be below l0, otherwise no level-1 event can occur");
  }
  s.shells = int(std::min<int64_t>(reference_shell_count(d), (s.l0 - 2) / 16 + 1));
  if (s.shells < 1) s.shells = 1;
  s.L.push_back(L0);
  for (int n = 1; n <= n_max; ++n) {
    int64_t next = 0;
    // the cascade also works with 2 L_n, keep one bit of headroom
    if (__builtin_mul_overflow(s.L.back(), s.l0, &next) || next > std::numeric_limits<int64_t>::max() / 4) {
      throw std::overflow_error("L_" + std::to_string(n) + " overflows 64-bit integers");
    }
    s.L.push_back(next);
  }
  return s;
}

const char* family_name(int bit) {
  static const char* names[kNumFamilies] = {"C", "Chat", "D", "E", "F"};
  return bit >= 0 && bit < kNumFamilies ? names[bit] : "?";
}

uint8_t SeedOutcome::bad_mask() const {
  return uint8_t((C ? 0 : kFamC) | (Chat ? 0 : kFamChat) | (D ? 0 : kFamD) | (E ? 0 : kFamE) | (F ? 0 : kFamF));
}

int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// ------------------------------------------------------------------- seeds

namespace {

Box lattice_box(int d, const Point& lo, int64_t side) {
  Point hi = lo;
  for (int a = 0; a < d; ++a) hi[a] += side;
  return Box(d, lo, hi);
}

bool box_inside(const Box& inner, const Box& outer) {
  for (int a = 0; a < inner.dim(); ++a) {
    if (inner.lo()[a] < outer.lo()[a] || inner.hi()[a] > outer.hi()[a]) return false;
  }
  return true;
}

Point scaled(const Point& x, int64_t f, int d) {
  Point p{};
  for (int a = 0; a < d; ++a) p[a] = x[a] * f;
  return p;
}

// E and F of the 2L0-box at X from local times and the traversed edges.
void local_time_events(const LocalTimes& lt, const std::vector<uint8_t>& trace, const Point& X, int64_t L0, double u,
                       bool& E, bool& F) {
  const int d = lt.window.dim();
  const Box big = lattice_box(d, X, 2 * L0);
  const int64_t nb = big.size();
  double vol = 1.0;
  for (int a = 0; a < d; ++a) vol *= double(L0);
  const double lower = 0.75 * u * vol, upper = 1.25 * u * vol;

  auto traversed = [&](int64_t big_idx, int axis) {
    const Point p = big.point(big_idx);
    return trace[size_t(lt.window.index(p) * d + axis)] != 0;
  };
  auto sub_cell = [&](const Point& p) {
    int e = 0;
    for (int a = 0; a < d; ++a) e = 2 * e + int(p[a] - X[a] >= L0);
    return e;
  };

  UnionFind sub_uf(nb), big_uf(nb);
  for (int64_t i = 0; i < nb; ++i) {
    for (int a = 0; a < d; ++a) {
      const int64_t j = big.neighbor(i, a, +1);
      if (j < 0 || !traversed(i, a)) continue;
      big_uf.unite(i, j);
      if (sub_cell(big.point(i)) == sub_cell(big.point(j))) sub_uf.unite(i, j);
    }
  }
  const int cells = 1 << d;
  std::vector<double> cell_mass(size_t(cells), 0.0);
  std::unordered_map<int64_t, double> comp_mass;
  for (int64_t i = 0; i < nb; ++i) {
    const double l = lt.at(big.point(i));
    cell_mass[size_t(sub_cell(big.point(i)))] += l;
    if (l > 0.0) comp_mass[sub_uf.find(i)] += l;
  }
  F = true;
  for (double m : cell_mass) F = F && m < upper;
  // qualifying components, grouped by their class in the big box
  std::map<int64_t, uint32_t> covered;  // big-box class -> bitmask of sub-cells with a qualifying component
  for (const auto& [root, mass] : comp_mass) {
    if (mass > lower) covered[big_uf.find(root)] |= 1u << sub_cell(big.point(root));
  }
  const uint32_t all = cells == 32 ? 0xffffffffu : ((1u << cells) - 1u);
  E = false;
  for (const auto& kv : covered) E = E || kv.second == all;
}

}  // namespace

std::vector<SeedOutcome> classify_seeds(const SeedLayers& layers, const Box& region, const SeedParams& p) {
  const int d = region.dim();
  if (p.L0 < 1) throw std::invalid_argument("L0 must be >= 1");
  if ((layers.ell == nullptr) != (layers.trace == nullptr)) {
    throw std::invalid_argument("local times and edge trace must be given together");
  }
  if (layers.trace && int64_t(layers.trace->size()) != layers.ell->window.size() * d) {
    throw std::invalid_argument("edge trace does not match the local-time window");
  }
  std::vector<SeedOutcome> out(static_cast<size_t>(region.size()));
  for (int64_t k = 0; k < region.size(); ++k) {
    SeedOutcome& o = out[size_t(k)];
    o.x = region.point(k);
    const Point X = scaled(o.x, p.L0, d);
    Point lo = X;
    for (int a = 0; a < d; ++a) lo[a] -= 1;
    const Box cbox = lattice_box(d, lo, 2 * p.L0 + 2);
    if (layers.phi) {
      if (!box_inside(cbox, layers.phi->box)) throw std::invalid_argument("field window too small for the +1 halo");
      for (int64_t i = 0; i < cbox.size(); ++i) {
        const double v = layers.phi->at(cbox.point(i));
        if (v > p.K) o.C = false;
        if (v < -p.K) o.Chat = false;
      }
    }
    if (layers.theta) {
      const ThetaField& th = *layers.theta;
      if (!box_inside(cbox, th.box)) throw std::invalid_argument("theta window too small for the +1 halo");
      for (int64_t i = 0; i < cbox.size() && o.D; ++i) {
        for (int a = 0; a < d; ++a) {
          if (cbox.neighbor(i, a, +1) < 0) continue;
          if (!th.theta[size_t(th.box.index(cbox.point(i)) * d + a)]) {
            o.D = false;
            break;
          }
        }
      }
    }
    if (layers.ell) {
      if (!box_inside(lattice_box(d, X, 2 * p.L0), layers.ell->window)) {
        throw std::invalid_argument("local-time window does not cover the 2 L0 box");
      }
      local_time_events(*layers.ell, *layers.trace, X, p.L0, p.u, o.E, o.F);
    }
  }
  return out;
}

CoarseConfig to_config(const std::vector<SeedOutcome>& seeds) {
  CoarseConfig c;
  for (const SeedOutcome& s : seeds) {
    const uint8_t m = s.bad_mask();
    if (m) c[s.x] = m;
  }
  return c;
}

// ---------------------------------------------------------------- recursion

namespace {

Point parent_of(const Point& child, int64_t l0, int d) {
  Point p{};
  for (int a = 0; a < d; ++a) p[a] = floor_div(child[a], l0);
  return p;
}

struct AxisExtremes {
  std::array<int64_t, kMaxDim> lo, hi;
  std::array<Point, kMaxDim> lo_pt, hi_pt;
  bool any = false;
};

}  // namespace

LevelEval eval_recursive(const CoarseConfig& children, const ScaleSystem& s, int n) {
  if (n < 1) throw std::invalid_argument("eval_recursive builds levels n >= 1");
  const int d = s.d;
  const int64_t sep = s.separation();
  std::unordered_map<Point, std::array<AxisExtremes, kNumFamilies>, PointHash> groups;
  for (const auto& [c, mask] : children) {
    auto& g = groups[parent_of(c, s.l0, d)];
    for (int f = 0; f < kNumFamilies; ++f) {
      if (!(mask >> f & 1)) continue;
      AxisExtremes& e = g[size_t(f)];
      for (int a = 0; a < d; ++a) {
        if (!e.any || c[a] < e.lo[a] || (c[a] == e.lo[a] && c < e.lo_pt[a])) {
          e.lo[a] = c[a];
          e.lo_pt[a] = c;
        }
        if (!e.any || c[a] > e.hi[a] || (c[a] == e.hi[a] && c < e.hi_pt[a])) {
          e.hi[a] = c[a];
          e.hi_pt[a] = c;
        }
      }
      e.any = true;
    }
  }
  // deterministic output order
  std::vector<Point> parents;
  parents.reserve(groups.size());
  for (const auto& kv : groups) parents.push_back(kv.first);
  std::sort(parents.begin(), parents.end());
  LevelEval ev;
  ev.n = n;
  for (const Point& x : parents) {
    const auto& g = groups[x];
    uint8_t mask = 0;
    for (int f = 0; f < kNumFamilies; ++f) {
      const AxisExtremes& e = g[size_t(f)];
      if (!e.any) continue;
      for (int a = 0; a < d; ++a) {
        if (e.hi[a] - e.lo[a] >= sep) {
          mask |= uint8_t(1u << f);
          ev.witnesses.push_back({x, f, e.lo_pt[a], e.hi_pt[a]});
          break;
        }
      }
    }
    if (mask) ev.bad[x] = mask;
  }
  return ev;
}

std::vector<LevelEval> eval_levels(const CoarseConfig& seeds, const ScaleSystem& s, int n) {
  std::vector<LevelEval> out;
  LevelEval base;
  base.n = 0;
  base.bad = seeds;
  out.push_back(std::move(base));
  for (int k = 1; k <= n; ++k) out.push_back(eval_recursive(out.back().bad, s, k));
  return out;
}

bool validate_witness(const Witness& w, const CoarseConfig& children, const ScaleSystem& s) {
  if (w.family < 0 || w.family >= kNumFamilies) return false;
  for (const Point* c : {&w.x1, &w.x2}) {
    auto it = children.find(*c);
    if (it == children.end() || !(it->second >> w.family & 1)) return false;
    // membership in Lambda_{x,n}: x * l0 <= c < (x + 1) * l0 on every axis
    for (int a = 0; a < s.d; ++a) {
      if ((*c)[a] < w.x[a] * s.l0 || (*c)[a] >= (w.x[a] + 1) * s.l0) return false;
    }
  }
  return norm_inf(sub(w.x1, w.x2), s.d) * s.ld >= s.l0;
}

double iid_recursion_step(double p, const ScaleSystem& s) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("probability outside [0, 1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  // The true set fits in a box of side sep iff its bounding box does. Summing over
  // the lower corner m of the bounding box, with inclusion-exclusion for the
  // requirement that every face through m is hit. Each term is written as
  // 1 + expm1(.) and the ones cancel, which keeps precision for small p.
  const int d = s.d;
  const int64_t k = s.separation(), l0 = s.l0;
  double N = 1.0;
  for (int a = 0; a < d; ++a) N *= double(l0);
  const double lq = std::log1p(-p);
  long double fit_minus_one = std::expm1(N * lq);  // empty set
  std::vector<int64_t> m(size_t(d), 0);
  while (true) {
    for (int eps = 0; eps < (1 << d); ++eps) {
      double B = 1.0;
      int bits = 0;
      for (int a = 0; a < d; ++a) {
        const int e = eps >> a & 1;
        bits += e;
        B *= double(std::min(k, l0 - m[size_t(a)]) - e);
      }
      const double t = std::expm1((N - B) * lq);
      fit_minus_one += (bits & 1) ? -t : t;
    }
    int a = d - 1;
    while (a >= 0 && ++m[size_t(a)] == l0) m[size_t(a--)] = 0;
    if (a < 0) break;
  }
  return std::clamp(double(-fit_minus_one), 0.0, 1.0);
}

std::vector<double> iid_recursion(double q, const ScaleSystem& s, int n) {
  std::vector<double> p{q};
  for (int k = 1; k <= n; ++k) p.push_back(iid_recursion_step(p.back(), s));
  return p;
}

// ------------------------------------------------------------------ *-paths

std::optional<std::vector<std::pair<int64_t, int64_t>>> find_bad_star_path(const PlanarGrid& g, int64_t m,
                                                                           int64_t nn) {
  if (m < 0 || m >= nn || nn > g.half) throw std::invalid_argument("need 0 <= m < nn <= half");
  const int64_t S = g.side();
  auto id = [&](int64_t i, int64_t j) { return (i + g.half) * S + (j + g.half); };
  std::vector<int64_t> parent(size_t(S * S), -2);
  std::deque<std::pair<int64_t, int64_t>> q;
  for (int64_t i = -m; i <= m; ++i) {
    for (int64_t j = -m; j <= m; ++j) {
      if (g.at(i, j)) {
        parent[size_t(id(i, j))] = -1;
        q.emplace_back(i, j);
      }
    }
  }
  while (!q.empty()) {
    const auto [i, j] = q.front();
    q.pop_front();
    if (std::max(std::abs(i), std::abs(j)) == nn) {
      std::vector<std::pair<int64_t, int64_t>> path;
      for (int64_t c = id(i, j); c >= 0; c = parent[size_t(c)]) path.emplace_back(c / S - g.half, c % S - g.half);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (int64_t di = -1; di <= 1; ++di) {
      for (int64_t dj = -1; dj <= 1; ++dj) {
        const int64_t a = i + di, b = j + dj;
        if ((di == 0 && dj == 0) || std::max(std::abs(a), std::abs(b)) > nn || !g.at(a, b)) continue;
        int64_t& p = parent[size_t(id(a, b))];
        if (p != -2) continue;
        p = id(i, j);
        q.emplace_back(a, b);
      }
    }
  }
  return std::nullopt;
}

bool bad_star_circuit(const PlanarGrid& g, int64_t m, int64_t nn) {
  if (m < 0 || m >= nn || nn > g.half) throw std::invalid_argument("need 0 <= m < nn <= half");
  if (nn - m < 2) return false;  // empty annulus
  const int64_t S = g.side();
  auto in_annulus = [&](int64_t i, int64_t j) {
    const int64_t r = std::max(std::abs(i), std::abs(j));
    return r > m && r < nn;
  };
  std::vector<uint8_t> seen(size_t(S * S), 0);
  std::deque<std::pair<int64_t, int64_t>> q;
  for (int64_t i = -(m + 1); i <= m + 1; ++i) {
    for (int64_t j = -(m + 1); j <= m + 1; ++j) {
      // ring m + 1 minus its corners: the corners only touch the box diagonally and
      // may sit outside a circuit that cuts across them
      const bool corner = std::abs(i) == m + 1 && std::abs(j) == m + 1;
      if (std::max(std::abs(i), std::abs(j)) == m + 1 && !corner && !g.at(i, j)) {
        seen[size_t((i + g.half) * S + j + g.half)] = 1;
        q.emplace_back(i, j);
      }
    }
  }
  static const int64_t step[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  while (!q.empty()) {
    const auto [i, j] = q.front();
    q.pop_front();
    if (std::max(std::abs(i), std::abs(j)) == nn - 1) return false;  // good crossing
    for (const auto& st : step) {
      const int64_t a = i + st[0], b = j + st[1];
      if (!in_annulus(a, b) || g.at(a, b)) continue;
      uint8_t& sv = seen[size_t((a + g.half) * S + b + g.half)];
      if (sv) continue;
      sv = 1;
      q.emplace_back(a, b);
    }
  }
  return true;
}

// ----------------------------------------------------------------- cascade

namespace {

struct CascadeFail {
  std::string reason;
};

struct LevelBad {
  Point z{};  // G_0 index units, multiple of l0^k
  uint8_t mask = 0;
};

int64_t ipow(int64_t b, int e) {
  int64_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

int64_t dist(const Point& a, const Point& b, int d) { return norm_inf(sub(a, b), d); }

class Cascade {
 public:
  Cascade(const CoarseConfig& bad, const ScaleSystem& s) : bad_(bad), s_(s) {}

  // Path starts within l0^k of y and reaches distance 2 l0^k from y (G_0 index units).
  LevelBad run(const std::vector<Point>& path, size_t b, int k, const Point& y,
               std::vector<Point>* shell_points = nullptr, Point* z1 = nullptr, Point* z2 = nullptr,
               int* family = nullptr) const {
    const int d = s_.d;
    if (k == 0) return {path[b], bad_.at(path[b])};
    const int64_t Lk = ipow(s_.l0, k), Lk1 = ipow(s_.l0, k - 1);
    std::vector<LevelBad> zs;
    size_t j = b;
    for (int i = 0; i < s_.shells; ++i) {
      const int64_t rho = Lk + 16 * int64_t(i) * Lk1;
      while (j < path.size() && dist(path[j], y, d) != rho) ++j;
      if (j == path.size()) throw CascadeFail{"path never reaches shell " + std::to_string(i)};
      Point yi = y;
      for (int a = 0; a < d; ++a) yi[a] += floor_div(path[j][a] - y[a] + Lk1 / 2, Lk1) * Lk1;
      if (dist(yi, y, d) != rho) throw CascadeFail{"shell point off the sphere"};
      if (shell_points) shell_points->push_back(scaled_down(yi, Lk1));
      // the sub-path from j leaves yi + [-2 Lk1, 2 Lk1]
      size_t e = j;
      while (e < path.size() && dist(path[e], yi, d) < 2 * Lk1) ++e;
      if (e == path.size()) throw CascadeFail{"path ends inside a shell box at level " + std::to_string(k - 1)};
      zs.push_back(run(path, j, k - 1, yi));
    }
    // pigeonhole on level-k cells, in shell order
    std::map<Point, std::vector<size_t>> cells;
    std::vector<Point> order;
    for (size_t i = 0; i < zs.size(); ++i) {
      Point c{};
      for (int a = 0; a < d; ++a) c[a] = floor_div(zs[i].z[a], Lk);
      if (!cells.count(c)) order.push_back(c);
      cells[c].push_back(i);
    }
    for (const Point& c : order) {
      const auto& members = cells[c];
      uint8_t mask = 0;
      int first = -1;
      Point w1{}, w2{};
      for (int f = 0; f < kNumFamilies; ++f) {
        for (size_t a = 0; a < members.size(); ++a) {
          for (size_t bb = a + 1; bb < members.size(); ++bb) {
            const LevelBad& p = zs[members[a]];
            const LevelBad& q = zs[members[bb]];
            if (!(p.mask >> f & 1) || !(q.mask >> f & 1)) continue;
            if ((dist(p.z, q.z, d) / Lk1) * s_.ld < s_.l0) continue;
            if (!(mask >> f & 1) && first < 0) {
              first = f;
              w1 = p.z;
              w2 = q.z;
            }
            mask |= uint8_t(1u << f);
          }
        }
      }
      if (mask) {
        if (z1) *z1 = scaled_down(w1, Lk1);
        if (z2) *z2 = scaled_down(w2, Lk1);
        if (family) *family = first;
        return {scaled_up(c, Lk), mask};
      }
    }
    throw CascadeFail{"pigeonhole fails at level " + std::to_string(k) + ": " + std::to_string(zs.size()) +
                      " shell witnesses over " + std::to_string(cells.size()) + " cells share no separated family"};
  }

 private:
  Point scaled_down(const Point& p, int64_t f) const {
    Point q{};
    for (int a = 0; a < s_.d; ++a) q[a] = p[a] / f;
    return q;
  }
  Point scaled_up(const Point& p, int64_t f) const {
    Point q{};
    for (int a = 0; a < s_.d; ++a) q[a] = p[a] * f;
    return q;
  }

  const CoarseConfig& bad_;
  const ScaleSystem& s_;
};

// All offsets in {-1, 0, 1}^d minus 0.
std::vector<Point> star_offsets(int d) {
  std::vector<Point> out;
  const int total = int(ipow(3, d));
  for (int c = 0; c < total; ++c) {
    Point p{};
    int r = c;
    bool zero = true;
    for (int a = 0; a < d; ++a) {
      p[a] = r % 3 - 1;
      r /= 3;
      zero = zero && p[a] == 0;
    }
    if (!zero) out.push_back(p);
  }
  return out;
}

}  // namespace

CascadeResult cascade_witness(const CoarseConfig& bad0, const ScaleSystem& s, int n, const Point& x) {
  CascadeResult r;
  r.n = n;
  const int d = s.d;
  if (n < 1 || n > s.n_max) {
    r.reason = "level must satisfy 1 <= n <= n_max";
    return r;
  }
  if (!s.shells_fit()) {
    r.reason = "shells do not fit: 16 (m - 1) + 2 > l0";
    return r;
  }
  const int64_t Ln = ipow(s.l0, n);  // in G_0 index units
  const Point X = scaled(x, Ln, d);
  // BFS over bad vertices from the inner box to the outer sphere
  std::unordered_map<Point, Point, PointHash> parent;
  std::deque<Point> q;
  std::vector<Point> starts;
  for (const auto& kv : bad0) {
    if (kv.second && dist(kv.first, X, d) <= Ln) starts.push_back(kv.first);
  }
  std::sort(starts.begin(), starts.end());
  for (const Point& p : starts) {
    parent[p] = p;
    q.push_back(p);
  }
  const std::vector<Point> offs = star_offsets(d);
  std::optional<Point> end;
  while (!q.empty() && !end) {
    const Point p = q.front();
    q.pop_front();
    if (dist(p, X, d) == 2 * Ln) {
      end = p;
      break;
    }
    for (const Point& o : offs) {
      const Point nb = add(p, o);
      if (dist(nb, X, d) > 2 * Ln || parent.count(nb)) continue;
      auto it = bad0.find(nb);
      if (it == bad0.end() || !it->second) continue;
      parent[nb] = p;
      q.push_back(nb);
    }
  }
  if (!end) {
    r.reason = "no bad *-path crosses the annulus L_n .. 2 L_n";
    return r;
  }
  std::vector<Point> path;
  for (Point c = *end;; c = parent[c]) {
    path.push_back(c);
    if (parent[c] == c) break;
  }
  std::reverse(path.begin(), path.end());
  r.path_length = int64_t(path.size());
  try {
    Cascade c(bad0, s);
    const LevelBad top = c.run(path, 0, n, X, &r.shell_points, &r.z1, &r.z2, &r.family);
    for (int a = 0; a < d; ++a) r.x0[a] = top.z[a] / Ln;
    r.status = CascadeResult::Status::witness;
  } catch (const CascadeFail& f) {
    r.status = CascadeResult::Status::counterexample;
    r.reason = f.reason;
  }
  return r;
}

CoarseConfig random_bad_path(const ScaleSystem& s, int n, int64_t noise, Stream& rng) {
  const int d = s.d;
  const int64_t Ln = ipow(s.l0, n);
  CoarseConfig c;
  auto random_mask = [&]() {
    uint8_t m = uint8_t(1u << rng.below(kNumFamilies));
    if (rng.uniform() < 0.2) m |= uint8_t(1u << rng.below(kNumFamilies));
    return m;
  };
  Point p{};
  for (int a = 0; a < d; ++a) p[a] = int64_t(rng.below(uint64_t(2 * Ln + 1))) - Ln;
  const std::vector<Point> offs = star_offsets(d);
  c[p] = random_mask();
  while (norm_inf(p, d) < 2 * Ln) {
    Point step{};
    if (rng.uniform() < 0.6) {
      // push the largest coordinate outward
      int am = 0;
      for (int a = 1; a < d; ++a) {
        if (std::abs(p[a]) > std::abs(p[am])) am = a;
      }
      step = offs[rng.below(offs.size())];
      step[am] = p[am] >= 0 ? 1 : -1;
    } else {
      step = offs[rng.below(offs.size())];
    }
    const Point nb = add(p, step);
    if (norm_inf(nb, d) > 2 * Ln) continue;
    p = nb;
    auto& m = c[p];
    if (!m) m = random_mask();
  }
  for (int64_t i = 0; i < noise; ++i) {
    Point z{};
    for (int a = 0; a < d; ++a) z[a] = int64_t(rng.below(uint64_t(4 * Ln + 1))) - 2 * Ln;
    c[z] |= random_mask();
  }
  return c;
}

// -------------------------------------------------------------- decoupling

namespace {
double statistic(const BoxEvent& e, const std::vector<double>& v) {
  double x = 0.0;
  switch (e.stat) {
    case BoxEvent::Stat::average:
      for (double a : v) x += a;
      return x / double(v.size());
    case BoxEvent::Stat::maximum: return *std::max_element(v.begin(), v.end());
    case BoxEvent::Stat::minimum: return *std::min_element(v.begin(), v.end());
    case BoxEvent::Stat::occupied_fraction:
      for (double a : v) x += a > 0.0;
      return x / double(v.size());
  }
  return x;
}
}  // namespace

bool BoxEvent::eval(const std::vector<double>& v) const {
  const double x = statistic(*this, v);
  return above ? x >= threshold : x <= threshold;
}

bool DecouplingReport::all_pass() const {
  for (const auto& r : rows) {
    if (!r.pass || r.monotonicity_violations) return false;
  }
  return !rows.empty();
}

std::string to_string(DecoupleKind k) { return k == DecoupleKind::interlacement ? "interlacement" : "gff"; }

DecoupleKind parse_decouple_kind(const std::string& s) {
  if (s == "interlacement") return DecoupleKind::interlacement;
  if (s == "gff") return DecoupleKind::gff;
  throw std::invalid_argument("unknown decoupling kind '" + s + "'");
}

std::vector<BoxEvent> default_events(DecoupleKind k) {
  using S = BoxEvent::Stat;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (k == DecoupleKind::interlacement) {
    // NaN thresholds are set from the pilot median; the average events use u itself
    return {{"avg_ell_above_u", Monotonicity::increasing, S::average, true, nan},
            {"occupied_fraction_above", Monotonicity::increasing, S::occupied_fraction, true, nan},
            {"max_ell_below", Monotonicity::decreasing, S::maximum, false, nan},
            {"avg_ell_below_u", Monotonicity::decreasing, S::average, false, nan}};
  }
  return {{"min_phi_above", Monotonicity::increasing, S::minimum, true, nan},
          {"max_phi_below", Monotonicity::decreasing, S::maximum, false, nan},
          {"avg_phi_above_0", Monotonicity::increasing, S::average, true, 0.0},
          {"avg_phi_below_0", Monotonicity::decreasing, S::average, false, 0.0}};
}

namespace {

struct DecouplingGeometry {
  Box window, A1, A2;
};

DecouplingGeometry decoupling_geometry(const DecouplingOptions& o) {
  if (o.r < 1 || o.s < 1) throw std::invalid_argument("decoupling needs r >= 1 and s >= 1");
  if (!(o.eps > 0.0 && o.eps < 1.0)) throw std::invalid_argument("eps must lie in (0, 1)");
  DecouplingGeometry g;
  std::vector<int64_t> sides(static_cast<size_t>(o.d), o.r);
  g.A1 = make_box(o.d, sides);
  Point lo = g.A1.lo(), hi = g.A1.hi();
  const int64_t shift = o.r - 1 + o.s;  // l-inf distance between the boxes is s
  lo[0] += shift;
  hi[0] += shift;
  g.A2 = Box(o.d, lo, hi);
  sides[0] = o.r + shift;
  g.window = make_box(o.d, sides);
  return g;
}

std::vector<double> box_values(const std::vector<double>& field, const Box& window, const Box& A) {
  std::vector<double> v(static_cast<size_t>(A.size()));
  for (int64_t i = 0; i < A.size(); ++i) v[size_t(i)] = field[size_t(window.index(A.point(i)))];
  return v;
}

// Fields at the lower, nominal and upper levels on the window.
struct CoupledFields {
  std::vector<double> lower, nominal, upper;
};

CoupledFields coupled_sample(DecoupleKind kind, const DecouplingOptions& o, const Box& window, Stream& rng) {
  CoupledFields c;
  if (kind == DecoupleKind::interlacement) {
    const auto sampler = InterlacementSampler::get(window, o.halo_factor);
    const InterlacementSample hi = sampler->sample(o.u * (1.0 + o.eps), rng);
    c.upper = local_time_field(hi).values;
    c.nominal = local_time_field(hi.restrict_to(o.u)).values;
    c.lower = local_time_field(hi.restrict_to(o.u * (1.0 - o.eps))).values;
  } else {
    const auto sampler = GreenFieldSampler::get(window);
    sampler->sample_into(rng, c.nominal);
    c.lower = c.nominal;
    c.upper = c.nominal;
    for (double& v : c.lower) v -= o.eps;
    for (double& v : c.upper) v += o.eps;
  }
  return c;
}

}  // namespace

DecouplingReport decoupling_test(DecoupleKind kind, std::vector<BoxEvent> events, const DecouplingOptions& o) {
  if (o.replicas < 2) throw std::invalid_argument("decoupling needs at least 2 replicas");
  const DecouplingGeometry g = decoupling_geometry(o);
  DecouplingReport rep;
  rep.kind = kind;
  rep.options = o;
  rep.A1 = g.A1;
  rep.A2 = g.A2;

  // pilot run fixes the missing thresholds at the nominal level
  bool need_pilot = false;
  for (auto& e : events) {
    if (std::isnan(e.threshold)) {
      if (kind == DecoupleKind::interlacement && e.stat == BoxEvent::Stat::average) {
        e.threshold = o.u;
      } else {
        need_pilot = true;
      }
    }
  }
  if (need_pilot) {
    if (o.pilot_replicas < 1) throw std::invalid_argument("pilot replicas must be >= 1");
    std::vector<std::vector<double>> stats(events.size(), std::vector<double>(size_t(o.pilot_replicas)));
    parallel_for(o.pilot_replicas, o.threads, [&](int64_t r) {
      Stream rng = Stream(o.seed, uint64_t(r)).split(1);
      const CoupledFields c = coupled_sample(kind, o, g.window, rng);
      const std::vector<double> v = box_values(c.nominal, g.window, g.A1);
      for (size_t k = 0; k < events.size(); ++k) stats[k][size_t(r)] = statistic(events[k], v);
    });
    for (size_t k = 0; k < events.size(); ++k) {
      if (std::isnan(events[k].threshold)) events[k].threshold = quantile(stats[k], 0.5);
    }
  }

  const size_t E = events.size();
  // per replica and event: f1 f2 nominal, f1 sprinkled, f2 sprinkled, monotonicity violation
  std::vector<std::array<uint8_t, 4>> rec(size_t(o.replicas) * E);
  parallel_for(o.replicas, o.threads, [&](int64_t r) {
    Stream rng = Stream(o.seed, uint64_t(r)).split(2);
    const CoupledFields c = coupled_sample(kind, o, g.window, rng);
    for (size_t k = 0; k < E; ++k) {
      const BoxEvent& ev = events[k];
      const bool inc = ev.dir == Monotonicity::increasing;
      std::array<bool, 2> at_lo, at_nom, at_hi;
      for (int b = 0; b < 2; ++b) {
        const Box& A = b ? g.A2 : g.A1;
        at_lo[size_t(b)] = ev.eval(box_values(c.lower, g.window, A));
        at_nom[size_t(b)] = ev.eval(box_values(c.nominal, g.window, A));
        at_hi[size_t(b)] = ev.eval(box_values(c.upper, g.window, A));
      }
      bool viol = false;
      for (int b = 0; b < 2; ++b) {
        const int lo = at_lo[size_t(b)], nom = at_nom[size_t(b)], hi = at_hi[size_t(b)];
        viol = viol || (inc ? !(lo <= nom && nom <= hi) : !(lo >= nom && nom >= hi));
      }
      const auto& spr = inc ? at_hi : at_lo;
      rec[size_t(r) * E + k] = {uint8_t(at_nom[0] && at_nom[1]), uint8_t(spr[0]), uint8_t(spr[1]), uint8_t(viol)};
    }
  });

  const double n = double(o.replicas);
  for (size_t k = 0; k < E; ++k) {
    double m[3] = {0, 0, 0};
    int64_t viol = 0;
    for (int r = 0; r < o.replicas; ++r) {
      const auto& x = rec[size_t(r) * E + k];
      for (int i = 0; i < 3; ++i) m[i] += x[size_t(i)];
      viol += x[3];
    }
    for (double& v : m) v /= n;
    double cov[3][3] = {};
    for (int r = 0; r < o.replicas; ++r) {
      const auto& x = rec[size_t(r) * E + k];
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) cov[i][j] += (x[size_t(i)] - m[i]) * (x[size_t(j)] - m[j]);
      }
    }
    for (auto& row : cov) {
      for (double& v : row) v /= (n - 1.0);
    }
    const double grad[3] = {-1.0, m[2], m[1]};
    double var = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) var += grad[i] * cov[i][j] * grad[j];
    }
    DecouplingRow row;
    row.event = events[k];
    row.lhs = m[0];
    row.lhs_se = std::sqrt(cov[0][0] / n);
    row.rhs = m[1] * m[2];
    row.rhs_se = std::sqrt(std::max(0.0, m[2] * m[2] * cov[1][1] + m[1] * m[1] * cov[2][2] +
                                              2.0 * m[1] * m[2] * cov[1][2]) / n);
    row.diff_se = std::sqrt(std::max(0.0, var) / n);
    row.slack = std::max(0.0, row.lhs - row.rhs);
    row.z = row.diff_se > 0.0 ? (row.lhs - row.rhs) / row.diff_se : (row.lhs > row.rhs ? INFINITY : 0.0);
    row.monotonicity_violations = viol;
    row.pass = row.lhs <= row.rhs + 3.0 * row.diff_se;
    rep.rows.push_back(row);
  }
  return rep;
}

// ------------------------------------------------------------------- decay

std::string to_string(SeedKind k) { return k == SeedKind::iid ? "iid" : "gff-c"; }

SeedKind parse_seed_kind(const std::string& s) {
  if (s == "iid") return SeedKind::iid;
  if (s == "gff-c" || s == "gff_c") return SeedKind::gff_c;
  throw std::invalid_argument("unknown seed kind '" + s + "'");
}

DecayReport renorm_decay_experiment(const DecayOptions& o) {
  if (o.replicas < 2) throw std::invalid_argument("decay experiment needs at least 2 replicas");
  if (o.kind == SeedKind::iid && !(o.q >= 0.0 && o.q <= 1.0)) throw std::invalid_argument("q must lie in [0, 1]");
  DecayReport rep;
  rep.options = o;
  rep.scales = build_scales(o.d, o.L0, o.n_max, std::make_pair(o.l0, o.ld));
  rep.reference_scales = build_scales(o.d, o.L0, std::min(o.n_max, 2));
  const ScaleSystem& s = rep.scales;
  const int d = o.d;
  const int64_t side0 = ipow(o.l0, o.n_max);  // seeds per axis in one level-n_max cell
  const Box seeds = lattice_box(d, Point{}, side0);  // planar d = 2 allowed for i.i.d. seeds
  if (seeds.size() > (int64_t(1) << 26)) throw std::invalid_argument("level-n_max cell too large to sample");

  Box field_box;
  if (o.kind == SeedKind::gff_c) {
    if (d < 3) throw std::invalid_argument("gff seeds need d >= 3");
    Point lo{}, hi{};
    for (int a = 0; a < d; ++a) {
      lo[a] = -1 - o.field_buffer;
      hi[a] = o.L0 * (side0 + 1) + 1 + o.field_buffer;
    }
    field_box = Box(d, lo, hi);
    if (field_box.size() > (int64_t(1) << 24)) throw std::invalid_argument("field window too large");
  }

  std::vector<std::vector<double>> frac(size_t(o.n_max + 1), std::vector<double>(size_t(o.replicas), 0.0));
  parallel_for(o.replicas, o.threads, [&](int64_t r) {
    Stream rng(o.seed, uint64_t(r));
    CoarseConfig c;
    if (o.kind == SeedKind::iid) {
      for (int64_t i = 0; i < seeds.size(); ++i) {
        if (rng.uniform() < o.q) c[seeds.point(i)] = kFamC;
      }
    } else {
      Stream fs = rng.split(0);
      const VertexField phi = sample_gff(field_box, fs);
      SeedLayers layers;
      layers.phi = &phi;
      SeedParams p;
      p.K = o.K;
      p.L0 = o.L0;
      c = to_config(classify_seeds(layers, seeds, p));
    }
    const std::vector<LevelEval> lv = eval_levels(c, s, o.n_max);
    for (int k = 0; k <= o.n_max; ++k) {
      const double count = double(ipow(o.l0, (o.n_max - k) * d));
      frac[size_t(k)][size_t(r)] = double(lv[size_t(k)].bad.size()) / count;
    }
  });

  std::vector<double> exact;
  if (o.kind == SeedKind::iid) exact = iid_recursion(o.q, s, o.n_max);
  for (int k = 0; k <= o.n_max; ++k) {
    DecayRow row;
    row.n = k;
    for (double f : frac[size_t(k)]) row.fraction.add(f);
    row.p_hat = row.fraction.mean();
    row.se = row.fraction.std_error();
    row.ci = {std::max(0.0, row.p_hat - 1.96 * row.se), std::min(1.0, row.p_hat + 1.96 * row.se)};
    if (!exact.empty()) {
      row.exact = exact[size_t(k)];
      row.z = row.se > 0.0 ? (row.p_hat - *row.exact) / row.se : (row.p_hat == *row.exact ? 0.0 : INFINITY);
    }
    rep.rows.push_back(row);
  }
  rep.strictly_decreasing = true;
  for (size_t k = 1; k < rep.rows.size(); ++k) {
    rep.strictly_decreasing = rep.strictly_decreasing && rep.rows[k].p_hat < rep.rows[k - 1].p_hat;
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : rep.rows) {
    if (row.p_hat > 0.0 && row.p_hat < 0.5) pts.emplace_back(double(row.n), std::log2(-std::log2(row.p_hat)));
  }
  if (pts.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double k = double(pts.size());
    rep.loglog_slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }
  return rep;
}

}  // namespace cgff
