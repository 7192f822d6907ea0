#include "cgff/perc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "cgff/greens.hpp"
#include "cgff/parallel.hpp"
#include "cgff/union_find.hpp"

namespace cgff {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

OpenConfig empty_config(const VertexField& f, double h, const char* mode) {
  OpenConfig c;
  c.box = f.box;
  c.h = h;
  c.mode = mode;
  c.field_seed = f.seed;
  c.field_stream = f.stream;
  c.vertex_open.assign(size_t(f.box.size()), 0);
  c.edge_open.assign(size_t(f.box.size() * f.box.dim()), 0);
  return c;
}
}  // namespace

std::string to_string(PercMode m) {
  switch (m) {
    case PercMode::lattice: return "lattice";
    case PercMode::cable: return "cable";
    case PercMode::slab: return "slab";
    case PercMode::truncated: return "truncated";
  }
  return "?";
}

PercMode parse_mode(const std::string& s) {
  if (s == "lattice") return PercMode::lattice;
  if (s == "cable") return PercMode::cable;
  if (s == "slab") return PercMode::slab;
  if (s == "truncated") return PercMode::truncated;
  throw std::invalid_argument("unknown percolation mode '" + s + "'");
}

OpenConfig vertex_level_set(const VertexField& f, double h) {
  OpenConfig c = empty_config(f, h, "lattice");
  const int d = f.box.dim();
  for (int64_t i = 0; i < f.box.size(); ++i) c.vertex_open[size_t(i)] = f.values[size_t(i)] >= h;
  for_each_edge(f.box, [&](int64_t i, int64_t j, int a) {
    c.edge_open[size_t(i * d + a)] = c.vertex_open[size_t(i)] && c.vertex_open[size_t(j)];
  });
  return c;
}

OpenConfig truncated_level_set(const VertexField& f, double h, double K) {
  OpenConfig c = empty_config(f, h, "truncated");
  const int d = f.box.dim();
  for (int64_t i = 0; i < f.box.size(); ++i) {
    const double v = f.values[size_t(i)];
    c.vertex_open[size_t(i)] = v >= h && v <= K;
  }
  for_each_edge(f.box, [&](int64_t i, int64_t j, int a) {
    c.edge_open[size_t(i * d + a)] = c.vertex_open[size_t(i)] && c.vertex_open[size_t(j)];
  });
  return c;
}

std::vector<double> edge_uniforms(const Box& box, Stream& rng) {
  std::vector<double> u(size_t(box.size() * box.dim()), 0.0);
  for_each_edge(box, [&](int64_t i, int64_t, int a) { u[size_t(i * box.dim() + a)] = rng.uniform(); });
  return u;
}

double cable_edge_threshold(double a, double b, double U) {
  // open at h iff (a+h)(b+h) > c with both factors positive
  const double c = -0.5 * std::log1p(-U);
  return 0.5 * (-(a + b) + std::sqrt((a - b) * (a - b) + 4.0 * c));
}

OpenConfig cable_level_set(const VertexField& f, double h, const std::vector<double>& U) {
  const int d = f.box.dim();
  if (int64_t(U.size()) != f.box.size() * d) throw std::invalid_argument("edge uniforms do not match the box");
  OpenConfig c = empty_config(f, h, "cable");
  for (int64_t i = 0; i < f.box.size(); ++i) c.vertex_open[size_t(i)] = f.values[size_t(i)] >= -h;
  for_each_edge(f.box, [&](int64_t i, int64_t j, int a) {
    if (!c.vertex_open[size_t(i)] || !c.vertex_open[size_t(j)]) return;
    const double p = bridge_stays_above(lattice_edge(f.values[size_t(i)], f.values[size_t(j)]), -h);
    c.edge_open[size_t(i * d + a)] = U[size_t(i * d + a)] < p;
  });
  return c;
}

OpenConfig cable_level_set(const VertexField& f, double h, Stream& rng) {
  return cable_level_set(f, h, edge_uniforms(f.box, rng));
}

ClusterLabeling label_clusters(const OpenConfig& cfg) {
  const Box& box = cfg.box;
  const int d = box.dim();
  const int64_t n = box.size();
  UnionFind uf(n);
  for_each_edge(box, [&](int64_t i, int64_t j, int a) {
    if (cfg.edge_open[size_t(i * d + a)]) uf.unite(i, j);
  });
  ClusterLabeling out;
  out.label.assign(size_t(n), -1);
  std::vector<int64_t> id(size_t(n), -1);
  for (int64_t i = 0; i < n; ++i) {
    if (!cfg.vertex_open[size_t(i)]) continue;
    const int64_t r = uf.find(i);
    if (id[size_t(r)] < 0) {
      id[size_t(r)] = int64_t(out.sizes.size());
      out.sizes.push_back(0);
    }
    out.label[size_t(i)] = id[size_t(r)];
    ++out.sizes[size_t(id[size_t(r)])];
  }
  for (int64_t s : out.sizes) out.largest = std::max(out.largest, s);
  out.crossing.assign(size_t(d), 0);
  const size_t m = out.sizes.size();
  for (int a = 0; a < d; ++a) {
    std::vector<uint8_t> lo(m, 0), hi(m, 0);
    for (int64_t i = 0; i < n; ++i) {
      const int64_t l = out.label[size_t(i)];
      if (l < 0) continue;
      const int64_t c = box.coord(i, a);
      if (c == box.lo()[a]) lo[size_t(l)] = 1;
      if (c == box.hi()[a] - 1) hi[size_t(l)] = 1;
    }
    for (size_t k = 0; k < m; ++k) {
      if (lo[k] && hi[k]) out.crossing[size_t(a)] = 1;
    }
  }
  return out;
}

Box inner_window(const Box& box, int64_t buffer, int axes) {
  Point lo = box.lo(), hi = box.hi();
  for (int a = 0; a < std::min(axes, box.dim()); ++a) {
    lo[a] += buffer;
    hi[a] -= buffer;
    if (hi[a] <= lo[a]) throw std::invalid_argument("buffer leaves an empty window");
  }
  return Box(box.dim(), lo, hi);
}

namespace {

struct WindowEdge {
  double v;  // largest level at which the edge is open
  int64_t i, j;
};

std::vector<WindowEdge> window_edges(const VertexField& f, const Box& W, bool cable, Stream& rng) {
  const int64_t n = W.size();
  if (W.side(0) < 2) throw std::invalid_argument("crossing window needs side >= 2 along axis 0");
  std::vector<double> val(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) val[size_t(i)] = f.at(W.point(i));
  std::vector<WindowEdge> es;
  es.reserve(size_t(n * W.dim()));
  for_each_edge(W, [&](int64_t i, int64_t j, int) {
    const double a = val[size_t(i)], b = val[size_t(j)];
    es.push_back({cable ? -cable_edge_threshold(a, b, rng.uniform()) : std::min(a, b), i, j});
  });
  return es;
}

// Union-find over the window plus two face nodes n (axis-0 low face) and n + 1.
UnionFind face_union_find(const Box& W) {
  const int64_t n = W.size();
  UnionFind uf(n + 2);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t c = W.coord(i, 0);
    if (c == W.lo()[0]) uf.unite(i, n);
    if (c == W.hi()[0] - 1) uf.unite(i, n + 1);
  }
  return uf;
}

}  // namespace

double crossing_threshold(const VertexField& f, const Box& W, bool cable, Stream& rng) {
  std::vector<WindowEdge> es = window_edges(f, W, cable, rng);
  std::sort(es.begin(), es.end(), [](const WindowEdge& x, const WindowEdge& y) { return x.v > y.v; });
  const int64_t n = W.size();
  UnionFind uf = face_union_find(W);
  for (const WindowEdge& e : es) {
    uf.unite(e.i, e.j);
    if (uf.same(n, n + 1)) return e.v;
  }
  return kNegInf;
}

std::vector<uint8_t> crosses_at(const VertexField& f, const Box& W, bool cable, const std::vector<double>& hs,
                                Stream& rng) {
  const std::vector<WindowEdge> es = window_edges(f, W, cable, rng);
  const int64_t n = W.size();
  std::vector<uint8_t> out;
  for (double h : hs) {
    UnionFind uf = face_union_find(W);
    for (const WindowEdge& e : es) {
      if (e.v >= h) uf.unite(e.i, e.j);
    }
    out.push_back(uf.same(n, n + 1));
  }
  return out;
}

namespace {

struct ReplicaGeometry {
  Box field_box;
  Box window;
};

ReplicaGeometry geometry(int d, int64_t L, PercMode mode, const CrossingOptions& opt) {
  const int64_t b = int64_t(std::ceil(opt.buffer_fraction * double(L)));
  ReplicaGeometry g;
  g.field_box = make_box(d, std::vector<int64_t>(static_cast<size_t>(d), L + 2 * b));
  g.window = inner_window(g.field_box, b);
  if (mode == PercMode::slab) {
    Point lo = g.window.lo(), hi = g.window.hi();
    for (int a = 2; a < d; ++a) {
      const int64_t mid = (lo[a] + hi[a]) / 2;
      lo[a] = mid - opt.slab_thickness / 2;
      hi[a] = lo[a] + opt.slab_thickness;
    }
    g.window = Box(d, lo, hi);
  }
  return g;
}

VertexField restrict_field(const VertexField& f, const Box& W) {
  VertexField r;
  r.box = W;
  r.seed = f.seed;
  r.stream = f.stream;
  r.sampler = f.sampler;
  r.values.resize(size_t(W.size()));
  for (int64_t i = 0; i < W.size(); ++i) r.values[size_t(i)] = f.at(W.point(i));
  return r;
}

}  // namespace

CrossingTable crossing_curve(int d, const std::vector<int64_t>& Ls, const std::vector<double>& hs, int replicas,
                             PercMode mode, uint64_t seed, const CrossingOptions& opt) {
  if (Ls.empty() || hs.empty()) throw std::invalid_argument("crossing curve needs nonempty L and h grids");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  CrossingTable t;
  t.d = d;
  t.mode = mode;
  t.seed = seed;
  t.L = Ls;
  t.h = hs;
  for (size_t li = 0; li < Ls.size(); ++li) {
    const ReplicaGeometry g = geometry(d, Ls[li], mode, opt);
    std::vector<double> thr(static_cast<size_t>(replicas), kNegInf);
    // short grids: one union-find pass per level instead of a sort
    const bool direct = mode == PercMode::truncated || hs.size() <= kDirectLevels;
    std::vector<std::vector<uint8_t>> bits(static_cast<size_t>(direct ? replicas : 0));
    parallel_for(replicas, opt.threads, [&](int64_t r) {
      Stream rng(seed, (uint64_t(li) << 32) | uint64_t(r));
      Stream fs = rng.split(0), es = rng.split(1);
      const VertexField f = sample_gff(g.field_box, fs);
      if (mode == PercMode::truncated) {
        const VertexField w = restrict_field(f, g.window);
        std::vector<uint8_t> cross(hs.size());
        for (size_t k = 0; k < hs.size(); ++k) {
          cross[k] = label_clusters(truncated_level_set(w, hs[k], opt.truncation_K)).crossing[0];
        }
        bits[size_t(r)] = std::move(cross);
      } else if (direct) {
        bits[size_t(r)] = crosses_at(f, g.window, mode == PercMode::cable, hs, es);
      } else {
        thr[size_t(r)] = crossing_threshold(f, g.window, mode == PercMode::cable, es);
      }
    });
    for (size_t k = 0; k < hs.size(); ++k) {
      int64_t c = 0;
      for (int r = 0; r < replicas; ++r) {
        c += direct ? bits[size_t(r)][k] : (thr[size_t(r)] >= hs[k]);
      }
      t.rows.push_back({Ls[li], hs[k], mode, make_rate(c, replicas)});
    }
    if (!direct) t.thresholds.push_back(std::move(thr));
  }
  return t;
}

std::optional<double> curve_crossing(const std::vector<double>& h, const std::vector<double>& s,
                                     const std::vector<double>& l) {
  const size_t n = h.size();
  std::optional<double> best;
  double best_score = -1.0;
  size_t prev = n;  // last index with nonzero difference
  for (size_t k = 0; k < n; ++k) {
    const double dk = l[k] - s[k];
    if (dk == 0.0) continue;
    if (prev < n && dk < 0.0 && l[prev] - s[prev] > 0.0) {
      const double d0 = l[prev] - s[prev];
      const double t = d0 / (d0 - dk);
      const double x = h[prev] + t * (h[k] - h[prev]);
      const double level = 0.5 * ((s[prev] + t * (s[k] - s[prev])) + (l[prev] + t * (l[k] - l[prev])));
      const double score = std::min(level, 1.0 - level);
      if (score > best_score) {
        best_score = score;
        best = x;
      }
    }
    prev = k;
  }
  return best;
}

double estimate_pc(double hstar, int d) { return normal_upper_tail(hstar / std::sqrt(green_zd(Point{}, d))); }

namespace {
std::optional<double> hstar_from(const std::vector<double>& h, const std::vector<std::vector<double>>& thr,
                                 std::vector<double>* pairs) {
  std::vector<std::vector<double>> curves;
  for (const auto& t : thr) {
    std::vector<double> sorted = t;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> c(h.size());
    for (size_t k = 0; k < h.size(); ++k) {
      const auto it = std::lower_bound(sorted.begin(), sorted.end(), h[k]);
      c[k] = double(sorted.end() - it) / double(sorted.size());
    }
    curves.push_back(std::move(c));
  }
  double sum = 0.0;
  int cnt = 0;
  for (size_t i = 0; i + 1 < curves.size(); ++i) {
    const auto x = curve_crossing(h, curves[i], curves[i + 1]);
    if (!x) return std::nullopt;
    if (pairs) pairs->push_back(*x);
    sum += *x;
    ++cnt;
  }
  if (cnt == 0) return std::nullopt;
  return sum / cnt;
}
}  // namespace

HstarEstimate estimate_hstar(const CrossingTable& t, int bootstrap, uint64_t seed) {
  if (t.L.size() < 2) throw std::invalid_argument("h* needs at least two box sizes");
  if (t.thresholds.size() != t.L.size()) throw std::invalid_argument("h* needs per-replica crossing thresholds");
  HstarEstimate e;
  e.hstar = hstar_from(t.h, t.thresholds, &e.pair_estimates);
  e.indeterminate = !e.hstar.has_value();
  if (e.indeterminate) return e;
  e.pc = estimate_pc(*e.hstar, t.d);
  Stream rng(seed, 0xB007);
  std::vector<double> boot;
  for (int b = 0; b < bootstrap; ++b) {
    std::vector<std::vector<double>> res;
    for (const auto& thr : t.thresholds) {
      std::vector<double> r(thr.size());
      for (double& x : r) x = thr[size_t(rng.below(thr.size()))];
      res.push_back(std::move(r));
    }
    const auto x = hstar_from(t.h, res, nullptr);
    if (x) boot.push_back(*x);
  }
  e.ci_coverage = bootstrap ? double(boot.size()) / double(bootstrap) : 0.0;
  if (!boot.empty()) e.ci = {quantile(boot, 0.025), quantile(boot, 0.975)};
  return e;
}

std::vector<SignClusterRow> sign_cluster_experiment(int d, int64_t L, int replicas, const std::vector<double>& hs,
                                                    uint64_t seed, const CrossingOptions& opt) {
  const ReplicaGeometry g = geometry(d, L, PercMode::lattice, opt);
  std::vector<double> plus(static_cast<size_t>(replicas)), minus(static_cast<size_t>(replicas));
  parallel_for(replicas, opt.threads, [&](int64_t r) {
    Stream rng(seed, uint64_t(r));
    Stream fs = rng.split(0), es = rng.split(1);
    VertexField f = sample_gff(g.field_box, fs);
    plus[size_t(r)] = crossing_threshold(f, g.window, false, es);
    for (double& v : f.values) v = -v;
    minus[size_t(r)] = crossing_threshold(f, g.window, false, es);
  });
  std::vector<SignClusterRow> rows;
  for (double h : hs) {
    int64_t p = 0, m = 0, b = 0;
    for (int r = 0; r < replicas; ++r) {
      const bool sp = plus[size_t(r)] >= h;
      const bool sm = minus[size_t(r)] > -h;
      p += sp;
      m += sm;
      b += sp && sm;
    }
    rows.push_back({h, make_rate(p, replicas), make_rate(m, replicas), make_rate(b, replicas)});
  }
  return rows;
}

double FlipBoundary::beta() const {
  return std::accumulate(b.begin(), b.end(), 0.0) / double(b.size());
}

FlipEvents flip_events(const FlipBoundary& bd, double h, double K, double phi_x, const std::vector<double>& U) {
  const size_t m = bd.b.size();
  if (U.size() != m) throw std::invalid_argument("one uniform per quarter bridge");
  FlipEvents ev;
  ev.h = h;
  ev.K = K;
  ev.all_within_K = std::all_of(bd.b.begin(), bd.b.end(), [K](double v) { return std::abs(v) <= K; });
  ev.phi_above_h = phi_x >= h;
  ev.E_v.assign(m, 0);
  ev.F_v.assign(m, 0);
  for (size_t v = 0; v < m; ++v) {
    ev.E_v[v] = ev.all_within_K && bd.b[v] >= -h;
    ev.F_v[v] = U[v] < bridge_stays_above(quarter_edge(phi_x, bd.b[v]), -h);
    ev.E = ev.E || ev.E_v[v];
    ev.G = ev.G || (ev.E_v[v] && ev.F_v[v]);
  }
  return ev;
}

namespace {
struct GIntegrand {
  const FlipBoundary* b;
  double h, beta, sd;
};

double g_integrand(double y, void* p) {
  const auto* q = static_cast<const GIntegrand*>(p);
  double none = 1.0;
  for (double bv : q->b->b) {
    if (bv >= -q->h) none *= std::exp(-4.0 * (y + q->h) * (bv + q->h));
  }
  const double z = (y - q->beta) / q->sd;
  return std::exp(-0.5 * z * z) / (q->sd * std::sqrt(2.0 * M_PI)) * (1.0 - none);
}
}  // namespace

double flip_prob_G(const FlipBoundary& b, double h, double K) {
  if (!std::all_of(b.b.begin(), b.b.end(), [K](double v) { return std::abs(v) <= K; })) return 0.0;
  if (!std::any_of(b.b.begin(), b.b.end(), [h](double v) { return v >= -h; })) return 0.0;
  GIntegrand p{&b, h, b.beta(), std::sqrt(sigma0_sq(b.d))};
  const double lo = -h, hi = std::max(lo, p.beta + 14.0 * p.sd);
  if (hi <= lo) return 0.0;
  gsl_function F{&g_integrand, &p};
  gsl_integration_workspace* ws = gsl_integration_workspace_alloc(256);
  double res = 0.0, err = 0.0;
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  const int status = gsl_integration_qags(&F, lo, hi, 1e-15, 1e-12, 256, ws, &res, &err);
  gsl_set_error_handler(old);
  gsl_integration_workspace_free(ws);
  if (status != GSL_SUCCESS && err > 1e-10) throw std::runtime_error("flip quadrature did not converge");
  return res;
}

double flip_prob_E_above(const FlipBoundary& b, double h, double K) {
  if (!std::all_of(b.b.begin(), b.b.end(), [K](double v) { return std::abs(v) <= K; })) return 0.0;
  if (!std::any_of(b.b.begin(), b.b.end(), [h](double v) { return v >= -h; })) return 0.0;
  return normal_upper_tail((h - b.beta()) / std::sqrt(sigma0_sq(b.d)));
}

FlipBoundary sample_flip_boundary(int d, Stream& rng) {
  Point lo{}, hi{};
  for (int a = 0; a < d; ++a) {
    lo[a] = -1;
    hi[a] = 2;
  }
  const Box box(d, lo, hi);
  const VertexField f = GreenFieldSampler::get(box)->sample(rng);
  const double px = f.at(Point{});
  FlipBoundary b;
  b.d = d;
  for (int a = 0; a < d; ++a) {
    for (int s : {+1, -1}) {
      Point y{};
      y[a] = s;
      // midpoint of a length-1/2 bridge with sigma^2 = 2: mean (x+y)/2, variance 1/4
      b.b.push_back(0.5 * (px + f.at(y)) + 0.5 * rng.normal());
    }
  }
  return b;
}

FlipReport flip_experiment(int d, const std::vector<double>& hs, int nb, int inner, uint64_t seed, int threads,
                           const TruncationConstants& c) {
  if (nb < 1 || inner < 2) throw std::invalid_argument("flip experiment needs boundaries and inner replicas");
  for (double h : hs) {
    if (!(h > 0.0 && h <= 1.0)) throw std::invalid_argument("flip levels must lie in (0, 1]");
  }
  std::vector<FlipBoundary> bounds(static_cast<size_t>(nb));
  for (int i = 0; i < nb; ++i) {
    Stream rng(seed, uint64_t(i));
    bounds[size_t(i)] = sample_flip_boundary(d, rng);
  }
  const double sd = std::sqrt(sigma0_sq(d));
  FlipReport rep;
  for (double h : hs) {
    FlipLevelReport lv;
    lv.h = h;
    lv.K = truncation_K(h, c);
    lv.boundaries.resize(size_t(nb));
    parallel_for(nb, threads, [&](int64_t i) {
      const FlipBoundary& b = bounds[size_t(i)];
      Stream rng = Stream(seed, uint64_t(i)).split(1);  // same inner draws for every h
      const double beta = b.beta();
      RunningStats G, E, D;
      std::vector<double> U(b.b.size());
      for (int k = 0; k < inner; ++k) {
        const double phi = beta + sd * rng.normal();
        for (double& x : U) x = rng.uniform();
        const FlipEvents ev = flip_events(b, h, lv.K, phi, U);
        const double g = ev.G, e = ev.E && ev.phi_above_h;
        G.add(g);
        E.add(e);
        D.add(g - e);
      }
      FlipBoundaryRow row;
      row.beta = beta;
      row.p_G = G.mean();
      row.p_E = E.mean();
      row.diff = D.mean();
      row.diff_se = D.std_error();
      row.estimate_holds = row.diff <= 3.0 * row.diff_se;
      row.exact_G = flip_prob_G(b, h, lv.K);
      row.exact_E = flip_prob_E_above(b, h, lv.K);
      row.exact_holds = row.exact_G <= row.exact_E;
      lv.boundaries[size_t(i)] = row;
    });
    for (const auto& row : lv.boundaries) {
      lv.all_hold = lv.all_hold && row.estimate_holds;
      lv.exact_violations += !row.exact_holds;
      if (row.diff_se > 0.0) lv.worst_z = std::max(lv.worst_z, row.diff / row.diff_se);
    }
    rep.levels.push_back(std::move(lv));
  }
  for (const auto& lv : rep.levels) {
    if (lv.all_hold && lv.exact_violations == 0 && (!rep.h1 || lv.h > *rep.h1)) rep.h1 = lv.h;
  }
  return rep;
}

std::pair<bool, bool> shared_uniform_pair(double pf, double pg, double Y) { return {Y <= pf, Y <= pg}; }

}  // namespace cgff
