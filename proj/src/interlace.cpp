#include "cgff/interlace.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include <Eigen/Dense>
#include <fftw3.h>

#include "cgff/gff.hpp"
#include "cgff/parallel.hpp"
#include "cgff/union_find.hpp"
#include "json.hpp"

namespace cgff {

AliasTable::AliasTable(const std::vector<double>& weights) {
  const size_t n = weights.size();
  if (n == 0) throw std::invalid_argument("alias table over an empty set");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("alias weights must be finite and nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("alias weights sum to zero");
  prob_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<uint32_t> small, large;
  for (size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * double(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(uint32_t(i));
  }
  while (!small.empty() && !large.empty()) {
    const uint32_t s = small.back(), l = large.back();
    small.pop_back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] -= 1.0 - scaled[s];
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (uint32_t i : large) prob_[i] = 1.0;
  for (uint32_t i : small) prob_[i] = 1.0;
}

size_t AliasTable::sample(Stream& rng) const {
  const size_t i = size_t(rng.below(prob_.size()));
  return rng.uniform() < prob_[i] ? i : alias_[i];
}

int CubeExitLaw::max_half_width(int d) {
  int w = 1;
  while (w < 64 && std::pow(double(4 * w + 1), d) <= 2.5e6) w *= 2;
  return w;
}

CubeExitLaw::CubeExitLaw(int d, int w) : d_(d), w_(w) {
  if (w < 1) throw std::invalid_argument("cube half-width must be >= 1");
  const int n = 2 * w + 1;
  int64_t total = 1;
  for (int i = 0; i < d; ++i) total *= n;
  // coefficients of g_C(0, .) in the sine basis
  std::vector<double> phi_c(static_cast<size_t>(n));
  std::vector<double> cosk(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    phi_c[size_t(k)] = std::sin(M_PI * double(k + 1) * double(w + 1) / double(n + 1));
    cosk[size_t(k)] = std::cos(M_PI * double(k + 1) / double(n + 1));
  }
  double* a = static_cast<double*>(fftw_malloc(sizeof(double) * size_t(total)));
  if (!a) throw std::bad_alloc();
  // basis normalisation sqrt(2/(n+1)) appears twice per axis; RODFT00 adds a factor 2 per axis
  const double axis_norm = (2.0 / double(n + 1)) / 2.0;
  const double norm = std::pow(axis_norm, d);
  for (int64_t i = 0; i < total; ++i) {
    int64_t rem = i;
    double lam = 2.0 * d, prod = 1.0;
    for (int ax = d - 1; ax >= 0; --ax) {
      const int k = int(rem % n);
      rem /= n;
      lam -= 2.0 * cosk[size_t(k)];
      prod *= phi_c[size_t(k)];
    }
    a[i] = norm * prod / lam;
  }
  std::vector<int> dims(static_cast<size_t>(d), n);
  std::vector<fftw_r2r_kind> kinds(static_cast<size_t>(d), FFTW_RODFT00);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lk(fftw_planner_mutex());
    plan = fftw_plan_r2r(d, dims.data(), a, a, kinds.data(), FFTW_ESTIMATE);
  }
  if (!plan) {
    fftw_free(a);
    throw std::runtime_error("FFTW plan creation failed");
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lk(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  // face x_0 = +w: leading index n - 1
  const int64_t face = total / n;
  face_.assign(a + (n - 1) * face, a + total);
  fftw_free(a);
  double s = 0.0;
  for (double& v : face_) {
    v = std::max(v, 0.0);
    s += v;
  }
  total_ = 2.0 * d * s;
  alias_ = AliasTable(face_);
}

Point CubeExitLaw::sample(Stream& rng) const {
  const int f = int(rng.below(uint64_t(2 * d_)));
  const int axis = f >> 1;
  size_t idx = alias_.sample(rng);
  Point p{};
  const int n = 2 * w_ + 1;
  for (int ax = d_ - 1; ax >= 0; --ax) {
    if (ax == axis) continue;
    p[ax] = int64_t(idx % size_t(n)) - w_;
    idx /= size_t(n);
  }
  p[axis] = (f & 1) ? -(w_ + 1) : (w_ + 1);
  return p;
}

std::shared_ptr<const CubeExitLaw> CubeExitLaw::get(int d, int w) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const CubeExitLaw>> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto& slot = cache[{d, w}];
  if (!slot) slot = std::make_shared<const CubeExitLaw>(d, w);
  return slot;
}

InterlacementSample InterlacementSample::restrict_to(double u2) const {
  if (u2 > u) throw std::invalid_argument("restriction level above the sample level");
  InterlacementSample out = *this;
  out.u = u2;
  out.trajectories.clear();
  out.far_exits = out.far_returns = 0;
  for (const Trajectory& t : trajectories) {
    if (t.label <= u2) {
      out.trajectories.push_back(t);
      out.far_exits += t.far_exits;
      out.far_returns += t.far_returns;
    }
  }
  return out;
}

InterlacementSample merge(const InterlacementSample& a, const InterlacementSample& b) {
  if (!(a.window == b.window)) throw std::invalid_argument("merging samples on different windows");
  InterlacementSample out = a;
  out.u = a.u + b.u;
  for (Trajectory t : b.trajectories) {
    t.label += a.u;
    out.trajectories.push_back(std::move(t));
  }
  std::stable_sort(out.trajectories.begin(), out.trajectories.end(),
                   [](const Trajectory& x, const Trajectory& y) { return x.label < y.label; });
  out.far_exits += b.far_exits;
  out.far_returns += b.far_returns;
  out.max_return_prob = std::max(a.max_return_prob, b.max_return_prob);
  return out;
}

InterlacementSampler::InterlacementSampler(const Box& window, double halo_factor, double tol)
    : d_(window.dim()), window_(window), halo_factor_(halo_factor) {
  if (d_ < 3) throw std::invalid_argument("interlacements need d >= 3");
  if (!(halo_factor >= 2.0)) throw std::invalid_argument("halo factor must be >= 2");
  int64_t side = 0;
  for (int a = 0; a < d_; ++a) side = std::max(side, window.side(a));
  key_ = dilate(window, 1);
  halo_margin_ = std::max<int64_t>(2, int64_t(std::ceil((halo_factor - 1.0) / 2.0 * double(side))));
  halo_ = dilate(window, halo_margin_);
  const int wmax = std::min<int64_t>(CubeExitLaw::max_half_width(d_), halo_margin_);
  for (int w = 1; w <= wmax; w *= 2) cubes_.push_back(CubeExitLaw::get(d_, w));
  // farthest evaluation point: a cube exit just past the halo
  g_ = GreenTable::get(d_, side + 2 + halo_margin_ + int64_t(cubes_.back()->half_width()) + 2, tol);
  eq_ = equilibrium(box_points(key_), *g_);
  for (size_t i = 0; i < eq_.points.size(); ++i) {
    if (eq_.weights[i] > 0.0) {
      entry_points_.push_back(eq_.points[i]);
      entry_weights_.push_back(eq_.weights[i]);
    }
  }
  entry_alias_ = AliasTable(entry_weights_);
}

double InterlacementSampler::hit_probability(const Point& z) const {
  if (key_.contains(z)) return 1.0;
  double s = 0.0;
  for (size_t i = 0; i < entry_points_.size(); ++i) s += entry_weights_[i] * g_->at(z, entry_points_[i]);
  return std::min(s, 1.0);
}

double InterlacementSampler::entrance_spread() const {
  int64_t side = 0;
  for (int a = 0; a < d_; ++a) side = std::max(side, key_.side(a));
  return double(side) / double(halo_margin_);
}

Point InterlacementSampler::sample_entry(Stream& rng) const { return entry_points_[entry_alias_.sample(rng)]; }

Trajectory InterlacementSampler::walk(Stream& rng) const {
  Trajectory t;
  Point x = sample_entry(rng);
  t.pieces.push_back({x, {}});
  bool open = true;
  const uint64_t dirs = uint64_t(2 * d_);
  for (;;) {
    const int64_t D = dist_inf(key_, x);
    if (D <= 1) {
      if (!open) {
        t.pieces.push_back({x, {}});
        open = true;
      }
      const uint8_t c = uint8_t(rng.below(dirs));
      x[c >> 1] += (c & 1) ? -1 : 1;
      t.pieces.back().steps.push_back(c);
      continue;
    }
    open = false;
    if (!halo_.contains(x)) {
      ++t.far_exits;
      if (rng.uniform() < hit_probability(x)) {
        ++t.far_returns;
        // entrance point from far away is approximated by the harmonic measure
        x = sample_entry(rng);
        t.pieces.push_back({x, {}});
        open = true;
        continue;
      }
      break;
    }
    size_t k = 0;
    while (k + 1 < cubes_.size() && cubes_[k + 1]->half_width() <= D - 1) ++k;
    x = add(x, cubes_[k]->sample(rng));
  }
  return t;
}

InterlacementSample InterlacementSampler::sample(double u, Stream& rng) const {
  if (!(u > 0.0)) throw std::invalid_argument("interlacement level must be positive");
  InterlacementSample s;
  s.d = d_;
  s.u = u;
  s.window = window_;
  s.key = key_;
  s.halo = halo_;
  s.halo_factor = halo_factor_;
  s.capacity = eq_.capacity;
  s.seed = rng.seed();
  s.stream = rng.stream_id();
  std::poisson_distribution<int64_t> pois(u * eq_.capacity);
  const int64_t n = pois(rng);
  std::vector<double> labels(static_cast<size_t>(n));
  for (double& l : labels) l = u * rng.uniform();
  std::sort(labels.begin(), labels.end());
  s.trajectories.reserve(size_t(n));
  for (int64_t i = 0; i < n; ++i) {
    Stream ws = rng.split(uint64_t(2 * i));
    const Stream hs = rng.split(uint64_t(2 * i + 1));
    Trajectory t = walk(ws);
    t.label = labels[size_t(i)];
    t.hold_seed = hs.seed();
    t.hold_stream = hs.stream_id();
    s.far_exits += t.far_exits;
    s.far_returns += t.far_returns;
    s.trajectories.push_back(std::move(t));
  }
  return s;
}

std::shared_ptr<const InterlacementSampler> InterlacementSampler::get(const Box& window, double halo_factor) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const InterlacementSampler>> cache;
  std::string key = std::to_string(window.dim()) + ":" + std::to_string(halo_factor);
  for (int a = 0; a < window.dim(); ++a) key += ":" + std::to_string(window.lo()[a]) + "," + std::to_string(window.hi()[a]);
  std::lock_guard<std::mutex> lk(mu);
  auto& slot = cache[key];
  if (!slot) slot = std::make_shared<const InterlacementSampler>(window, halo_factor);
  return slot;
}

InterlacementSample sample_interlacement(const Box& window, double u, double halo_factor, Stream& rng) {
  return InterlacementSampler::get(window, halo_factor)->sample(u, rng);
}

LocalTimes local_time_field(const InterlacementSample& s) {
  LocalTimes lt;
  lt.window = s.window;
  lt.values.assign(size_t(s.window.size()), 0.0);
  for (const Trajectory& t : s.trajectories) {
    Stream hold(t.hold_seed, t.hold_stream);
    for_each_visit(t, s.d, [&](const Point& x) {
      if (s.window.contains(x)) lt.values[size_t(s.window.index(x))] += hold.exponential();
    });
  }
  const double inv = 1.0 / (2.0 * s.d);
  for (double& v : lt.values) v *= inv;
  return lt;
}

std::vector<uint8_t> occupied_set(const InterlacementSample& s) {
  std::vector<uint8_t> occ(size_t(s.window.size()), 0);
  for (const Trajectory& t : s.trajectories) {
    for_each_visit(t, s.d, [&](const Point& x) {
      if (s.window.contains(x)) occ[size_t(s.window.index(x))] = 1;
    });
  }
  return occ;
}

std::vector<uint8_t> edge_trace(const InterlacementSample& s) {
  std::vector<uint8_t> tr(size_t(s.window.size() * s.d), 0);
  for (const Trajectory& t : s.trajectories) {
    for_each_step(t, s.d, [&](const Point& a, const Point& b, uint8_t c) {
      if (!s.window.contains(a) || !s.window.contains(b)) return;
      const Point& lo = (c & 1) ? b : a;
      tr[size_t(s.window.index(lo) * s.d + (c >> 1))] = 1;
    });
  }
  return tr;
}

LaplaceResult laplace_exact(const std::vector<std::pair<Point, double>>& V, double u, int d) {
  LaplaceResult r;
  std::vector<std::pair<Point, double>> sup;
  for (const auto& pv : V) {
    if (pv.second != 0.0) sup.push_back(pv);
  }
  if (sup.empty()) {
    r.value = 1.0;
    return r;
  }
  int64_t diam = 0;
  for (const auto& a : sup) {
    for (const auto& b : sup) diam = std::max(diam, norm_inf(sub(a.first, b.first), d));
  }
  const auto g = GreenTable::get(d, diam);
  const long n = long(sup.size());
  Eigen::MatrixXd M(n, n);
  for (long i = 0; i < n; ++i) {
    double row = 0.0;
    for (long j = 0; j < n; ++j) {
      M(i, j) = g->at(sup[size_t(i)].first, sup[size_t(j)].first) * sup[size_t(j)].second;
      row += std::abs(M(i, j));
    }
    r.norm = std::max(r.norm, row);
  }
  if (!(r.norm < 1.0 - 1e-12)) {
    throw std::invalid_argument("Laplace transform needs ||G V|| < 1, got " + std::to_string(r.norm));
  }
  const Eigen::VectorXd w = (Eigen::MatrixXd::Identity(n, n) - M).partialPivLu().solve(Eigen::VectorXd::Ones(n));
  double s = 0.0;
  for (long i = 0; i < n; ++i) s += sup[size_t(i)].second * w[i];
  r.value = std::exp(u * s);
  return r;
}

RateEstimate make_rate(int64_t k, int64_t n) {
  RateEstimate r;
  r.events = k;
  r.trials = n;
  r.rate = n ? double(k) / double(n) : 0.0;
  r.ci = wilson_interval(k, n);
  return r;
}

bool connectivity_fails(const InterlacementSample& s, int64_t R, int64_t margin) {
  const int d = s.d;
  Point lo{}, hi{};
  for (int a = 0; a < d; ++a) {
    lo[a] = -margin;
    hi[a] = R + margin;
  }
  const Box region(d, lo, hi);
  for (int a = 0; a < d; ++a) {
    if (lo[a] < s.window.lo()[a] || hi[a] > s.window.hi()[a]) {
      throw std::invalid_argument("connectivity region exceeds the sampled window");
    }
  }
  UnionFind uf(region.size());
  std::vector<uint8_t> occ(size_t(region.size()), 0);
  for (const Trajectory& t : s.trajectories) {
    for_each_visit(t, d, [&](const Point& x) {
      if (region.contains(x)) occ[size_t(region.index(x))] = 1;
    });
    for_each_step(t, d, [&](const Point& a, const Point& b, uint8_t) {
      if (region.contains(a) && region.contains(b)) uf.unite(region.index(a), region.index(b));
    });
  }
  int64_t root = -1;
  Point cube_hi{};
  for (int a = 0; a < d; ++a) cube_hi[a] = R;
  const Box inner(d, Point{}, cube_hi);
  for (int64_t i = 0; i < inner.size(); ++i) {
    const int64_t j = region.index(inner.point(i));
    if (!occ[size_t(j)]) continue;
    const int64_t r = uf.find(j);
    if (root < 0) {
      root = r;
    } else if (r != root) {
      return true;
    }
  }
  return false;
}

std::vector<ConnectivityRow> connectivity_experiment(int d, double u, int64_t R, const std::vector<double>& eps,
                                                     int replicas, uint64_t seed, int threads, double halo_factor) {
  if (R < 1) throw std::invalid_argument("R must be >= 1");
  std::vector<int64_t> margins;
  int64_t mmax = 0;
  for (double e : eps) {
    if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("eps must lie in (0,1)");
    margins.push_back(int64_t(std::ceil(e * double(R))));
    mmax = std::max(mmax, margins.back());
  }
  Point lo{}, hi{};
  for (int a = 0; a < d; ++a) {
    lo[a] = -mmax;
    hi[a] = R + mmax;
  }
  const auto sampler = InterlacementSampler::get(Box(d, lo, hi), halo_factor);
  std::vector<std::vector<uint8_t>> fail(static_cast<size_t>(replicas));
  parallel_for(replicas, threads, [&](int64_t r) {
    Stream rng(seed, uint64_t(r));
    const InterlacementSample s = sampler->sample(u, rng);
    std::vector<uint8_t> f(margins.size());
    for (size_t i = 0; i < margins.size(); ++i) f[i] = connectivity_fails(s, R, margins[i]);
    fail[size_t(r)] = std::move(f);
  });
  std::vector<ConnectivityRow> rows;
  for (size_t i = 0; i < margins.size(); ++i) {
    int64_t k = 0;
    for (const auto& f : fail) k += f[i];
    rows.push_back({eps[i], make_rate(k, replicas)});
  }
  return rows;
}

std::vector<LargeDeviationRow> large_deviation_experiment(int d, double u, const std::vector<int64_t>& R_list,
                                                          double eps, int replicas, uint64_t seed, int threads,
                                                          double halo_factor) {
  std::vector<LargeDeviationRow> rows;
  for (size_t ri = 0; ri < R_list.size(); ++ri) {
    const int64_t R = R_list[ri];
    const auto sampler = InterlacementSampler::get(make_box(d, std::vector<int64_t>(size_t(d), R)), halo_factor);
    std::vector<double> avg(static_cast<size_t>(replicas));
    parallel_for(replicas, threads, [&](int64_t r) {
      Stream rng(seed, (uint64_t(ri) << 32) | uint64_t(r));
      const LocalTimes lt = local_time_field(sampler->sample(u, rng));
      double s = 0.0;
      for (double v : lt.values) s += v;
      avg[size_t(r)] = s / double(lt.values.size());
    });
    LargeDeviationRow row;
    row.R = R;
    int64_t k = 0;
    for (double a : avg) {
      row.average.add(a);
      if (std::abs(a - u) > eps * u) ++k;
    }
    row.deviation = make_rate(k, replicas);
    rows.push_back(row);
  }
  return rows;
}

bool strictly_decreasing(const std::vector<LargeDeviationRow>& rows) {
  for (size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].deviation.rate < rows[i - 1].deviation.rate)) return false;
  }
  return true;
}

std::vector<Point> psi(double u, const std::vector<Point>& A, int64_t T, int d, Stream& rng, int64_t* walks) {
  const EquilibriumMeasure em = equilibrium(A, d);
  std::unordered_set<Point, PointHash> out(A.begin(), A.end());
  std::vector<Point> pts;
  std::vector<double> w;
  for (size_t i = 0; i < em.points.size(); ++i) {
    if (em.weights[i] > 0.0) {
      pts.push_back(em.points[i]);
      w.push_back(em.weights[i]);
    }
  }
  const AliasTable alias(w);
  std::poisson_distribution<int64_t> pois(u * em.capacity);
  const int64_t n = pois(rng);
  if (walks) *walks = n;
  for (int64_t i = 0; i < n; ++i) {
    Point x = pts[alias.sample(rng)];
    for (int64_t s = 0; s < T; ++s) {
      const uint64_t c = rng.below(uint64_t(2 * d));
      x[c >> 1] += (c & 1) ? -1 : 1;
      out.insert(x);
    }
  }
  std::vector<Point> v(out.begin(), out.end());
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<PsiStep> psi_growth(double u, const Point& x, int64_t T, int k, int d, Stream& rng) {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  if (k < 1 || k > d - 2) throw std::invalid_argument("iteration count must lie in [1, d-2]");
  std::unordered_set<Point, PointHash> first{x};
  Point y = x;
  for (int64_t s = 0; s < T; ++s) {
    const uint64_t c = rng.below(uint64_t(2 * d));
    y[c >> 1] += (c & 1) ? -1 : 1;
    first.insert(y);
  }
  std::vector<Point> U(first.begin(), first.end());
  std::sort(U.begin(), U.end());
  std::vector<PsiStep> out;
  auto record = [&](int it, int64_t walks) {
    PsiStep st;
    st.iteration = it;
    st.size = int64_t(U.size());
    st.capacity = equilibrium(U, d).capacity;
    for (const Point& p : U) st.extent = std::max(st.extent, norm_inf(sub(p, x), d));
    st.walks = walks;
    out.push_back(st);
  };
  record(1, 1);
  for (int it = 2; it <= k; ++it) {
    int64_t walks = 0;
    U = psi(u, U, T, d, rng, &walks);
    record(it, walks);
  }
  return out;
}

void save_trajectories(const InterlacementSample& s, const std::string& path) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw std::runtime_error("cannot open " + path + " for writing");
  auto put = [&](const void* p, size_t n) { o.write(static_cast<const char*>(p), std::streamsize(n)); };
  put("ITL1", 4);
  const uint32_t version = 1;
  const uint8_t d = uint8_t(s.d);
  const uint64_t n = s.trajectories.size();
  put(&version, 4);
  put(&d, 1);
  put(&s.u, 8);
  put(&n, 8);
  for (const Trajectory& t : s.trajectories) {
    put(&t.label, 8);
    put(&t.hold_seed, 8);
    put(&t.hold_stream, 8);
    const uint32_t np = uint32_t(t.pieces.size());
    put(&np, 4);
    for (const TrajectoryPiece& p : t.pieces) {
      put(p.start.data(), 8 * size_t(s.d));
      const uint64_t ns = p.steps.size();
      put(&ns, 8);
      put(p.steps.data(), p.steps.size());
    }
  }
  if (!o) throw std::runtime_error("write failed for " + path);
  nlohmann::json m = {{"format", "ITL1"}, {"u", s.u},        {"capacity", s.capacity}, {"seed", s.seed},
                      {"stream", s.stream}, {"halo_factor", s.halo_factor}, {"trajectories", n}};
  std::vector<int64_t> lo(s.window.lo().begin(), s.window.lo().begin() + s.d);
  std::vector<int64_t> hi(s.window.hi().begin(), s.window.hi().begin() + s.d);
  m["window_lo"] = lo;
  m["window_hi"] = hi;
  std::ofstream(path + ".json") << m.dump(2) << "\n";
}

InterlacementSample load_trajectories(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  auto get = [&](void* p, size_t n) {
    in.read(static_cast<char*>(p), std::streamsize(n));
    if (!in) throw std::runtime_error("truncated trajectory file " + path);
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "ITL1", 4) != 0) throw std::runtime_error("bad magic in " + path);
  uint32_t version;
  uint8_t d;
  uint64_t n;
  get(&version, 4);
  if (version != 1) throw std::runtime_error("unsupported trajectory file version");
  InterlacementSample s;
  get(&d, 1);
  s.d = d;
  get(&s.u, 8);
  get(&n, 8);
  for (uint64_t i = 0; i < n; ++i) {
    Trajectory t;
    get(&t.label, 8);
    get(&t.hold_seed, 8);
    get(&t.hold_stream, 8);
    uint32_t np;
    get(&np, 4);
    for (uint32_t j = 0; j < np; ++j) {
      TrajectoryPiece p;
      get(p.start.data(), 8 * size_t(d));
      uint64_t ns;
      get(&ns, 8);
      p.steps.resize(ns);
      get(p.steps.data(), ns);
      t.pieces.push_back(std::move(p));
    }
    s.trajectories.push_back(std::move(t));
  }
  std::ifstream mj(path + ".json");
  if (mj) {
    const nlohmann::json m = nlohmann::json::parse(mj);
    s.capacity = m.value("capacity", 0.0);
    s.seed = m.value("seed", uint64_t(0));
    s.stream = m.value("stream", uint64_t(0));
    s.halo_factor = m.value("halo_factor", 4.0);
    if (m.contains("window_lo")) {
      const auto lo = m["window_lo"].get<std::vector<int64_t>>();
      const auto hi = m["window_hi"].get<std::vector<int64_t>>();
      Point l{}, h{};
      for (int a = 0; a < d; ++a) {
        l[a] = lo[size_t(a)];
        h[a] = hi[size_t(a)];
      }
      s.window = Box(d, l, h);
      s.key = dilate(s.window, 1);
    }
  }
  return s;
}

}  // namespace cgff
