#include "cgff/iso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "cgff/parallel.hpp"
#include "cgff/union_find.hpp"

namespace cgff {

double IsoTriple::identity_error() const {
  const double s = std::sqrt(2.0 * u);
  double err = 0.0;
  for (size_t i = 0; i < phi.values.size(); ++i) {
    const double lhs = 0.5 * (phi.values[i] + s) * (phi.values[i] + s);
    const double rhs = ell.values[i] + 0.5 * gamma.values[i] * gamma.values[i];
    err = std::max(err, std::abs(lhs - rhs));
  }
  return err;
}

double IsoTriple::min_shifted_on_occupied() const {
  const double s = std::sqrt(2.0 * u);
  double m = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < phi.values.size(); ++i) {
    if (occupied[i]) m = std::min(m, phi.values[i] + s);
  }
  return m;
}

double positivity_edge_prob(double l_x, double g_x, double l_y, double g_y) {
  if (l_x > 0.0 && l_y > 0.0) throw std::invalid_argument("edge prob defined for at most one visited endpoint");
  if (l_y > 0.0) {
    std::swap(l_x, l_y);
    std::swap(g_x, g_y);
  }
  if (l_x > 0.0) {
    const double a = std::sqrt(2.0 * l_x + g_x * g_x);
    return -std::expm1(-std::abs(g_y) * a - g_x * g_y);
  }
  if (g_x * g_y <= 0.0) return 0.0;
  return -std::expm1(-2.0 * g_x * g_y);
}

IsoTriple couple_sign_rule(const LocalTimes& ell, const std::vector<uint8_t>& occupied,
                           const std::vector<uint8_t>& trace, const VertexField& gamma, double u, Stream& rng) {
  const Box& box = gamma.box;
  const int d = box.dim();
  const int64_t n = box.size();
  if (!(ell.window == box) || int64_t(occupied.size()) != n || int64_t(trace.size()) != n * d) {
    throw std::invalid_argument("local times, occupation and gamma must share one window");
  }
  if (!(u > 0.0)) throw std::invalid_argument("u must be positive");
  IsoTriple t;
  t.d = d;
  t.u = u;
  t.gamma = gamma;
  t.ell = ell;
  t.occupied = occupied;
  UnionFind uf(n);
  for_each_edge(box, [&](int64_t i, int64_t j, int a) {
    const bool oi = occupied[size_t(i)], oj = occupied[size_t(j)];
    if (oi && oj) {
      // both endpoints already carry sign +; traversal only matters for bookkeeping
      if (trace[size_t(i * d + a)]) {
        uf.unite(i, j);
        ++t.open_edges;
      }
      return;
    }
    const double p = positivity_edge_prob(ell.values[size_t(i)], gamma.values[size_t(i)], ell.values[size_t(j)],
                                          gamma.values[size_t(j)]);
    if (p > 0.0 && rng.uniform() < p) {
      uf.unite(i, j);
      ++t.open_edges;
    }
  });
  std::vector<int8_t> root_sign(size_t(n), 0);
  for (int64_t i = 0; i < n; ++i) {
    if (occupied[size_t(i)]) root_sign[size_t(uf.find(i))] = 1;
  }
  for (int64_t i = 0; i < n; ++i) {
    const int64_t r = uf.find(i);
    if (root_sign[size_t(r)] == 0) {
      const double g = gamma.values[size_t(i)];
      if (g == 0.0) {
        ++t.zero_gamma;
        continue;
      }
      root_sign[size_t(r)] = g > 0.0 ? 1 : -1;
    }
  }
  t.component.resize(size_t(n));
  t.sign.resize(size_t(n));
  t.phi.box = box;
  t.phi.seed = gamma.seed;
  t.phi.stream = gamma.stream;
  t.phi.sampler = "sign-rule";
  t.phi.boundary = gamma.boundary;
  t.phi.values.resize(size_t(n));
  const double s = std::sqrt(2.0 * u);
  for (int64_t i = 0; i < n; ++i) {
    const int64_t r = uf.find(i);
    if (root_sign[size_t(r)] == 0) root_sign[size_t(r)] = rng.uniform() < 0.5 ? 1 : -1;
    t.component[size_t(i)] = r;
    t.sign[size_t(i)] = root_sign[size_t(r)];
    const double g = gamma.values[size_t(i)];
    t.phi.values[size_t(i)] = t.sign[size_t(i)] * std::sqrt(2.0 * ell.values[size_t(i)] + g * g) - s;
  }
  return t;
}

IsoTriple couple_sign_rule(const InterlacementSample& s, const VertexField& gamma, Stream& rng) {
  return couple_sign_rule(local_time_field(s), occupied_set(s), edge_trace(s), gamma, s.u, rng);
}

namespace {

Box centred_cube(int d, int64_t side) {
  Point lo{}, hi{};
  for (int a = 0; a < d; ++a) {
    lo[a] = -(side / 2);
    hi[a] = lo[a] + side;
  }
  return Box(d, lo, hi);
}

}  // namespace

MomentComparison verify_iso_moments(int d, double u, int replicas, uint64_t seed, const IsoMomentOptions& opt) {
  if (!(u > 0.0)) throw std::invalid_argument("u must be positive");
  if (replicas < 2) throw std::invalid_argument("need at least two replicas");
  const Box win = centred_cube(d, opt.window_side);
  const auto sampler = InterlacementSampler::get(win, opt.halo_factor);
  const auto gauss = GreenFieldSampler::get(win);
  const int64_t centre = win.index(Point{});
  const double s = std::sqrt(2.0 * u);
  std::vector<double> lhs(static_cast<size_t>(replicas)), rhs(static_cast<size_t>(replicas));
  parallel_for(replicas, opt.threads, [&](int64_t r) {
    Stream rng(seed, uint64_t(r));
    Stream ls = rng.split(0), gs = rng.split(1), ps = rng.split(2);
    const LocalTimes lt = local_time_field(sampler->sample(u, ls));
    std::vector<double> g, p;
    gauss->sample_into(gs, g);
    gauss->sample_into(ps, p);
    const double gc = g[size_t(centre)], pc = p[size_t(centre)];
    lhs[size_t(r)] = lt.values[size_t(centre)] + 0.5 * gc * gc;
    rhs[size_t(r)] = 0.5 * (pc + s) * (pc + s);
  });
  MomentComparison m;
  for (int r = 0; r < replicas; ++r) {
    m.lhs.add(lhs[size_t(r)]);
    m.rhs.add(rhs[size_t(r)]);
  }
  const double g0 = green_zd(Point{}, d);
  m.expected_mean = u + 0.5 * g0;
  m.expected_variance = 0.5 * g0 * g0 + 2.0 * u * g0;
  m.mean_z = two_mean_z(m.lhs, m.rhs);
  m.lhs_mean_z = (m.lhs.mean() - m.expected_mean) / m.lhs.std_error();
  m.lhs_var = m.lhs.variance();
  m.rhs_var = m.rhs.variance();
  m.lhs_var_se = variance_std_error(lhs);
  m.rhs_var_se = variance_std_error(rhs);
  m.var_z = (m.lhs_var - m.rhs_var) / std::hypot(m.lhs_var_se, m.rhs_var_se);
  m.ks = ks_two_sample(std::move(lhs), std::move(rhs));
  return m;
}

SignRuleCheck sign_rule_marginal(int d, double u, int64_t window_side, int replicas, uint64_t seed,
                                 double halo_factor, int threads) {
  if (replicas < 2) throw std::invalid_argument("need at least two replicas");
  const Box win = centred_cube(d, window_side);
  const auto sampler = InterlacementSampler::get(win, halo_factor);
  const auto gauss = GreenFieldSampler::get(win);
  const int64_t centre = win.index(Point{});
  struct Out {
    double phi = 0.0, err = 0.0;
    int64_t viol = 0, occ = 0;
  };
  std::vector<Out> out(static_cast<size_t>(replicas));
  parallel_for(replicas, threads, [&](int64_t r) {
    Stream rng(seed, uint64_t(r));
    Stream ls = rng.split(0), gs = rng.split(1), cs = rng.split(2);
    const InterlacementSample is = sampler->sample(u, ls);
    const VertexField g = gauss->sample(gs);
    const IsoTriple t = couple_sign_rule(is, g, cs);
    Out o;
    o.phi = t.phi.values[size_t(centre)];
    o.err = t.identity_error();
    const double sh = std::sqrt(2.0 * u);
    for (size_t i = 0; i < t.occupied.size(); ++i) {
      if (!t.occupied[i]) continue;
      ++o.occ;
      if (!(t.phi.values[i] > -sh)) ++o.viol;
    }
    out[size_t(r)] = o;
  });
  SignRuleCheck c;
  c.g0 = green_zd(Point{}, d);
  std::vector<double> phis;
  phis.reserve(out.size());
  for (const Out& o : out) {
    c.phi.add(o.phi);
    phis.push_back(o.phi);
    c.occupied_violations += o.viol;
    c.occupied_vertices += o.occ;
    c.max_identity_error = std::max(c.max_identity_error, o.err);
  }
  c.variance = c.phi.variance();
  c.variance_se = variance_std_error(phis);
  c.mean_z = c.phi.mean() / c.phi.std_error();
  c.var_z = (c.variance - c.g0) / c.variance_se;
  const double sd = std::sqrt(c.g0);
  c.ks = ks_one_sample(std::move(phis), [sd](double x) { return normal_cdf(x / sd); });
  return c;
}

ThetaField theta_coupling(const VertexField& phi, const TruncationLevels& lv, Stream& rng) {
  if (!lv.condition_holds) {
    throw std::invalid_argument("truncation constants violate K(h) >= Ktilde(u) + sqrt(-log((1-p)/2)/2): K=" +
                                std::to_string(lv.K) + " Ktilde=" + std::to_string(lv.Ktilde) +
                                " p=" + std::to_string(lv.p));
  }
  const Box& box = phi.box;
  const int d = box.dim();
  ThetaField t;
  t.box = box;
  t.levels = lv;
  t.lower_bound = lv.theta_lower_bound();
  t.theta.assign(size_t(box.size() * d), 0);
  t.within_K.assign(size_t(box.size() * d), 0);
  for_each_edge(box, [&](int64_t i, int64_t j, int a) {
    const double x = phi.values[size_t(i)], y = phi.values[size_t(j)];
    const CableEdgeState st = sample_edge_marks(x, y, lv, rng);
    const size_t e = size_t(i * d + a);
    t.theta[e] = st.theta;
    t.within_K[e] = st.within_K;
    ++t.edges;
    t.successes += st.theta;
    if (std::abs(x) <= lv.Ktilde && std::abs(y) <= lv.Ktilde) {
      ++t.nested_edges;
      if (st.theta && !st.within_K) ++t.implication_violations;
    }
  });
  return t;
}

}  // namespace cgff
