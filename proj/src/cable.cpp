#include "cgff/cable.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cgff {

double bridge_sup_tail(const BridgeSpec& b, double M) {
  if (!(b.l > 0.0 && b.sigma2 > 0.0)) throw std::invalid_argument("bridge needs l > 0 and sigma2 > 0");
  if (M < std::max(b.x, b.y)) throw std::invalid_argument("sup tail needs M >= max(x, y)");
  return std::exp(-2.0 * (M - b.x) * (M - b.y) / b.variance_scale());
}

double bridge_stays_above(const BridgeSpec& b, double level) {
  if (!(b.l > 0.0 && b.sigma2 > 0.0)) throw std::invalid_argument("bridge needs l > 0 and sigma2 > 0");
  if (b.x <= level || b.y <= level) return 0.0;
  return -std::expm1(-2.0 * (b.x - level) * (b.y - level) / b.variance_scale());
}

double bridge_interval_prob(const BridgeSpec& b, double lo, double hi) {
  if (!(b.l > 0.0 && b.sigma2 > 0.0)) throw std::invalid_argument("bridge needs l > 0 and sigma2 > 0");
  if (!(hi > lo)) return 0.0;
  if (b.x < lo || b.x > hi || b.y < lo || b.y > hi) return 0.0;
  if (std::isinf(lo) && std::isinf(hi)) return 1.0;
  if (std::isinf(hi)) return bridge_stays_above(b, lo);
  if (std::isinf(lo)) return bridge_stays_above({-b.x, -b.y, b.l, b.sigma2}, -hi);
  const double v = b.variance_scale();
  const double W = hi - lo;
  const double dx = b.y - b.x;
  const double ax = b.x - lo, ay = b.y - lo;
  // killed density by images, divided by the free density
  double s = 1.0 - std::exp(-2.0 * ax * ay / v);
  for (int k = 1; k < 10000; ++k) {
    const double kw = k * W;
    const double t1 = std::exp(-2.0 * kw * (kw + dx) / v) + std::exp(-2.0 * kw * (kw - dx) / v);
    const double t2 = std::exp(-2.0 * (kw + ax) * (kw + ay) / v) + std::exp(-2.0 * (ax - kw) * (ay - kw) / v);
    s += t1 - t2;
    if (t1 + t2 < 1e-12) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

double bridge_band_prob(const BridgeSpec& b, double a) {
  if (a <= 0.0) return 0.0;
  if (std::isinf(a)) return 1.0;
  return bridge_interval_prob(b, -a, a);
}

std::vector<double> discretize_bridge(const BridgeSpec& b, int m, Stream& rng) {
  if (m < 2) throw std::invalid_argument("bridge mesh needs m >= 2");
  std::vector<double> path(static_cast<size_t>(m));
  path[0] = b.x;
  path[size_t(m - 1)] = b.y;
  const double dt = b.l / double(m - 1);
  for (int i = 1; i < m - 1; ++i) {
    const double rest = b.l - dt * double(i - 1);  // time left from t_{i-1}
    const double prev = path[size_t(i - 1)];
    const double mean = prev + (b.y - prev) * dt / rest;
    const double var = b.sigma2 * dt * (rest - dt) / rest;
    path[size_t(i)] = mean + std::sqrt(var) * rng.normal();
  }
  return path;
}

double truncation_K(double h, const TruncationConstants& c) {
  if (!(h > 0.0)) throw std::invalid_argument("K(h) needs h > 0");
  const double arg = c.C0 / std::pow(h, c.c0);
  if (!(arg > 1.0)) throw std::invalid_argument("K(h) needs C0 / h^c0 > 1, got " + std::to_string(arg));
  return std::sqrt(std::log(arg));
}

double TruncationLevels::theta_lower_bound() const {
  const double b = band();
  if (b <= 0.0) return 0.0;
  return 1.0 - 2.0 * std::exp(-2.0 * b * b);
}

TruncationLevels truncation_levels(double h, double u, const TruncationConstants& c) {
  if (!(c.C0 > 0 && c.c0 > 0 && c.C1 > 0 && c.c1 > 0 && c.C1p > 0 && c.c1p > 0)) {
    throw std::invalid_argument("truncation constants must be positive");
  }
  if (!(u > 0.0)) throw std::invalid_argument("truncation levels need u > 0");
  TruncationLevels lv;
  lv.h = h;
  lv.u = u;
  lv.constants = c;
  lv.K = truncation_K(h, c);
  const double karg = c.C1 / std::pow(u, c.c1);
  if (!(karg > 1.0)) throw std::invalid_argument("Ktilde(u) needs C1 / u^c1 > 1");
  lv.Ktilde = std::sqrt(std::log(karg));
  const double q = c.C1p * std::pow(u, c.c1p);
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("p(u) must lie in (0,1)");
  lv.p = 1.0 - q;
  lv.condition_holds = lv.K >= lv.Ktilde + std::sqrt(-0.5 * std::log(q / 2.0));
  return lv;
}

CableEdgeState sample_edge_marks(double phi_x, double phi_y, const TruncationLevels& lv, Stream& rng, int mesh) {
  CableEdgeState st;
  st.phi_x = phi_x;
  st.phi_y = phi_y;
  const BridgeSpec b = lattice_edge(phi_x, phi_y);
  st.p_stays_above = bridge_stays_above(b, -lv.h);
  st.p_within_K = bridge_band_prob(b, lv.K);
  st.p_theta = bridge_band_prob(lattice_edge(0.0, 0.0), lv.band());
  const double u_shared = rng.uniform();
  st.theta = u_shared < st.p_theta;
  const bool nested = std::abs(phi_x) <= lv.Ktilde && std::abs(phi_y) <= lv.Ktilde;
  // On the nested region P(theta) <= P(within_K), so the shared uniform keeps theta => within_K.
  st.within_K = nested ? u_shared < std::max(st.p_within_K, st.p_theta) : rng.uniform() < st.p_within_K;
  st.stays_above = rng.uniform() < st.p_stays_above;
  if (mesh >= 2) st.path = discretize_bridge(b, mesh, rng);
  return st;
}

}  // namespace cgff
