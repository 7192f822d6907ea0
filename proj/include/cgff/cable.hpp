#pragma once

#include <optional>
#include <vector>

#include "cgff/lattice.hpp"
#include "cgff/rng.hpp"

namespace cgff {

// Brownian bridge of length l from x to y, driven by a Brownian motion of
// variance sigma2 at time 1. Lattice edges: l = 1/2, sigma2 = 2.
struct BridgeSpec {
  double x = 0.0;
  double y = 0.0;
  double l = 0.5;
  double sigma2 = 2.0;
  double variance_scale() const { return l * sigma2; }
};

inline BridgeSpec lattice_edge(double x, double y) { return {x, y, 0.5, 2.0}; }
inline BridgeSpec quarter_edge(double x, double y) { return {x, y, 0.25, 2.0}; }

// P(sup B >= M) = exp(-2 (M-x)(M-y) / (l sigma2)). Requires M >= max(x,y).
double bridge_sup_tail(const BridgeSpec& b, double M);
// P(inf B > level) = 1 - exp(-2 (x-level)(y-level) / (l sigma2)); 0 if an endpoint is at or below level.
double bridge_stays_above(const BridgeSpec& b, double level);
// P(lo <= B_t <= hi for all t) by the alternating image series, truncated at 1e-12.
double bridge_interval_prob(const BridgeSpec& b, double lo, double hi);
// P(|B_t| <= a for all t).
double bridge_band_prob(const BridgeSpec& b, double a);

// Values at m equally spaced times including both endpoints, exact Gaussian bridge marginals.
std::vector<double> discretize_bridge(const BridgeSpec& b, int m, Stream& rng);

struct TruncationConstants {
  double C0 = 100.0;
  double c0 = 2.0;
  double C1 = 100.0;
  double c1 = 1.0;
  double C1p = 0.5;
  double c1p = 1.0;
};

struct TruncationLevels {
  double h = 0.0;
  double K = 0.0;       // sqrt(log(C0 / h^c0))
  double u = 0.0;
  double Ktilde = 0.0;  // sqrt(log(C1 / u^c1))
  double p = 0.0;       // 1 - C1' u^c1'
  TruncationConstants constants;
  bool condition_holds = false;  // K >= Ktilde + sqrt(-log((1-p)/2)/2)
  double band() const { return K - Ktilde; }
  // Lower bound 1 - 2 exp(-2 band^2) on the theta success rate.
  double theta_lower_bound() const;
};

TruncationLevels truncation_levels(double h, double u, const TruncationConstants& c = {});
double truncation_K(double h, const TruncationConstants& c = {});

struct CableEdgeState {
  Edge edge;
  double phi_x = 0.0;
  double phi_y = 0.0;
  double p_stays_above = 0.0;  // stays above -h
  double p_within_K = 0.0;     // |phi| <= K(h) along the edge
  double p_theta = 0.0;        // zero-endpoint bridge within K(h) - Ktilde(u)
  bool stays_above = false;
  bool within_K = false;
  bool theta = false;
  std::optional<std::vector<double>> path;
};

// Marks for one lattice edge given its endpoint values. Each mark has its
// exact marginal probability. theta and within_K share one uniform so that
// theta = 1 forces within_K whenever both endpoints are within Ktilde(u),
// which is the implication the coupling relies on.
CableEdgeState sample_edge_marks(double phi_x, double phi_y, const TruncationLevels& lv, Stream& rng,
                                 int mesh = 0);

}  // namespace cgff
