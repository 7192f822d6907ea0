#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cgff/cable.hpp"
#include "cgff/gff.hpp"
#include "cgff/interlace.hpp"
#include "cgff/stats.hpp"

namespace cgff {

// (phi, gamma, ell) on a common window with 1/2 (phi + sqrt(2u))^2 = ell + 1/2 gamma^2.
struct IsoTriple {
  int d = 3;
  double u = 0.0;
  VertexField phi;
  VertexField gamma;
  LocalTimes ell;
  std::vector<uint8_t> occupied;
  std::vector<int64_t> component;  // union-find root per vertex
  std::vector<int8_t> sign;        // sign of phi + sqrt(2u)
  int64_t open_edges = 0;
  int64_t zero_gamma = 0;          // vertices with gamma == 0, sign drawn fresh
  std::string provenance = "sampled: ell, gamma; derived: phi";

  double identity_error() const;
  // min over occupied vertices of phi + sqrt(2u); +inf when nothing is occupied
  double min_shifted_on_occupied() const;
};

// Probability that the cable edge between x and y lies in {2 ell + gamma^2 > 0}
// when the edge is not traversed. l_x, l_y are the vertex local times.
double positivity_edge_prob(double l_x, double g_x, double l_y, double g_y);

// phi = sigma_C sqrt(2 ell + gamma^2) - sqrt(2u): sigma_C = +1 on components
// meeting the occupied set, sign of gamma elsewhere.
IsoTriple couple_sign_rule(const LocalTimes& ell, const std::vector<uint8_t>& occupied,
                           const std::vector<uint8_t>& trace, const VertexField& gamma, double u, Stream& rng);
IsoTriple couple_sign_rule(const InterlacementSample& s, const VertexField& gamma, Stream& rng);

struct MomentComparison {
  RunningStats lhs, rhs;
  double lhs_var = 0.0, lhs_var_se = 0.0;
  double rhs_var = 0.0, rhs_var_se = 0.0;
  double mean_z = 0.0;
  double var_z = 0.0;
  double expected_mean = 0.0;      // u + g(0)/2
  double expected_variance = 0.0;  // g(0)^2/2 + 2 u g(0)
  double lhs_mean_z = 0.0;         // lhs against expected_mean
  KsResult ks;
};

struct IsoMomentOptions {
  int64_t window_side = 1;  // deep vertex = centre of this cube
  double halo_factor = 16.0;
  int threads = 1;
};

// ell_x + gamma_x^2/2 (independent samples) against (phi_x + sqrt(2u))^2/2 at the window centre.
MomentComparison verify_iso_moments(int d, double u, int replicas, uint64_t seed, const IsoMomentOptions& opt = {});

struct SignRuleCheck {
  RunningStats phi;     // at the window centre
  double variance = 0.0, variance_se = 0.0;
  double g0 = 0.0;
  double mean_z = 0.0, var_z = 0.0;
  KsResult ks;          // against N(0, g(0))
  int64_t occupied_violations = 0;  // occupied vertices with phi <= -sqrt(2u)
  int64_t occupied_vertices = 0;
  double max_identity_error = 0.0;
};

SignRuleCheck sign_rule_marginal(int d, double u, int64_t window_side, int replicas, uint64_t seed,
                                 double halo_factor = 4.0, int threads = 1);

struct ThetaField {
  Box box;
  std::vector<uint8_t> theta;     // index vertex * d + axis
  std::vector<uint8_t> within_K;
  int64_t edges = 0;
  int64_t successes = 0;
  int64_t nested_edges = 0;       // both endpoints within Ktilde(u)
  int64_t implication_violations = 0;
  double lower_bound = 0.0;
  TruncationLevels levels;
  double rate() const { return edges ? double(successes) / double(edges) : 0.0; }
};

// Edge Bernoulli field theta from band marks; refuses constants violating the band condition.
ThetaField theta_coupling(const VertexField& phi, const TruncationLevels& levels, Stream& rng);

}  // namespace cgff
