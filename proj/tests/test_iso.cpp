#include <doctest.h>

#include <cmath>

#include "cgff/iso.hpp"

using namespace cgff;

TEST_SUITE("iso") {
  TEST_CASE("unvisited edges: bridge of gamma avoiding zero") {
    for (auto [a, b] : std::vector<std::pair<double, double>>{{0.3, 0.2}, {1.1, 0.05}, {-0.4, -0.7}}) {
      const double via_bridge =
          a > 0 ? bridge_stays_above(lattice_edge(a, b), 0.0) : bridge_stays_above(lattice_edge(-a, -b), 0.0);
      CHECK(positivity_edge_prob(0.0, a, 0.0, b) == doctest::Approx(via_bridge));
    }
    CHECK(positivity_edge_prob(0.0, 0.3, 0.0, -0.2) == 0.0);
  }

  TEST_CASE("visited endpoint: continuity and symmetry") {
    CHECK(positivity_edge_prob(1e-14, 0.4, 0.0, 0.3) == doctest::Approx(positivity_edge_prob(0.0, 0.4, 0.0, 0.3)));
    CHECK(positivity_edge_prob(1e-14, 0.4, 0.0, -0.3) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(positivity_edge_prob(0.7, 0.1, 0.0, -0.3) == doctest::Approx(positivity_edge_prob(0.0, -0.3, 0.7, 0.1)));
    const double p = positivity_edge_prob(0.7, 0.1, 0.0, -0.3);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
    CHECK_THROWS(positivity_edge_prob(0.1, 0.0, 0.2, 0.0));
  }

  TEST_CASE("sign rule output satisfies the identity and positivity on the trace") {
    const Box window = make_box(3, {5, 5, 5});
    for (int r = 0; r < 5; ++r) {
      Stream rng(31, uint64_t(r));
      const InterlacementSample s = sample_interlacement(window, 1.0, 4.0, rng);
      const VertexField gamma = GreenFieldSampler::get(window)->sample(rng);
      const IsoTriple t = couple_sign_rule(s, gamma, rng);
      CHECK(t.identity_error() < 1e-12);
      CHECK(t.min_shifted_on_occupied() > 0.0);
      // the sign is constant on every component
      for (int64_t i = 0; i < window.size(); ++i) {
        for (int64_t j = 0; j < window.size(); ++j) {
          if (t.component[size_t(i)] == t.component[size_t(j)]) CHECK(t.sign[size_t(i)] == t.sign[size_t(j)]);
        }
      }
    }
  }

  TEST_CASE("moment identity at small sample size") {
    const MomentComparison m = verify_iso_moments(3, 1.0, 3000, 7);
    CHECK(m.expected_mean == doctest::Approx(1.126366).epsilon(1e-6));
    CHECK(std::abs(m.lhs_mean_z) <= 4.0);
    CHECK(std::abs(m.mean_z) <= 4.0);
    const double g0 = green_zd(Point{}, 3);
    CHECK(m.expected_variance == doctest::Approx(g0 * g0 / 2 + 2 * g0));
  }

  TEST_CASE("theta coupling keeps the implication and the lower bound") {
    TruncationConstants c;
    const TruncationLevels lv = truncation_levels(1e-4, 0.02, c);
    REQUIRE(lv.condition_holds);
    Stream rng(3, 3);
    const VertexField phi = sample_gff(make_box(3, {8, 8, 8}), rng);
    const ThetaField th = theta_coupling(phi, lv, rng);
    CHECK(th.implication_violations == 0);
    CHECK(th.nested_edges > 0);
    const double se = std::sqrt(th.lower_bound * (1 - th.lower_bound) / double(th.edges)) + 1e-9;
    CHECK(th.rate() >= th.lower_bound - 4.0 * se);
    const TruncationLevels bad = truncation_levels(0.9, 0.02, c);
    REQUIRE_FALSE(bad.condition_holds);
    CHECK_THROWS(theta_coupling(phi, bad, rng));
  }
}
