#include <doctest.h>

#include <cmath>

#include "cgff/cable.hpp"
#include "cgff/stats.hpp"

using namespace cgff;

TEST_SUITE("cable") {
  TEST_CASE("sup tail of the lattice edge bridge") {
    CHECK(bridge_sup_tail({0.0, 0.0, 0.5, 2.0}, 1.0) == doctest::Approx(std::exp(-2.0)));
    CHECK(bridge_sup_tail(lattice_edge(0.3, -0.2), 0.3) == doctest::Approx(1.0));
    CHECK_THROWS(bridge_sup_tail(lattice_edge(0.5, 0.0), 0.2));
  }

  TEST_CASE("staying above a level") {
    const double h = 0.3;
    CHECK(bridge_stays_above(lattice_edge(0.0, 0.0), -h) == doctest::Approx(1.0 - std::exp(-2.0 * h * h)));
    CHECK(bridge_stays_above(lattice_edge(-0.5, 1.0), -0.2) == 0.0);
    // quarter edges have half the variance
    CHECK(bridge_stays_above(quarter_edge(0.0, 0.0), -h) == doctest::Approx(1.0 - std::exp(-4.0 * h * h)));
  }

  TEST_CASE("band probability is the Kolmogorov distribution for the standard bridge") {
    // l * sigma2 = 1 for lattice edges
    for (double a : {0.4, 0.6, 0.9, 1.3, 2.0}) {
      CHECK(bridge_band_prob(lattice_edge(0.0, 0.0), a) == doctest::Approx(1.0 - kolmogorov_q(a)).epsilon(1e-8));
    }
  }

  TEST_CASE("interval probability limits") {
    const BridgeSpec b = lattice_edge(0.2, -0.1);
    CHECK(bridge_interval_prob(b, -0.5, 50.0) == doctest::Approx(bridge_stays_above(b, -0.5)).epsilon(1e-12));
    CHECK(bridge_interval_prob(b, -INFINITY, INFINITY) == 1.0);
    CHECK(bridge_interval_prob(b, 0.0, 1.0) == 0.0);
    double prev = 0.0;
    for (double a = 0.25; a < 3.0; a += 0.25) {
      const double p = bridge_band_prob(b, a);
      CHECK(p >= prev);
      prev = p;
    }
  }

  TEST_CASE("band series against discretised bridges") {
    // the discrete path misses excursions, so it overestimates staying inside
    const BridgeSpec b = lattice_edge(0.1, -0.2);
    const double exact = bridge_band_prob(b, 0.7);
    RunningStats in;
    for (int i = 0; i < 4000; ++i) {
      Stream rng(8, uint64_t(i));
      const auto path = discretize_bridge(b, 513, rng);
      bool ok = true;
      for (double v : path) ok = ok && std::abs(v) <= 0.7;
      in.add(ok);
    }
    CHECK(in.mean() >= exact - 3.0 * in.std_error());
    CHECK(in.mean() <= exact + 3.0 * in.std_error() + 0.03);
  }

  TEST_CASE("discretised bridge hits its endpoints") {
    Stream rng(1, 1);
    const auto p = discretize_bridge(lattice_edge(0.7, -0.4), 17, rng);
    CHECK(p.size() == 17);
    CHECK(p.front() == 0.7);
    CHECK(p.back() == -0.4);
  }

  TEST_CASE("truncation levels") {
    const TruncationLevels lv = truncation_levels(0.02, 0.01);
    CHECK(lv.K == doctest::Approx(std::sqrt(std::log(100.0 / (0.02 * 0.02)))));
    CHECK(lv.Ktilde == doctest::Approx(std::sqrt(std::log(100.0 / 0.01))));
    CHECK(lv.p == doctest::Approx(1.0 - 0.5 * 0.01));
    CHECK(lv.condition_holds == (lv.K >= lv.Ktilde + std::sqrt(-0.5 * std::log((1.0 - lv.p) / 2.0))));
    CHECK_THROWS(truncation_K(0.0));
    CHECK_THROWS(truncation_K(20.0));
  }

  TEST_CASE("edge marks: marginals and the theta implication") {
    const TruncationLevels lv = truncation_levels(1e-4, 0.02);
    RunningStats above;
    const double px = 0.2, py = -0.05;
    int64_t implication_checked = 0;
    for (int i = 0; i < 20000; ++i) {
      Stream rng(4, uint64_t(i));
      const CableEdgeState st = sample_edge_marks(px, py, lv, rng);
      above.add(st.stays_above);
      if (st.theta && std::abs(px) <= lv.Ktilde && std::abs(py) <= lv.Ktilde) {
        CHECK(st.within_K);
        ++implication_checked;
      }
    }
    CHECK(implication_checked > 0);
    const double p = bridge_stays_above(lattice_edge(px, py), -lv.h);
    CHECK(std::abs(above.mean() - p) <= 4.0 * above.std_error());
  }
}
