#include <doctest.h>

#include <cmath>

#include "cgff/perc.hpp"

using namespace cgff;

TEST_SUITE("perc") {
  TEST_CASE("cluster labels on a hand-made configuration") {
    const Box box = make_box(3, {4, 3, 3});
    VertexField f = zero_field(box);
    for (auto& v : f.values) v = -1.0;
    for (int64_t x = 0; x < 4; ++x) f.values[size_t(box.index(make_point({x, 1, 1})))] = 1.0;
    f.values[size_t(box.index(make_point({0, 0, 0})))] = 2.0;
    const ClusterLabeling cl = label_clusters(vertex_level_set(f, 0.5));
    CHECK(cl.crossing[0] == 1);
    CHECK(cl.crossing[1] == 0);
    CHECK(cl.largest == 4);
    CHECK(cl.sizes.size() == 2);
    CHECK(cl.label[size_t(box.index(make_point({0, 2, 2})))] == -1);
    CHECK(label_clusters(vertex_level_set(f, 1.5)).crossing[0] == 0);
  }

  TEST_CASE("lattice crossing threshold against direct labelling") {
    const Box box = make_box(3, {6, 6, 6});
    for (int r = 0; r < 10; ++r) {
      Stream rng(40, uint64_t(r));
      const VertexField f = sample_gff(box, rng);
      Stream es(41, uint64_t(r));
      const double t = crossing_threshold(f, box, false, es);
      REQUIRE(std::isfinite(t));
      CHECK(label_clusters(vertex_level_set(f, t)).crossing[0] == 1);
      CHECK(label_clusters(vertex_level_set(f, std::nextafter(t, 10.0))).crossing[0] == 0);
    }
  }

  TEST_CASE("cable crossing threshold against the cable level set") {
    const Box box = make_box(3, {6, 5, 5});
    for (int r = 0; r < 10; ++r) {
      Stream rng(50, uint64_t(r));
      const VertexField f = sample_gff(box, rng);
      Stream e1(51, uint64_t(r)), e2(51, uint64_t(r)), e3(51, uint64_t(r));
      const double t = crossing_threshold(f, box, true, e1);
      REQUIRE(std::isfinite(t));
      const auto U = edge_uniforms(box, e2);
      // cable set {phi >= -h} at h = -t
      CHECK(label_clusters(cable_level_set(f, -t + 1e-9, U)).crossing[0] == 1);
      CHECK(label_clusters(cable_level_set(f, -t - 1e-9, U)).crossing[0] == 0);
      const auto bits = crosses_at(f, box, true, {t - 1e-9, t + 1e-9}, e3);
      CHECK(bits[0] == 1);
      CHECK(bits[1] == 0);
    }
  }

  TEST_CASE("cable edge threshold inverts the bridge probability") {
    for (auto [a, b, U] : std::vector<std::tuple<double, double, double>>{{0.3, -0.1, 0.4}, {-0.2, -0.5, 0.9}, {1.0, 0.8, 0.05}}) {
      const double h = cable_edge_threshold(a, b, U);
      CHECK(bridge_stays_above(lattice_edge(a, b), -(h + 1e-7)) > U);
      CHECK(bridge_stays_above(lattice_edge(a, b), -(h - 1e-7)) <= U);
    }
  }

  TEST_CASE("crossing point of two curves") {
    std::vector<double> h, s, l;
    for (int k = 0; k <= 10; ++k) {
      h.push_back(0.1 * k);
      s.push_back(0.8 - 0.6 * h.back());
      l.push_back(1.1 - 1.2 * h.back());
    }
    const auto x = curve_crossing(h, s, l);
    REQUIRE(x);
    CHECK(*x == doctest::Approx(0.5));
    CHECK_FALSE(curve_crossing(h, l, l));
    CHECK(estimate_pc(0.0, 3) == doctest::Approx(0.5));
  }

  TEST_CASE("direct and threshold paths of the crossing curve agree") {
    const std::vector<double> hs = {0.0, 0.2, 0.4, 0.6};
    CrossingOptions o;
    const CrossingTable a = crossing_curve(3, {8}, hs, 20, PercMode::lattice, 5, o);
    const CrossingTable b = crossing_curve(3, {8}, {0.0, 0.2, 0.4}, 20, PercMode::lattice, 5, o);
    CHECK(a.thresholds.size() == 1);
    CHECK(b.thresholds.empty());
    for (size_t k = 0; k < 3; ++k) CHECK(a.at(0, k).crossing.events == b.at(0, k).crossing.events);
  }

  TEST_CASE("flip events on fixtures") {
    FlipBoundary b;
    b.d = 3;
    b.b = {0.1, 0.2, -0.1, 0.0, 0.3, 5.0};
    const std::vector<double> U(6, 0.0);
    const FlipEvents out = flip_events(b, 0.05, 3.0, 0.2, U);
    CHECK_FALSE(out.all_within_K);
    CHECK_FALSE(out.E);
    CHECK_FALSE(out.G);
    b.b[5] = 0.0;
    const FlipEvents in = flip_events(b, 0.05, 3.0, 0.2, U);
    CHECK(in.E);
    CHECK(in.G);  // U = 0 opens every bridge whose probability is positive
  }

  TEST_CASE("flip probability of G against simulation") {
    Stream brng(60, 0);
    const FlipBoundary b = sample_flip_boundary(3, brng);
    const double h = 0.3, K = 3.0;
    const double exact = flip_prob_G(b, h, K);
    Stream rng(61, 0);
    RunningStats G;
    std::vector<double> U(b.b.size());
    const double sd = std::sqrt(sigma0_sq(3));
    for (int i = 0; i < 40000; ++i) {
      const double phi = b.beta() + sd * rng.normal();
      for (double& x : U) x = rng.uniform();
      G.add(flip_events(b, h, K, phi, U).G);
    }
    CHECK(std::abs(G.mean() - exact) <= 4.0 * G.std_error() + 1e-9);
  }

  TEST_CASE("shared uniform pair is monotone") {
    for (double Y = 0.01; Y < 1.0; Y += 0.07) {
      const auto [f, g] = shared_uniform_pair(0.3, 0.6, Y);
      if (f) CHECK(g);
    }
  }

  TEST_CASE("truncated level sets sit inside the plain ones") {
    Stream rng(70, 0);
    const VertexField f = sample_gff(make_box(3, {6, 6, 6}), rng);
    const OpenConfig a = vertex_level_set(f, 0.1), t = truncated_level_set(f, 0.1, 0.4);
    for (size_t i = 0; i < a.vertex_open.size(); ++i) {
      if (t.vertex_open[i]) CHECK(a.vertex_open[i]);
    }
  }
}
