#include <doctest.h>

#include <set>

#include "cgff/lattice.hpp"

using namespace cgff;

TEST_SUITE("lattice") {
  TEST_CASE("index and point are inverse") {
    const Box b(3, make_point({-2, 0, 1}), make_point({1, 4, 3}));
    CHECK(b.size() == 3 * 4 * 2);
    for (int64_t i = 0; i < b.size(); ++i) {
      const Point p = b.point(i);
      CHECK(b.contains(p));
      CHECK(b.index(p) == i);
      for (int a = 0; a < 3; ++a) CHECK(b.coord(i, a) == p[size_t(a)]);
    }
  }

  TEST_CASE("neighbours stop at the faces") {
    const Box b = make_box(3, {3, 3, 3});
    const int64_t corner = b.index(make_point({0, 0, 0}));
    CHECK(b.neighbor(corner, 0, -1) == -1);
    CHECK(b.neighbor(corner, 2, +1) == b.index(make_point({0, 0, 1})));
    const int64_t far = b.index(make_point({2, 2, 2}));
    CHECK(b.neighbor(far, 1, +1) == -1);
  }

  TEST_CASE("edge count matches enumeration") {
    const Box b = make_box(3, {2, 3, 4});
    // sum over axes of (n_a - 1) * prod_{b != a} n_b
    const int64_t expected = 1 * 3 * 4 + 2 * 2 * 4 + 2 * 3 * 3;
    CHECK(edge_count(b) == expected);
    CHECK(int64_t(edges(b).size()) == expected);
    int64_t seen = 0;
    for_each_edge(b, [&](int64_t x, int64_t y, int axis) {
      CHECK(x < y);
      CHECK(y - x == b.stride(axis));
      ++seen;
    });
    CHECK(seen == expected);
  }

  TEST_CASE("planar boxes are rejected") {
    CHECK_THROWS_WITH_AS(make_box(2, {4, 4}), doctest::Contains("transien"), std::invalid_argument);
  }

  TEST_CASE("dilate and l-inf distance") {
    const Box b = make_box(3, {2, 2, 2});
    const Box g = dilate(b, 3);
    CHECK(g.side(0) == 8);
    CHECK(g.lo()[0] == -3);
    CHECK(dist_inf(b, make_point({1, 1, 1})) == 0);
    CHECK(dist_inf(b, make_point({5, 0, -2})) == 4);
  }

  TEST_CASE("slab and centred boxes") {
    const Box s = slab_box(10, 4, 3);
    CHECK(s.side(0) == 10);
    CHECK(s.side(1) == 10);
    CHECK(s.side(2) == 4);
    const Box c = make_box_centered(3, 2);
    CHECK(c.size() == 125);
    CHECK(c.contains(make_point({-2, 2, 0})));
  }

  TEST_CASE("cable distance") {
    const Box b = make_box(3, {4, 4, 4});
    const CablePoint o = vertex_point(make_point({0, 0, 0}));
    const CablePoint far = vertex_point(make_point({2, 1, 0}));
    CHECK(cable_distance(b, o, far) == doctest::Approx(1.5));
    const CablePoint mid{Edge{make_point({0, 0, 0}), 0}, 0.25};
    CHECK(cable_distance(b, o, mid) == doctest::Approx(0.25));
    const CablePoint other{Edge{make_point({1, 1, 0}), 1}, 0.1};
    // through (1,1,0): 0.5 (to (1,0,0)) + 0.5 + 0.1
    CHECK(cable_distance(b, o, other) == doctest::Approx(1.1));
    CHECK_THROWS(cable_distance(b, o, CablePoint{Edge{make_point({0, 0, 0}), 0}, 0.7}));
  }

  TEST_CASE("point hash separates neighbours") {
    std::set<size_t> hs;
    const Box b = make_box(3, {5, 5, 5});
    for (int64_t i = 0; i < b.size(); ++i) hs.insert(PointHash{}(b.point(i)));
    CHECK(hs.size() == size_t(b.size()));
  }
}
