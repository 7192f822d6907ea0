#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "cgff/renorm.hpp"
#include "oracles.hpp"

using namespace cgff;

namespace {

// Probability that some pair of true children sits at l-inf distance >= sep,
// by enumeration of every subset of the l0^d children.
double brute_pair_probability(int d, int64_t l0, int64_t sep, double p) {
  std::vector<Point> cells;
  Point c{};
  const int64_t n = int64_t(std::pow(double(l0), d));
  for (int64_t i = 0; i < n; ++i) {
    int64_t r = i;
    for (int a = 0; a < d; ++a) {
      c[a] = r % l0;
      r /= l0;
    }
    cells.push_back(c);
  }
  double total = 0.0;
  for (uint64_t S = 0; S < (uint64_t(1) << n); ++S) {
    bool hit = false;
    for (int64_t i = 0; i < n && !hit; ++i) {
      if (!(S >> i & 1)) continue;
      for (int64_t j = i + 1; j < n && !hit; ++j) {
        if (S >> j & 1) hit = norm_inf(sub(cells[size_t(i)], cells[size_t(j)]), d) >= sep;
      }
    }
    if (!hit) continue;
    const int k = __builtin_popcountll(S);
    total += std::pow(p, k) * std::pow(1.0 - p, double(n - k));
  }
  return total;
}

}  // namespace

TEST_SUITE("renorm") {
  TEST_CASE("reference scales") {
    CHECK(reference_shell_count(3) == 321);
    CHECK(reference_ld(3) == 1284);
    CHECK(reference_l0(3) == 5136);
    CHECK(reference_ld(2) == 324);
    const ScaleSystem s = build_scales(3, 1, 2);
    CHECK(s.l0 == 5136);
    CHECK(s.L[2] == 5136 * 5136);
    CHECK(s.separation() == 4);
    CHECK(s.shells_fit());
    CHECK(s.pigeonhole_guaranteed());
  }

  TEST_CASE("one-step recursion against subset enumeration") {
    for (double p : {0.01, 0.1, 0.3, 0.7}) {
      ScaleSystem s = build_scales(2, 1, 1, std::make_pair<int64_t, int64_t>(4, 2));
      CHECK(iid_recursion_step(p, s) == doctest::Approx(brute_pair_probability(2, 4, 2, p)).epsilon(1e-12));
      s = build_scales(3, 1, 1, std::make_pair<int64_t, int64_t>(2, 2));
      CHECK(iid_recursion_step(p, s) == doctest::Approx(brute_pair_probability(3, 2, 1, p)).epsilon(1e-12));
      s = build_scales(2, 1, 1, std::make_pair<int64_t, int64_t>(4, 3));
      CHECK(iid_recursion_step(p, s) == doctest::Approx(brute_pair_probability(2, 4, 2, p)).epsilon(1e-12));
    }
    // separation 4 would need children 4 apart in a cell of side 4
    CHECK_THROWS(build_scales(2, 1, 1, std::make_pair<int64_t, int64_t>(4, 1)));
    // small p keeps relative precision: the leading term is (#far pairs) p^2
    const ScaleSystem s = build_scales(2, 1, 1, std::make_pair<int64_t, int64_t>(4, 2));
    const double p = 1e-9;
    CHECK(iid_recursion_step(p, s) / (p * p) == doctest::Approx(brute_pair_probability(2, 4, 2, p) / (p * p)).epsilon(1e-6));
    CHECK_THROWS(iid_recursion_step(1.5, s));
  }

  TEST_CASE("recursive evaluation and witnesses") {
    const ScaleSystem s = build_scales(2, 1, 2, std::make_pair<int64_t, int64_t>(4, 2));
    CoarseConfig c;
    c[make_point({0, 0})] = kFamC;
    c[make_point({2, 1})] = kFamC | kFamD;
    c[make_point({1, 1})] = kFamD;  // D children at distance 1 only
    c[make_point({0, 5})] = kFamE;  // parent (0, 1)
    c[make_point({4, 5})] = kFamE;  // parent (1, 1)
    const auto lv = eval_levels(c, s, 2);
    REQUIRE(lv.size() == 3);
    CHECK(lv[0].bad == c);
    REQUIRE(lv[1].bad.size() == 1);
    CHECK(lv[1].bad.at(make_point({0, 0})) == kFamC);
    REQUIRE(lv[1].witnesses.size() == 1);
    const Witness& w = lv[1].witnesses[0];
    CHECK(validate_witness(w, c, s));
    Witness bad = w;
    bad.family = 2;  // D: both children present but (0,0) lacks D
    CHECK_FALSE(validate_witness(bad, c, s));
    bad = w;
    bad.x2 = make_point({1, 1});
    CHECK_FALSE(validate_witness(bad, c, s));
    bad = w;
    bad.x = make_point({1, 0});
    CHECK_FALSE(validate_witness(bad, c, s));
    CHECK(lv[2].bad.empty());

    // far children across distinct level-1 cells of the same level-2 cell
    CoarseConfig c2;
    c2[make_point({0, 0})] = kFamF;
    c2[make_point({2, 0})] = kFamF;
    c2[make_point({8, 0})] = kFamF;
    c2[make_point({10, 0})] = kFamF;
    const auto lv2 = eval_levels(c2, s, 2);
    CHECK(lv2[1].bad.size() == 2);
    CHECK(lv2[2].bad.at(make_point({0, 0})) == kFamF);
    for (const Witness& x : lv2[2].witnesses) CHECK(validate_witness(x, lv2[1].bad, s));
    CHECK_THROWS(eval_recursive(c2, s, 0));
  }

  TEST_CASE("bad star path matches a fixpoint reachability oracle") {
    Stream rng(70, 0);
    int found = 0, none = 0;
    for (int t = 0; t < 600; ++t) {
      const int64_t half = 2 + int64_t(rng.below(5));  // up to 13 x 13
      PlanarGrid g(half);
      const double p = 0.35 + 0.4 * rng.uniform();
      for (auto& b : g.bad) b = rng.uniform() < p;
      const int64_t nn = 1 + int64_t(rng.below(uint64_t(half)));
      const int64_t m = int64_t(rng.below(uint64_t(nn)));
      const auto path = find_bad_star_path(g, m, nn);
      const bool expect = oracle::star_reachable(g, m, nn);
      REQUIRE(path.has_value() == expect);
      if (!path) {
        ++none;
        continue;
      }
      ++found;
      const auto& P = *path;
      REQUIRE(!P.empty());
      CHECK(std::max(std::abs(P.front().first), std::abs(P.front().second)) <= m);
      CHECK(std::max(std::abs(P.back().first), std::abs(P.back().second)) == nn);
      for (size_t k = 0; k < P.size(); ++k) {
        CHECK(g.at(P[k].first, P[k].second));
        CHECK(std::max(std::abs(P[k].first), std::abs(P[k].second)) <= nn);
        if (k) CHECK(std::max(std::abs(P[k].first - P[k - 1].first), std::abs(P[k].second - P[k - 1].second)) == 1);
      }
    }
    CHECK(found > 50);
    CHECK(none > 50);
  }

  TEST_CASE("bad star circuit matches a separation oracle") {
    PlanarGrid g(6);
    for (int64_t i = -3; i <= 3; ++i) {
      g.at(i, 3) = g.at(i, -3) = g.at(3, i) = g.at(-3, i) = 1;
    }
    CHECK(bad_star_circuit(g, 1, 5));
    CHECK_FALSE(find_bad_star_path(g, 1, 5).has_value());
    g.at(3, 0) = 0;  // gap closed diagonally by (2, 0)
    g.at(2, 0) = 1;
    CHECK(bad_star_circuit(g, 1, 5));
    g.at(2, 0) = 0;
    CHECK_FALSE(bad_star_circuit(g, 1, 5));
    CHECK_FALSE(bad_star_circuit(g, 3, 4));

    Stream rng(71, 0);
    int yes = 0, no = 0;
    for (int t = 0; t < 400; ++t) {
      const int64_t half = 3 + int64_t(rng.below(4));
      PlanarGrid r(half);
      const double p = 0.45 + 0.35 * rng.uniform();
      for (auto& b : r.bad) b = rng.uniform() < p;
      const int64_t nn = 3 + int64_t(rng.below(uint64_t(half - 2)));
      const int64_t m = int64_t(rng.below(uint64_t(nn - 1)));
      const bool got = bad_star_circuit(r, m, nn);
      REQUIRE(got == oracle::surrounding_component(r, m, nn));
      (got ? yes : no)++;
    }
    CHECK(yes > 20);
    CHECK(no > 20);
  }

  TEST_CASE("cascade on random bad paths agrees with the recursive evaluation") {
    const ScaleSystem s = build_scales(2, 1, 1);
    REQUIRE(s.shells_fit());
    for (int i = 0; i < 3; ++i) {
      Stream rng(72, uint64_t(i));
      const CoarseConfig bad0 = random_bad_path(s, 1, 50, rng);
      const CascadeResult res = cascade_witness(bad0, s, 1, Point{});
      REQUIRE(res.status == CascadeResult::Status::witness);
      CHECK(res.path_length > 0);
      const auto lv = eval_levels(bad0, s, 1);
      const auto it = lv[1].bad.find(res.x0);
      REQUIRE(it != lv[1].bad.end());
      CHECK((it->second >> res.family & 1));
      CHECK(norm_inf(sub(res.z1, res.z2), 2) * s.ld >= s.l0);
    }
  }

  TEST_CASE("cascade refuses without a crossing path") {
    const ScaleSystem s = build_scales(2, 1, 1);
    const CascadeResult r = cascade_witness(CoarseConfig{}, s, 1, Point{});
    CHECK(r.status == CascadeResult::Status::refused);
    CHECK(r.reason.find("no bad") != std::string::npos);
    CHECK(cascade_witness(CoarseConfig{}, s, 2, Point{}).status == CascadeResult::Status::refused);
    ScaleSystem tiny = build_scales(2, 1, 1, std::make_pair<int64_t, int64_t>(4, 2));
    CHECK(tiny.shells == 1);
    tiny.shells = 5;
    CHECK(cascade_witness(CoarseConfig{}, tiny, 1, Point{}).reason.find("shells") != std::string::npos);
  }

  TEST_CASE("iid decay against the exact recursion") {
    DecayOptions o;
    o.kind = SeedKind::iid;
    o.d = 2;
    o.l0 = 4;
    o.ld = 2;
    o.q = 0.1;
    o.n_max = 2;
    o.replicas = 300;
    o.seed = 9;
    const DecayReport rep = renorm_decay_experiment(o);
    const std::vector<double> ex = iid_recursion(0.1, rep.scales, 2);
    REQUIRE(rep.rows.size() == 3);
    for (const DecayRow& row : rep.rows) {
      REQUIRE(row.exact.has_value());
      CHECK(*row.exact == doctest::Approx(ex[size_t(row.n)]));
      CHECK(std::abs(row.z) < 4.5);
    }
  }
}
