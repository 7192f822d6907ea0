#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cgff/interlace.hpp"

using namespace cgff;

TEST_SUITE("interlace") {
  TEST_CASE("alias table reproduces its weights") {
    const std::vector<double> w = {0.1, 0.0, 2.0, 0.9, 1.0};
    const AliasTable t(w);
    std::vector<int64_t> hits(w.size(), 0);
    Stream rng(3, 0);
    const int n = 200000;
    for (int i = 0; i < n; ++i) ++hits[t.sample(rng)];
    CHECK(hits[1] == 0);
    for (size_t i = 0; i < w.size(); ++i) {
      const double p = w[i] / 4.0;
      CHECK(std::abs(double(hits[i]) / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
    }
  }

  TEST_CASE("cube exit law: total mass and a random-walk oracle") {
    const int d = 3, w = 2;
    const auto law = CubeExitLaw::get(d, w);
    CHECK(law->total_mass() == doctest::Approx(1.0).epsilon(1e-10));
    // face centre: all off-axis coordinates zero
    const int n = 2 * w + 1;
    const double p_centre = 2.0 * d * law->face_weights()[size_t(w * n + w)];
    int64_t walk_hits = 0, law_hits = 0;
    const int trials = 40000;
    Stream rng(17, 0);
    for (int i = 0; i < trials; ++i) {
      Point x{};
      while (norm_inf(x, d) <= w) {
        const uint64_t c = rng.below(6);
        x[c >> 1] += (c & 1) ? -1 : 1;
      }
      walk_hits += norm1(x, d) == w + 1;
      const Point y = law->sample(rng);
      CHECK(norm_inf(y, d) == w + 1);
      law_hits += norm1(y, d) == w + 1;
    }
    const double se = std::sqrt(p_centre * (1 - p_centre) / trials);
    CHECK(std::abs(double(walk_hits) / trials - p_centre) <= 4.0 * se);
    CHECK(std::abs(double(law_hits) / trials - p_centre) <= 4.0 * se);
  }

  TEST_CASE("mean local time equals u") {
    const Box window = make_box(3, {3, 3, 3});
    const auto sampler = InterlacementSampler::get(window, 4.0);
    RunningStats avg;
    for (int r = 0; r < 400; ++r) {
      Stream rng(21, uint64_t(r));
      const LocalTimes lt = local_time_field(sampler->sample(0.5, rng));
      double s = 0.0;
      for (double v : lt.values) s += v;
      avg.add(s / double(lt.values.size()));
    }
    CHECK(std::abs(avg.mean() - 0.5) <= 4.0 * avg.std_error());
  }

  TEST_CASE("thinning and superposition") {
    const Box window = make_box(3, {3, 3, 3});
    const auto sampler = InterlacementSampler::get(window, 4.0);
    Stream rng(2, 2);
    const InterlacementSample s = sampler->sample(2.0, rng);
    const InterlacementSample t = s.restrict_to(0.7);
    CHECK(t.u == 0.7);
    for (const auto& tr : t.trajectories) CHECK(tr.label <= 0.7);
    CHECK(t.trajectories.size() <= s.trajectories.size());
    CHECK_THROWS(s.restrict_to(3.0));
    const InterlacementSample m = merge(t, s);
    CHECK(m.u == doctest::Approx(2.7));
    CHECK(m.trajectories.size() == t.trajectories.size() + s.trajectories.size());
    // local times of a thinned sample never exceed the full ones
    const LocalTimes a = local_time_field(s), b = local_time_field(t);
    for (size_t i = 0; i < a.values.size(); ++i) CHECK(b.values[i] <= a.values[i] + 1e-12);
  }

  TEST_CASE("occupied set and edge trace are consistent") {
    const Box window = make_box(3, {4, 4, 4});
    Stream rng(5, 5);
    const InterlacementSample s = sample_interlacement(window, 1.0, 4.0, rng);
    const LocalTimes lt = local_time_field(s);
    const auto occ = occupied_set(s);
    const auto tr = edge_trace(s);
    for (int64_t i = 0; i < window.size(); ++i) CHECK(bool(occ[size_t(i)]) == (lt.values[size_t(i)] > 0.0));
    for (int64_t i = 0; i < window.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        if (!tr[size_t(i * 3 + a)]) continue;
        const int64_t j = window.neighbor(i, a, +1);
        REQUIRE(j >= 0);
        CHECK(occ[size_t(i)]);
        CHECK(occ[size_t(j)]);
      }
    }
  }

  TEST_CASE("trajectory dump round trip") {
    const Box window = make_box(3, {3, 3, 3});
    Stream rng(6, 1);
    const InterlacementSample s = sample_interlacement(window, 1.0, 4.0, rng);
    const auto path = (std::filesystem::temp_directory_path() / "cgff_traj.itl").string();
    save_trajectories(s, path);
    const InterlacementSample t = load_trajectories(path);
    CHECK(t.trajectories.size() == s.trajectories.size());
    CHECK(local_time_field(t).values == local_time_field(s).values);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
  }

  TEST_CASE("hitting probabilities") {
    const auto sampler = InterlacementSampler::get(make_box(3, {2, 2, 2}), 4.0);
    CHECK(sampler->hit_probability(make_point({0, 0, 0})) == doctest::Approx(1.0).epsilon(1e-8));
    const double far = sampler->hit_probability(make_point({40, 0, 0}));
    CHECK(far > 0.0);
    CHECK(far < sampler->hit_probability(make_point({10, 0, 0})));
  }

  TEST_CASE("Laplace transform closed form") {
    CHECK(laplace_exact({}, 1.0, 3).value == 1.0);
    const std::vector<std::pair<Point, double>> tiny = {{Point{}, 1e-6}, {make_point({1, 0, 0}), 2e-6}};
    CHECK(std::log(laplace_exact(tiny, 0.8, 3).value) == doctest::Approx(0.8 * 3e-6).epsilon(1e-5));
    // single site: exp(u V / (1 - g0 V))
    const double g0 = green_zd(Point{}, 3), V = 0.5;
    CHECK(laplace_exact({{Point{}, V}}, 1.3, 3).value == doctest::Approx(std::exp(1.3 * V / (1 - g0 * V))));
    CHECK_THROWS(laplace_exact({{Point{}, 5.0}}, 1.0, 3));
  }

  TEST_CASE("connectivity at low intensity") {
    const Box window(3, make_point({-2, -2, -2}), make_point({7, 7, 7}));
    Stream rng(1, 0);
    const InterlacementSample s = sample_interlacement(window, 1e-9, 4.0, rng);
    CHECK(s.trajectories.empty());
    CHECK_FALSE(connectivity_fails(s, 4, 1));
    CHECK_THROWS(connectivity_fails(s, 4, 3));
  }

  TEST_CASE("psi growth bookkeeping") {
    Stream rng(9, 0);
    const auto steps = psi_growth(1.0, Point{}, 50, 1, 3, rng);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].size >= 2);
    CHECK(steps[0].extent <= 50);
    CHECK(steps[0].capacity >= 1.0 / green_zd(Point{}, 3) - 1e-9);
    CHECK_THROWS(psi_growth(1.0, Point{}, 50, 2, 3, rng));
    std::vector<Point> A = {Point{}};
    int64_t walks = 0;
    const auto B = psi(2.0, A, 10, 3, rng, &walks);
    CHECK(B.size() >= 1);
    CHECK(std::find(B.begin(), B.end(), Point{}) != B.end());
  }
}
