#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <Eigen/Dense>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>

#include "cgff/greens.hpp"

using namespace cgff;

namespace {

// Expected visits to x: int_0^inf prod_a e^{-t/3} I_{x_a}(t/3) dt (continuous-time walk, rate 1).
double visits_bessel(const Point& x) {
  struct P {
    int n[3];
  } p{{int(std::abs(x[0])), int(std::abs(x[1])), int(std::abs(x[2]))}};
  gsl_function F;
  F.function = [](double t, void* v) {
    const auto* q = static_cast<const P*>(v);
    double r = 1.0;
    for (int n : q->n) r *= gsl_sf_bessel_In_scaled(n, t / 3.0);
    return r;
  };
  F.params = &p;
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(2000);
  double res = 0.0, err = 0.0;
  gsl_integration_qagiu(&F, 0.0, 1e-12, 1e-11, 2000, w, &res, &err);
  gsl_integration_workspace_free(w);
  return res;
}

}  // namespace

TEST_SUITE("greens") {
  TEST_CASE("g(0) against the Bessel integral") {
    const double G0 = visits_bessel(Point{});
    CHECK(G0 == doctest::Approx(1.5163860592).epsilon(1e-9));
    CHECK(visits_zd(Point{}, 3) == doctest::Approx(G0).epsilon(1e-8));
    CHECK(green_zd(Point{}, 3) == doctest::Approx(G0 / 6.0).epsilon(1e-8));
    CHECK(green_zd(Point{}, 3) == doctest::Approx(0.252731009859).epsilon(1e-9));
  }

  TEST_CASE("off-diagonal values against the Bessel integral") {
    for (const Point& x : {make_point({1, 0, 0}), make_point({1, 1, 0}), make_point({2, 1, 1}), make_point({3, 0, 2})}) {
      CHECK(visits_zd(x, 3) == doctest::Approx(visits_bessel(x)).epsilon(1e-7));
    }
  }

  TEST_CASE("(2d - A) g = delta") {
    const auto g = GreenTable::get(3, 6);
    for (const Point& x : {make_point({0, 0, 0}), make_point({1, 0, 0}), make_point({2, 3, 1})}) {
      double lap = 6.0 * (*g)(x);
      for (int a = 0; a < 3; ++a) {
        for (int s : {-1, 1}) {
          Point y = x;
          y[size_t(a)] += s;
          lap -= (*g)(y);
        }
      }
      CHECK(lap == doctest::Approx(x == Point{} ? 1.0 : 0.0).epsilon(1e-7));
    }
  }

  TEST_CASE("table is symmetric and matches direct quadrature") {
    const auto g = GreenTable::get(3, 5);
    CHECK((*g)(make_point({1, -2, 3})) == doctest::Approx((*g)(make_point({3, 1, 2}))));
    CHECK((*g)(make_point({4, 1, 0})) == doctest::Approx(green_zd(make_point({4, 1, 0}), 3)).epsilon(1e-7));
    CHECK(g->estimated_error() <= g->tolerance());
  }

  TEST_CASE("table save and load") {
    const auto g = GreenTable::get(3, 4);
    const auto path = (std::filesystem::temp_directory_path() / "cgff_green_test.grn").string();
    g->save(path);
    const GreenTable h = GreenTable::load(path);
    CHECK(h.radius() == g->radius());
    CHECK(h(make_point({3, 2, 1})) == (*g)(make_point({3, 2, 1})));
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".json");
  }

  TEST_CASE("capacities of small sets") {
    const double g0 = green_zd(Point{}, 3), g1 = green_zd(make_point({1, 0, 0}), 3);
    CHECK(equilibrium({Point{}}, 3).capacity == doctest::Approx(1.0 / g0));
    const EquilibriumMeasure two = equilibrium({Point{}, make_point({1, 0, 0})}, 3);
    CHECK(two.capacity == doctest::Approx(2.0 / (g0 + g1)));
    CHECK(two.capacity == doctest::Approx(5.90326869).epsilon(1e-8));
    CHECK(two.residual < 1e-8);
  }

  TEST_CASE("equilibrium of a cube lives on the inner boundary") {
    std::vector<Point> A;
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 3; ++j)
        for (int64_t k = 0; k < 3; ++k) A.push_back(make_point({i, j, k}));
    const EquilibriumMeasure em = equilibrium(A, 3);
    for (size_t i = 0; i < A.size(); ++i) {
      if (A[i] == make_point({1, 1, 1})) CHECK(em.weights[i] == 0.0);
    }
    CHECK(em.residual < 1e-6);
    // monotone in the set
    CHECK(em.capacity > equilibrium({Point{}, make_point({1, 0, 0})}, 3).capacity);
  }

  TEST_CASE("equilibrium with enclosed holes") {
    // hollow 3x3x3 shell: the centre is a hole, its neighbours have no escape through it
    std::vector<Point> A;
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 3; ++j)
        for (int64_t k = 0; k < 3; ++k)
          if (!(i == 1 && j == 1 && k == 1)) A.push_back(make_point({i, j, k}));
    const EquilibriumMeasure em = equilibrium(A, 3);
    double full = 0.0;
    for (double w : em.weights) CHECK(w >= 0.0);
    for (double w : em.weights) full += w;
    CHECK(full == doctest::Approx(em.capacity));
  }

  TEST_CASE("killed Green function against a dense inverse") {
    std::vector<Point> U;
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 2; ++j) U.push_back(make_point({i, j, 0}));
    const KilledGreen kg(3, U);
    const long n = long(U.size());
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) * 6.0;
    for (long a = 0; a < n; ++a)
      for (long b = 0; b < n; ++b)
        if (norm1(sub(U[size_t(a)], U[size_t(b)]), 3) == 1) P(a, b) = -1.0;
    const Eigen::MatrixXd G = P.inverse();
    for (long a = 0; a < n; ++a)
      for (long b = 0; b < n; ++b) CHECK(kg(U[size_t(a)], U[size_t(b)]) == doctest::Approx(G(a, b)).epsilon(1e-10));
    CHECK(killed_green(3, {Point{}}, Point{}, Point{}) == doctest::Approx(1.0 / 6.0));
  }

  TEST_CASE("quarter-edge conditional variance") {
    CHECK(sigma0_sq(3) == doctest::Approx(1.0 / 12.0));
    CHECK(sigma0_sq(4) == doctest::Approx(1.0 / 16.0));
    CHECK_THROWS(sigma0_sq(2));
  }

  TEST_CASE("cached tables do not depend on earlier requests") {
    const auto a = GreenTable::get(3, 20);
    const double v = (*a)(make_point({3, 1, 2}));
    const auto big = GreenTable::get(3, 60);
    const auto b = GreenTable::get(3, 20);
    CHECK(b == a);
    CHECK(b->radius() == 24);
    CHECK((*b)(make_point({3, 1, 2})) == v);
    CHECK(big->radius() >= 60);
  }
}
