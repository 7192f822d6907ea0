#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "cgff/gff.hpp"
#include "cgff/greens.hpp"

using namespace cgff;

namespace {
std::string tmp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }
}  // namespace

TEST_SUITE("gff") {
  TEST_CASE("spectral covariance matches the killed Green function") {
    const Box box = make_box(3, {3, 3, 3});
    const SpectralSampler s(box);
    const int n = 20000;
    std::vector<VertexField> fs;
    fs.reserve(n);
    for (int i = 0; i < n; ++i) {
      Stream rng(11, uint64_t(i));
      fs.push_back(s.sample(rng));
    }
    const std::vector<Point> U = box_points(box);
    const KilledGreen kg(3, U);
    const int64_t c = box.index(make_point({1, 1, 1}));
    std::vector<std::pair<int64_t, int64_t>> pairs;
    for (int64_t j = 0; j < box.size(); ++j) pairs.emplace_back(c, j);
    const auto cov = empirical_covariance(fs, pairs);
    for (size_t k = 0; k < pairs.size(); ++k) {
      const double exact = kg(box.point(c), box.point(pairs[k].second));
      // 27 entries: 4 se keeps the family-wise false alarm rate below 0.2%
      CHECK(std::abs(cov[k].value - exact) <= 4.0 * cov[k].std_error);
    }
  }

  TEST_CASE("spectral and dense samplers agree in law") {
    const Box box = make_box(3, {4, 3, 3});
    const SpectralSampler s(box);
    const int64_t c = box.index(make_point({2, 1, 1}));
    std::vector<double> a, b;
    for (int i = 0; i < 4000; ++i) {
      Stream r1(3, uint64_t(i)), r2(4, uint64_t(i));
      a.push_back(s.sample(r1)[c]);
      b.push_back(sample_gff_dense(box, r2)[c]);
    }
    CHECK(ks_two_sample(a, b).p_value > 0.001);
  }

  TEST_CASE("same stream, same field") {
    const Box box = make_box(3, {5, 4, 3});
    Stream r1(9, 2), r2(9, 2);
    CHECK(sample_gff(box, r1).values == sample_gff(box, r2).values);
  }

  TEST_CASE("infinite-volume sampler has variance g(0)") {
    const Box box = make_box(3, {2, 2, 2});
    const auto s = GreenFieldSampler::get(box);
    RunningStats v, cov;
    for (int i = 0; i < 20000; ++i) {
      Stream rng(5, uint64_t(i));
      const VertexField f = s->sample(rng);
      v.add(f[0] * f[0]);
      cov.add(f[0] * f[box.index(make_point({1, 0, 0}))]);
    }
    CHECK(std::abs(v.mean() - green_zd(Point{}, 3)) <= 4.0 * v.std_error());
    CHECK(std::abs(cov.mean() - green_zd(make_point({1, 0, 0}), 3)) <= 4.0 * cov.std_error());
  }

  TEST_CASE("Markov split: harmonic part and bulk") {
    const Box box = make_box(3, {6, 6, 6});
    Stream rng(1, 1);
    const VertexField f = sample_gff(box, rng);
    std::vector<int64_t> U;
    for (int64_t i = 0; i < box.size(); ++i) {
      const Point p = box.point(i);
      bool inner = true;
      for (int a = 0; a < 3; ++a) inner = inner && p[size_t(a)] >= 2 && p[size_t(a)] <= 3;
      if (inner) U.push_back(i);
    }
    const MarkovSplit ms = markov_split(f, U);
    CHECK(ms.residual < 1e-10);
    for (int64_t i = 0; i < box.size(); ++i) {
      CHECK(ms.beta[i] + ms.bulk[i] == doctest::Approx(f[i]).epsilon(1e-12));
    }
    for (int64_t i : U) {
      double lap = 6.0 * ms.beta[i];
      for (int a = 0; a < 3; ++a) {
        for (int s : {-1, 1}) {
          const int64_t j = box.neighbor(i, a, s);
          if (j >= 0) lap -= ms.beta[j];
        }
      }
      CHECK(std::abs(lap) < 1e-9);
    }
    Stream r2(2, 2);
    const VertexField cs = conditional_sample(f, U, r2);
    for (int64_t i = 0; i < box.size(); ++i) {
      if (std::find(U.begin(), U.end(), i) == U.end()) CHECK(cs[i] == f[i]);
    }
  }

  TEST_CASE("field file round trip is bit-identical") {
    const Box box = make_box(3, {8, 8, 8});
    Stream rng(42, 0);
    VertexField f = sample_gff(box, rng);
    const std::string p = tmp_path("cgff_field_rt.gff");
    save_field(f, p);
    const VertexField g = load_field(p);
    CHECK(g.box == f.box);
    CHECK(std::memcmp(g.values.data(), f.values.data(), f.values.size() * sizeof(double)) == 0);
    CHECK(g.seed == f.seed);
    std::filesystem::remove(p);
    std::filesystem::remove(p + ".json");
  }

  TEST_CASE("corrupted and truncated field files are refused") {
    const Box box = make_box(3, {3, 3, 3});
    Stream rng(1, 0);
    const std::string p = tmp_path("cgff_field_bad.gff");
    save_field(sample_gff(box, rng), p);
    {
      std::fstream io(p, std::ios::in | std::ios::out | std::ios::binary);
      io.seekp(0);
      io.write("XFF1", 4);
    }
    CHECK_THROWS_WITH(load_field(p), doctest::Contains("magic"));
    save_field(sample_gff(box, rng), p);
    std::filesystem::resize_file(p, std::filesystem::file_size(p) - 5);
    CHECK_THROWS_WITH(load_field(p), doctest::Contains("truncated"));
    std::filesystem::remove(p);
    std::filesystem::remove(p + ".json");
  }

  TEST_CASE("little-endian bytes decode on any host") {
    const std::string p = tmp_path("cgff_field_le.gff");
    std::vector<unsigned char> bytes = {'G', 'F', 'F', '1', 1, 0, 0, 0, 3};
    auto put64 = [&](uint64_t v) {
      for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
    };
    for (int a = 0; a < 3; ++a) put64(1);
    uint64_t bits;
    const double value = -1.25;
    std::memcpy(&bits, &value, 8);
    put64(bits);
    {
      std::ofstream o(p, std::ios::binary);
      o.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    }
    std::filesystem::remove(p + ".json");
    const VertexField f = load_field(p);
    CHECK(f.box.size() == 1);
    CHECK(f[0] == -1.25);
    std::filesystem::remove(p);
  }
}
