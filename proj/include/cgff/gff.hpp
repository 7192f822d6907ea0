#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "cgff/lattice.hpp"
#include "cgff/rng.hpp"
#include "cgff/stats.hpp"

namespace cgff {

struct VertexField {
  Box box;
  std::vector<double> values;
  uint64_t seed = 0;
  uint64_t stream = 0;
  std::string sampler;
  std::string boundary = "dirichlet-zero";

  double operator[](int64_t i) const { return values[size_t(i)]; }
  double& operator[](int64_t i) { return values[size_t(i)]; }
  double at(const Point& p) const { return values[size_t(box.index(p))]; }
};

VertexField zero_field(const Box& box);

// FFTW planning is not thread-safe; every planner call takes this lock.
std::mutex& fftw_planner_mutex();

// Exact sampler for the zero-boundary field on a rectangular box via the
// discrete sine eigenbasis of the Dirichlet Laplacian (FFTW RODFT00).
class SpectralSampler {
 public:
  explicit SpectralSampler(const Box& box);
  ~SpectralSampler();
  SpectralSampler(const SpectralSampler&) = delete;
  SpectralSampler& operator=(const SpectralSampler&) = delete;

  VertexField sample(Stream& rng) const;
  // Fills `out` (size box.size()) without allocating a VertexField.
  void sample_into(Stream& rng, std::vector<double>& out) const;
  const Box& box() const { return box_; }

 private:
  Box box_;
  std::vector<double> inv_sqrt_lambda_;
  void* plan_ = nullptr;
};

// Exact sampler with covariance inverse of (2d I - A) restricted to an
// arbitrary finite vertex set, by Cholesky of the precision matrix.
// Dense for <= 4096 vertices, sparse otherwise.
class CholeskySampler {
 public:
  CholeskySampler(int d, const std::vector<Point>& U);
  ~CholeskySampler();
  std::vector<double> sample(Stream& rng) const;
  const std::vector<Point>& points() const { return pts_; }
  bool dense() const { return dense_; }

 private:
  struct Impl;
  int d_;
  std::vector<Point> pts_;
  bool dense_;
  std::unique_ptr<Impl> impl_;
};

VertexField sample_gff(const Box& box, Stream& rng);

// The infinite-volume field on Z^d restricted to a finite box: covariance is
// the full-space Green function, factorised densely. Boxes up to 4096 vertices.
class GreenFieldSampler {
 public:
  explicit GreenFieldSampler(const Box& box);
  VertexField sample(Stream& rng) const;
  void sample_into(Stream& rng, std::vector<double>& out) const;
  const Box& box() const { return box_; }
  static std::shared_ptr<const GreenFieldSampler> get(const Box& box);

 private:
  Box box_;
  std::shared_ptr<const std::vector<double>> L_;  // lower factor, row-major; shared between translates
};
// Dense-factorization sampler on a whole box; for the cross-check of the spectral method.
VertexField sample_gff_dense(const Box& box, Stream& rng);

struct MarkovSplit {
  std::vector<int64_t> U;  // vertex indices of the inner set
  VertexField beta;        // harmonic extension of the values off U
  VertexField bulk;        // field - beta, zero off U
  double residual = 0.0;
};

// Harmonic extension of the values on the complement into U. Values outside
// the box are zero (Dirichlet).
std::vector<double> harmonic_extension(const VertexField& field, const std::vector<int64_t>& U, double* residual = nullptr);
MarkovSplit markov_split(const VertexField& field, const std::vector<int64_t>& U);
// Keeps the values off U, replaces U by harmonic extension plus a fresh
// zero-boundary field on U.
VertexField conditional_sample(const VertexField& boundary, const std::vector<int64_t>& U, Stream& rng);

std::vector<CovarianceEstimate> empirical_covariance(const std::vector<VertexField>& samples,
                                                     const std::vector<std::pair<int64_t, int64_t>>& pairs);

// "GFF1" binary: magic, u32 version, u8 dim, u64 extent per axis, then f64
// values row-major, all little-endian. A JSON sidecar (path + ".json")
// carries seed, sampler and boundary condition.
void save_field(const VertexField& f, const std::string& path);
VertexField load_field(const std::string& path);

}  // namespace cgff
