#include "cgff/gff.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <fftw3.h>

#include "cgff/greens.hpp"
#include "json.hpp"

namespace cgff {
std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}

namespace {

struct FftwBuffer {
  explicit FftwBuffer(size_t n) : p(static_cast<double*>(fftw_malloc(sizeof(double) * n))) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  double* p;
};

Eigen::SparseMatrix<double> precision(int d, const std::vector<Point>& pts) {
  std::unordered_map<Point, int, PointHash> idx;
  for (size_t i = 0; i < pts.size(); ++i) idx.emplace(pts[i], int(i));
  std::vector<Eigen::Triplet<double>> trip;
  for (size_t i = 0; i < pts.size(); ++i) {
    trip.emplace_back(int(i), int(i), 2.0 * d);
    for (int a = 0; a < d; ++a) {
      for (int s : {-1, 1}) {
        Point q = pts[i];
        q[a] += s;
        auto it = idx.find(q);
        if (it != idx.end()) trip.emplace_back(int(i), it->second, -1.0);
      }
    }
  }
  Eigen::SparseMatrix<double> Q(long(pts.size()), long(pts.size()));
  Q.setFromTriplets(trip.begin(), trip.end());
  return Q;
}
}  // namespace

VertexField zero_field(const Box& box) {
  VertexField f;
  f.box = box;
  f.values.assign(size_t(box.size()), 0.0);
  return f;
}

SpectralSampler::SpectralSampler(const Box& box) : box_(box) {
  const int d = box.dim();
  const int64_t n = box.size();
  // eigenvalues of 2d I - A with zero boundary: 2d - 2 sum cos(pi (k+1)/(n+1))
  inv_sqrt_lambda_.resize(size_t(n));
  double scale = 1.0;
  for (int a = 0; a < d; ++a) scale /= std::sqrt(2.0 * double(box.side(a) + 1));
  for (int64_t i = 0; i < n; ++i) {
    double lam = 2.0 * d;
    int64_t rem = i;
    for (int a = 0; a < d; ++a) {
      const int64_t k = rem / box.stride(a);
      rem %= box.stride(a);
      lam -= 2.0 * std::cos(M_PI * double(k + 1) / double(box.side(a) + 1));
    }
    inv_sqrt_lambda_[size_t(i)] = scale / std::sqrt(lam);
  }
  std::vector<int> dims(static_cast<size_t>(d));
  std::vector<fftw_r2r_kind> kinds(size_t(d), FFTW_RODFT00);
  for (int a = 0; a < d; ++a) dims[size_t(a)] = int(box.side(a));
  FftwBuffer tmp(static_cast<size_t>(n));
  std::lock_guard<std::mutex> lk(fftw_planner_mutex());
  // FFTW_MEASURE chooses plans by timing, which can change the rounding from one
  // process to the next; estimated plans keep fields bit-identical across runs
  plan_ = fftw_plan_r2r(d, dims.data(), tmp.p, tmp.p, kinds.data(), FFTW_ESTIMATE);
  if (!plan_) throw std::runtime_error("FFTW plan creation failed");
}

SpectralSampler::~SpectralSampler() {
  std::lock_guard<std::mutex> lk(fftw_planner_mutex());
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void SpectralSampler::sample_into(Stream& rng, std::vector<double>& out) const {
  const size_t n = size_t(box_.size());
  FftwBuffer buf{n};
  for (size_t i = 0; i < n; ++i) buf.p[i] = rng.normal() * inv_sqrt_lambda_[i];
  fftw_execute_r2r(static_cast<fftw_plan>(plan_), buf.p, buf.p);
  out.assign(buf.p, buf.p + n);
}

VertexField SpectralSampler::sample(Stream& rng) const {
  VertexField f;
  f.box = box_;
  f.seed = rng.seed();
  f.stream = rng.stream_id();
  f.sampler = "spectral-dst";
  sample_into(rng, f.values);
  return f;
}

struct CholeskySampler::Impl {
  Eigen::MatrixXd L;  // dense lower factor
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> sparse;
};

CholeskySampler::CholeskySampler(int d, const std::vector<Point>& U)
    : d_(d), pts_(U), dense_(U.size() <= 4096), impl_(std::make_unique<Impl>()) {
  const Eigen::SparseMatrix<double> Q = precision(d, pts_);
  if (dense_) {
    Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(Q)};
    if (llt.info() != Eigen::Success) throw std::runtime_error("precision matrix factorization failed");
    impl_->L = llt.matrixL();
  } else {
    impl_->sparse.compute(Q);
    if (impl_->sparse.info() != Eigen::Success) throw std::runtime_error("sparse precision factorization failed");
  }
}

CholeskySampler::~CholeskySampler() = default;

std::vector<double> CholeskySampler::sample(Stream& rng) const {
  const long n = long(pts_.size());
  Eigen::VectorXd z(n);
  for (long i = 0; i < n; ++i) z[i] = rng.normal();
  Eigen::VectorXd x;
  if (dense_) {
    // Q = L L^T, x = L^{-T} z has covariance Q^{-1}
    x = impl_->L.transpose().triangularView<Eigen::Upper>().solve(z);
  } else {
    // Q = P^T L L^T P
    const auto& s = impl_->sparse;
    Eigen::VectorXd y = s.matrixU().solve(z);
    x = s.permutationPinv() * y;
  }
  return std::vector<double>(x.data(), x.data() + n);
}

namespace {
std::shared_ptr<const SpectralSampler> cached_sampler(const Box& box) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const SpectralSampler>> cache;
  std::string key = std::to_string(box.dim()) + ":" + box.shape_string();
  std::lock_guard<std::mutex> lk(mu);
  auto& slot = cache[key];
  if (!slot) {
    Point lo{}, hi{};
    for (int a = 0; a < box.dim(); ++a) hi[a] = box.side(a);
    slot = std::make_shared<const SpectralSampler>(Box(box.dim(), lo, hi));
  }
  return slot;
}
}  // namespace

VertexField sample_gff(const Box& box, Stream& rng) {
  VertexField f = cached_sampler(box)->sample(rng);
  f.box = box;
  return f;
}

GreenFieldSampler::GreenFieldSampler(const Box& box) : box_(box) {
  const int64_t n = box.size();
  if (n > 4096) throw std::invalid_argument("infinite-volume sampler limited to 4096 vertices");
  int64_t side = 0;
  for (int a = 0; a < box.dim(); ++a) side = std::max(side, box.side(a));
  const auto g = GreenTable::get(box.dim(), side);
  const std::vector<Point> pts = box_points(box);
  Eigen::MatrixXd G(n, n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) G(i, j) = G(j, i) = g->at(pts[size_t(i)], pts[size_t(j)]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  if (llt.info() != Eigen::Success) throw std::runtime_error("Green matrix is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  auto packed = std::make_shared<std::vector<double>>(size_t(n * n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) (*packed)[size_t(i * n + j)] = L(i, j);
  }
  L_ = std::move(packed);
}

void GreenFieldSampler::sample_into(Stream& rng, std::vector<double>& out) const {
  const int64_t n = box_.size();
  std::vector<double> z(static_cast<size_t>(n));
  for (double& v : z) v = rng.normal();
  out.assign(size_t(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double* row = L_->data() + i * n;
    double s = 0.0;
    for (int64_t j = 0; j <= i; ++j) s += row[j] * z[size_t(j)];
    out[size_t(i)] = s;
  }
}

VertexField GreenFieldSampler::sample(Stream& rng) const {
  VertexField f;
  f.box = box_;
  f.seed = rng.seed();
  f.stream = rng.stream_id();
  f.sampler = "green-cholesky";
  f.boundary = "infinite-volume";
  sample_into(rng, f.values);
  return f;
}

std::shared_ptr<const GreenFieldSampler> GreenFieldSampler::get(const Box& box) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const GreenFieldSampler>> cache;
  // covariance depends on the shape only
  const std::string key = std::to_string(box.dim()) + ":" + box.shape_string();
  std::shared_ptr<const GreenFieldSampler> base;
  {
    std::lock_guard<std::mutex> lk(mu);
    auto& slot = cache[key];
    if (!slot) slot = std::make_shared<const GreenFieldSampler>(box);
    base = slot;
  }
  if (base->box().lo() == box.lo()) return base;
  auto moved = std::make_shared<GreenFieldSampler>(*base);
  moved->box_ = box;
  return moved;
}

VertexField sample_gff_dense(const Box& box, Stream& rng) {
  CholeskySampler s(box.dim(), box_points(box));
  VertexField f;
  f.box = box;
  f.seed = rng.seed();
  f.stream = rng.stream_id();
  f.sampler = "cholesky";
  f.values = s.sample(rng);
  return f;
}

std::vector<double> harmonic_extension(const VertexField& field, const std::vector<int64_t>& U, double* residual) {
  const Box& box = field.box;
  const int d = box.dim();
  std::vector<double> out = field.values;
  if (U.empty()) {
    if (residual) *residual = 0.0;
    return out;
  }
  std::unordered_map<int64_t, int> pos;
  for (size_t i = 0; i < U.size(); ++i) {
    if (U[i] < 0 || U[i] >= box.size()) throw std::invalid_argument("U vertex outside field box");
    pos.emplace(U[i], int(i));
  }
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(long(U.size()));
  for (size_t i = 0; i < U.size(); ++i) {
    trip.emplace_back(int(i), int(i), 2.0 * d);
    for (int a = 0; a < d; ++a) {
      for (int s : {-1, 1}) {
        const int64_t j = box.neighbor(U[i], a, s);
        if (j < 0) continue;
        auto it = pos.find(j);
        if (it != pos.end()) {
          trip.emplace_back(int(i), it->second, -1.0);
        } else {
          rhs[long(i)] += field.values[size_t(j)];
        }
      }
    }
  }
  Eigen::SparseMatrix<double> M(long(U.size()), long(U.size()));
  M.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(M);
  if (llt.info() != Eigen::Success) throw std::runtime_error("harmonic extension solve failed");
  const Eigen::VectorXd x = llt.solve(rhs);
  const double res = (M * x - rhs).cwiseAbs().maxCoeff();
  if (residual) *residual = res;
  if (!(res <= 1e-9 * (1.0 + rhs.cwiseAbs().maxCoeff()))) {
    throw std::runtime_error("harmonic extension residual " + std::to_string(res) + " above tolerance");
  }
  for (size_t i = 0; i < U.size(); ++i) out[size_t(U[i])] = x[long(i)];
  return out;
}

MarkovSplit markov_split(const VertexField& field, const std::vector<int64_t>& U) {
  MarkovSplit ms;
  ms.U = U;
  ms.beta = field;
  ms.beta.sampler = "harmonic-extension";
  ms.beta.values = harmonic_extension(field, U, &ms.residual);
  ms.bulk = zero_field(field.box);
  ms.bulk.sampler = "markov-bulk";
  for (int64_t i : U) ms.bulk.values[size_t(i)] = field.values[size_t(i)] - ms.beta.values[size_t(i)];
  return ms;
}

VertexField conditional_sample(const VertexField& boundary, const std::vector<int64_t>& U, Stream& rng) {
  VertexField out = boundary;
  if (U.empty()) return out;
  out.values = harmonic_extension(boundary, U, nullptr);
  std::vector<Point> pts;
  pts.reserve(U.size());
  for (int64_t i : U) pts.push_back(boundary.box.point(i));
  const std::vector<double> bulk = CholeskySampler(boundary.box.dim(), pts).sample(rng);
  for (size_t i = 0; i < U.size(); ++i) out.values[size_t(U[i])] += bulk[i];
  out.sampler = "conditional";
  out.seed = rng.seed();
  out.stream = rng.stream_id();
  return out;
}

std::vector<CovarianceEstimate> empirical_covariance(const std::vector<VertexField>& samples,
                                                     const std::vector<std::pair<int64_t, int64_t>>& pairs) {
  if (samples.size() < 2) throw std::invalid_argument("need at least two samples");
  std::vector<CovarianceEstimate> out;
  std::vector<double> x(samples.size()), y(samples.size());
  for (const auto& [a, b] : pairs) {
    for (size_t s = 0; s < samples.size(); ++s) {
      x[s] = samples[s].values[size_t(a)];
      y[s] = samples[s].values[size_t(b)];
    }
    out.push_back(sample_covariance(x, y));
  }
  return out;
}

namespace {
static_assert(std::endian::native == std::endian::little, "field files are little-endian; add byte swaps here");
}

void save_field(const VertexField& f, const std::string& path) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw std::runtime_error("cannot open " + path + " for writing");
  auto put = [&](const void* p, size_t n) { o.write(static_cast<const char*>(p), std::streamsize(n)); };
  put("GFF1", 4);
  const uint32_t version = 1;
  const uint8_t dim = uint8_t(f.box.dim());
  put(&version, 4);
  put(&dim, 1);
  for (int a = 0; a < f.box.dim(); ++a) {
    const uint64_t e = uint64_t(f.box.side(a));
    put(&e, 8);
  }
  put(f.values.data(), f.values.size() * sizeof(double));
  if (!o) throw std::runtime_error("write failed for " + path);
  nlohmann::json side = {{"format", "GFF1"}, {"seed", f.seed},       {"stream", f.stream},
                         {"sampler", f.sampler}, {"boundary", f.boundary}};
  std::vector<int64_t> lo(f.box.lo().begin(), f.box.lo().begin() + f.box.dim());
  side["origin"] = lo;
  std::ofstream(path + ".json") << side.dump(2) << "\n";
}

VertexField load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  auto get = [&](void* p, size_t n) {
    in.read(static_cast<char*>(p), std::streamsize(n));
    if (!in) throw std::runtime_error("truncated field file " + path);
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "GFF1", 4) != 0) throw std::runtime_error("bad magic in " + path + " (expected GFF1)");
  uint32_t version;
  uint8_t dim;
  get(&version, 4);
  if (version != 1) throw std::runtime_error("unsupported field file version " + std::to_string(version));
  get(&dim, 1);
  if (dim < 1 || dim > kMaxDim) throw std::runtime_error("bad dimension in field file");
  Point lo{}, hi{};
  for (int a = 0; a < dim; ++a) {
    uint64_t e;
    get(&e, 8);
    hi[a] = int64_t(e);
  }
  VertexField f;
  std::ifstream sj(path + ".json");
  if (sj) {
    const nlohmann::json side = nlohmann::json::parse(sj);
    f.seed = side.value("seed", uint64_t(0));
    f.stream = side.value("stream", uint64_t(0));
    f.sampler = side.value("sampler", std::string());
    f.boundary = side.value("boundary", std::string("dirichlet-zero"));
    if (side.contains("origin")) {
      const auto origin = side["origin"].get<std::vector<int64_t>>();
      for (int a = 0; a < dim && a < int(origin.size()); ++a) {
        lo[a] = origin[size_t(a)];
        hi[a] += lo[a];
      }
    }
  }
  f.box = Box(dim, lo, hi);
  f.values.resize(size_t(f.box.size()));
  get(f.values.data(), f.values.size() * sizeof(double));
  if (in.peek() != EOF) throw std::runtime_error("trailing bytes in field file " + path);
  return f;
}

}  // namespace cgff
