#include "cgff/greens.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>

#include "json.hpp"

namespace cgff {
namespace {

// Quadrature nodes in the time variable s for
//   g(x) = 1/2 * int_0^inf prod_i exp(-s) I_{x_i}(s) ds.
// Panels [0,1], [1,2], [2,4], ..., [T/2, T] with Gauss-Legendre, then
// s = T / v^2 on v in (0,1] for the tail, which leaves a smooth integrand
// once T >> |x|^2.
struct Node {
  double s;
  double w;
};

std::vector<Node> build_nodes(int64_t max_coord, int npts) {
  double T = 1.0;
  const double need = 64.0 * (1.0 + double(max_coord) * double(max_coord));
  while (T < need) T *= 2.0;
  gsl_integration_glfixed_table* tab = gsl_integration_glfixed_table_alloc(size_t(npts));
  std::vector<Node> nodes;
  auto panel = [&](double a, double b) {
    for (int i = 0; i < npts; ++i) {
      double xi, wi;
      gsl_integration_glfixed_point(a, b, size_t(i), &xi, &wi, tab);
      nodes.push_back({xi, wi});
    }
  };
  panel(0.0, 1.0);
  for (double a = 1.0; a < T; a *= 2.0) panel(a, 2.0 * a);
  for (int i = 0; i < npts; ++i) {
    double v, wi;
    gsl_integration_glfixed_point(0.0, 1.0, size_t(i), &v, &wi, tab);
    nodes.push_back({T / (v * v), wi * 2.0 * T / (v * v * v)});
  }
  gsl_integration_glfixed_table_free(tab);
  return nodes;
}

void scaled_bessel(double s, int64_t nmax, std::vector<double>& out) {
  out.assign(size_t(nmax + 1), 0.0);
  for (int64_t n = 0; n <= nmax; ++n) {
    gsl_sf_result r;
    gsl_sf_bessel_In_scaled_e(int(n), s, &r);
    out[size_t(n)] = r.val;
    if (r.val < 1e-300) break;  // later orders are smaller still
  }
}

// Integrates all keys (flattened d-tuples) at one rule resolution.
std::vector<double> integrate_keys(const std::vector<int32_t>& keys, int d, int64_t max_coord, int npts) {
  const size_t nk = keys.size() / size_t(d);
  std::vector<double> acc(nk, 0.0);
  std::vector<double> b;
  for (const Node& nd : build_nodes(max_coord, npts)) {
    scaled_bessel(nd.s, max_coord, b);
    const double w = 0.5 * nd.w;
    const int32_t* k = keys.data();
    for (size_t j = 0; j < nk; ++j, k += d) {
      double p = w;
      for (int i = 0; i < d; ++i) p *= b[size_t(k[i])];
      acc[j] += p;
    }
  }
  return acc;
}

struct GslInit {
  GslInit() { gsl_set_error_handler_off(); }
};
const GslInit gsl_init;

std::vector<int32_t> canonical(const Point& x, int d) {
  std::vector<int32_t> k(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) k[size_t(i)] = int32_t(std::abs(x[i]));
  std::sort(k.begin(), k.end());
  return k;
}

double green_direct(const Point& x, int d, double tol, double* err_out) {
  if (d < 3) throw std::invalid_argument("green function needs d >= 3 (transient walk)");
  const std::vector<int32_t> k = canonical(x, d);
  const int64_t m = k.back();
  const double fine = integrate_keys(k, d, m, 32)[0];
  const double coarse = integrate_keys(k, d, m, 20)[0];
  const double err = std::abs(fine - coarse);
  if (err_out) *err_out = err;
  if (!(err <= tol)) {
    throw std::runtime_error("green quadrature could not reach tolerance " + std::to_string(tol) +
                             " (estimated error " + std::to_string(err) + ")");
  }
  return fine;
}

}  // namespace

double green_zd(const Point& x, int d, double tol) { return green_direct(x, d, tol, nullptr); }

double visits_zd(const Point& x, int d, double tol) { return 2.0 * d * green_zd(x, d, tol / (2.0 * d)); }

GreenTable::GreenTable(int d, int64_t radius, double tol) : d_(d), radius_(radius), tol_(tol) {
  if (d < 3) throw std::invalid_argument("green table needs d >= 3 (transient walk)");
  if (d > kMaxDim) throw std::invalid_argument("dimension too large");
  if (radius < 0) throw std::invalid_argument("negative radius");
  bits_ = d <= 4 ? 16 : 8;
  if (radius >= (int64_t(1) << bits_)) throw std::invalid_argument("green table radius too large for key packing");
  std::vector<int32_t> keys;
  std::vector<int32_t> cur(size_t(d), 0);
  // nondecreasing tuples in [0, radius]
  for (;;) {
    keys.insert(keys.end(), cur.begin(), cur.end());
    int i = d - 1;
    while (i >= 0 && cur[size_t(i)] == radius) --i;
    if (i < 0) break;
    const int32_t v = cur[size_t(i)] + 1;
    for (int j = i; j < d; ++j) cur[size_t(j)] = v;
  }
  const std::vector<double> fine = integrate_keys(keys, d, radius, 32);
  const std::vector<double> coarse = integrate_keys(keys, d, radius, 20);
  values_.reserve(fine.size());
  for (size_t j = 0; j < fine.size(); ++j) {
    err_ = std::max(err_, std::abs(fine[j] - coarse[j]));
    uint64_t key = 0;
    for (int i = 0; i < d; ++i) key = (key << bits_) | uint64_t(keys[j * size_t(d) + size_t(i)]);
    values_.emplace(key, fine[j]);
  }
  if (!(err_ <= tol)) {
    throw std::runtime_error("green table quadrature error " + std::to_string(err_) + " exceeds tolerance " +
                             std::to_string(tol));
  }
}

std::shared_ptr<const GreenTable> GreenTable::get(int d, int64_t radius, double tol) {
  static std::mutex mu;
  static std::map<std::tuple<int, double, int64_t>, std::shared_ptr<const GreenTable>> cache;
  // Radii come from a fixed ladder 16, 24, 36, ... The quadrature depends on the
  // radius, so a request must map to the same table whatever was asked for before.
  int64_t r = 16;
  while (r < radius) r += r / 2;
  std::lock_guard<std::mutex> lk(mu);
  auto& slot = cache[{d, tol, r}];
  if (!slot) slot = std::make_shared<const GreenTable>(d, r, tol);
  return slot;
}

uint64_t GreenTable::key(const Point& x) const {
  std::array<int64_t, kMaxDim> a{};
  for (int i = 0; i < d_; ++i) a[size_t(i)] = std::abs(x[i]);
  std::sort(a.begin(), a.begin() + d_);
  uint64_t key = 0;
  for (int i = 0; i < d_; ++i) key = (key << bits_) | uint64_t(a[size_t(i)]);
  return key;
}

double GreenTable::operator()(const Point& x) const {
  if (norm_inf(x, d_) <= radius_) return values_.at(key(x));
  return green_zd(x, d_, tol_);
}

void GreenTable::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  auto put = [&](const void* p, size_t n) { f.write(static_cast<const char*>(p), std::streamsize(n)); };
  put("GRN1", 4);
  const uint32_t version = 1, d = uint32_t(d_);
  const uint64_t count = values_.size();
  put(&version, 4);
  put(&d, 4);
  put(&radius_, 8);
  put(&tol_, 8);
  put(&count, 8);
  std::vector<std::pair<uint64_t, double>> sorted(values_.begin(), values_.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [k, v] : sorted) {
    put(&k, 8);
    put(&v, 8);
  }
  if (!f) throw std::runtime_error("write failed for " + path);
  nlohmann::json side = {{"format", "GRN1"}, {"d", d_}, {"radius", radius_}, {"tolerance", tol_},
                         {"estimated_error", err_}, {"entries", count}};
  std::ofstream(path + ".json") << side.dump(2) << "\n";
}

GreenTable GreenTable::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  auto get = [&](void* p, size_t n) {
    f.read(static_cast<char*>(p), std::streamsize(n));
    if (!f) throw std::runtime_error("truncated green table file " + path);
  };
  char magic[4];
  get(magic, 4);
  if (std::memcmp(magic, "GRN1", 4) != 0) throw std::runtime_error("bad magic in " + path);
  uint32_t version, d;
  uint64_t count;
  GreenTable t;
  get(&version, 4);
  if (version != 1) throw std::runtime_error("unsupported green table version");
  get(&d, 4);
  get(&t.radius_, 8);
  get(&t.tol_, 8);
  get(&count, 8);
  t.d_ = int(d);
  t.bits_ = t.d_ <= 4 ? 16 : 8;
  t.values_.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    uint64_t k;
    double v;
    get(&k, 8);
    get(&v, 8);
    t.values_.emplace(k, v);
  }
  return t;
}

KilledGreen::KilledGreen(int d, std::vector<Point> U) : d_(d), pts_(std::move(U)) {
  for (size_t i = 0; i < pts_.size(); ++i) {
    if (!idx_.emplace(pts_[i], int64_t(i)).second) throw std::invalid_argument("duplicate vertex in U");
  }
}

int64_t KilledGreen::index_of(const Point& x) const {
  auto it = idx_.find(x);
  return it == idx_.end() ? -1 : it->second;
}

namespace {
Eigen::SparseMatrix<double> dirichlet_laplacian(int d, const std::vector<Point>& pts,
                                                const std::unordered_map<Point, int64_t, PointHash>& idx) {
  std::vector<Eigen::Triplet<double>> trip;
  for (size_t i = 0; i < pts.size(); ++i) {
    trip.emplace_back(int(i), int(i), 2.0 * d);
    for (int a = 0; a < d; ++a) {
      for (int s : {-1, 1}) {
        Point q = pts[i];
        q[a] += s;
        auto it = idx.find(q);
        if (it != idx.end()) trip.emplace_back(int(i), int(it->second), -1.0);
      }
    }
  }
  Eigen::SparseMatrix<double> L(long(pts.size()), long(pts.size()));
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}
}  // namespace

std::vector<double> KilledGreen::column(const Point& y) const {
  const int64_t j = index_of(y);
  if (j < 0) throw std::invalid_argument("vertex outside U");
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(dirichlet_laplacian(d_, pts_, idx_));
  if (llt.info() != Eigen::Success) throw std::runtime_error("Dirichlet Laplacian factorization failed");
  Eigen::VectorXd e = Eigen::VectorXd::Zero(long(pts_.size()));
  e[j] = 1.0;
  const Eigen::VectorXd c = llt.solve(e);
  return std::vector<double>(c.data(), c.data() + c.size());
}

double KilledGreen::operator()(const Point& x, const Point& y) const {
  const int64_t i = index_of(x);
  if (i < 0 || index_of(y) < 0) throw std::invalid_argument("killed green: point outside U");
  return column(y)[size_t(i)];
}

std::vector<double> KilledGreen::dense() const {
  const long n = long(pts_.size());
  if (n > 4096) throw std::length_error("dense killed green limited to 4096 vertices");
  Eigen::MatrixXd L = Eigen::MatrixXd(dirichlet_laplacian(d_, pts_, idx_));
  Eigen::LLT<Eigen::MatrixXd> llt(L);
  if (llt.info() != Eigen::Success) throw std::runtime_error("Dirichlet Laplacian factorization failed");
  const Eigen::MatrixXd G = llt.solve(Eigen::MatrixXd::Identity(n, n));
  std::vector<double> out(size_t(n * n));
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) out[size_t(i * n + j)] = G(i, j);
  }
  return out;
}

double killed_green(int d, const std::vector<Point>& U, const Point& x, const Point& y) {
  return KilledGreen(d, U)(x, y);
}

std::vector<Point> box_points(const Box& b) {
  std::vector<Point> out;
  out.reserve(size_t(b.size()));
  for (int64_t i = 0; i < b.size(); ++i) out.push_back(b.point(i));
  return out;
}

std::vector<Point> inner_boundary(const std::vector<Point>& A, int d) {
  std::unordered_map<Point, int, PointHash> in;
  for (const Point& p : A) in.emplace(p, 1);
  std::vector<Point> out;
  for (const Point& p : A) {
    bool edge = false;
    for (int a = 0; a < d && !edge; ++a) {
      for (int s : {-1, 1}) {
        Point q = p;
        q[a] += s;
        if (!in.count(q)) {
          edge = true;
          break;
        }
      }
    }
    if (edge) out.push_back(p);
  }
  return out;
}

EquilibriumMeasure equilibrium(const std::vector<Point>& A, const GreenTable& g) {
  if (A.empty()) throw std::invalid_argument("equilibrium measure of an empty set");
  const int d = g.dim();
  const std::vector<Point> B = inner_boundary(A, d);
  const long n = long(B.size());
  Eigen::MatrixXd M(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j <= i; ++j) M(i, j) = M(j, i) = g.at(B[size_t(i)], B[size_t(j)]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) throw std::runtime_error("equilibrium system not positive definite");
  const Eigen::VectorXd e = llt.solve(Eigen::VectorXd::Ones(n));

  EquilibriumMeasure em;
  em.d = d;
  em.points = A;
  em.weights.assign(A.size(), 0.0);
  std::unordered_map<Point, size_t, PointHash> pos;
  for (size_t i = 0; i < A.size(); ++i) pos.emplace(A[i], i);
  // Boundary vertices whose outside neighbours are all enclosed holes have
  // weight exactly zero; allow for the table error there.
  const double neg_tol = 1e-6 * std::max(1.0, e.maxCoeff());
  for (long i = 0; i < n; ++i) {
    if (e[i] < -neg_tol) throw std::runtime_error("equilibrium solve produced a negative weight (ill-conditioned)");
    em.weights[pos.at(B[size_t(i)])] = std::max(0.0, e[i]);
    em.capacity += std::max(0.0, e[i]);
  }
  // Check the hitting identity on all of A when affordable, else on B.
  const std::vector<Point>& check = A.size() <= 6000 ? A : B;
  for (const Point& y : check) {
    double s = 0.0;
    for (long i = 0; i < n; ++i) s += e[i] * g.at(B[size_t(i)], y);
    em.residual = std::max(em.residual, std::abs(s - 1.0));
  }
  if (!(em.residual < 1e-6)) {
    throw std::runtime_error("equilibrium solve residual " + std::to_string(em.residual) + " too large");
  }
  return em;
}

EquilibriumMeasure equilibrium(const std::vector<Point>& A, int d, double tol) {
  if (A.empty()) throw std::invalid_argument("equilibrium measure of an empty set");
  int64_t diam = 0;
  Point lo = A[0], hi = A[0];
  for (const Point& p : A) {
    for (int i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  }
  for (int i = 0; i < d; ++i) diam = std::max(diam, hi[i] - lo[i]);
  return equilibrium(A, *GreenTable::get(d, diam, tol));
}

double sigma0_sq(int d) {
  if (d < 3) throw std::invalid_argument("d must be >= 3");
  // 2d parallel arms of length 1/4 with bridge variance 2 per unit length
  return 2.0 * 0.25 / (2.0 * d);
}

}  // namespace cgff
