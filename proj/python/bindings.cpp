#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cgff/cable.hpp"
#include "cgff/config.hpp"
#include "cgff/experiments.hpp"
#include "cgff/gff.hpp"
#include "cgff/greens.hpp"
#include "cgff/interlace.hpp"
#include "cgff/perc.hpp"
#include "cgff/renorm.hpp"

namespace py = pybind11;
using namespace cgff;

namespace {

Point to_point(const std::vector<int64_t>& v) {
  if (v.size() > size_t(kMaxDim)) throw std::invalid_argument("too many coordinates");
  Point p{};
  for (size_t i = 0; i < v.size(); ++i) p[i] = v[i];
  return p;
}

py::array_t<double> field_array(const VertexField& f) {
  std::vector<py::ssize_t> shape;
  for (int a = 0; a < f.box.dim(); ++a) shape.push_back(py::ssize_t(f.box.hi()[a] - f.box.lo()[a]));
  py::array_t<double> out(shape);
  std::copy(f.values.begin(), f.values.end(), out.mutable_data());
  return out;
}

BridgeSpec bridge(double x, double y, double l, double sigma2) { return {x, y, l, sigma2}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaussian free field level sets on the lattice and the cable system";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("green", [](const std::vector<int64_t>& x, int d) { return green_zd(to_point(x), d); }, py::arg("x"),
        py::arg("d") = 3, "Green function g(0, x) of the walk, inverse of 2d I - A.");
  m.def("visits", [](const std::vector<int64_t>& x, int d) { return visits_zd(to_point(x), d); }, py::arg("x"),
        py::arg("d") = 3, "Expected visits to x of the walk started at 0.");
  m.def("sigma0_sq", &sigma0_sq, py::arg("d"));
  m.def(
      "capacity",
      [](const std::vector<std::vector<int64_t>>& A, int d) {
        std::vector<Point> pts;
        for (const auto& a : A) pts.push_back(to_point(a));
        return equilibrium(pts, d).capacity;
      },
      py::arg("points"), py::arg("d") = 3);

  m.def(
      "sample_gff",
      [](const std::vector<int64_t>& sides, uint64_t seed, uint64_t stream) {
        Stream rng(seed, stream);
        return field_array(sample_gff(make_box(int(sides.size()), sides), rng));
      },
      py::arg("sides"), py::arg("seed") = 1, py::arg("stream") = 0,
      "Dirichlet-zero free field on the box [0, sides); array indexed by coordinates.");

  m.def(
      "bridge_sup_tail",
      [](double x, double y, double l, double s2, double M) { return bridge_sup_tail(bridge(x, y, l, s2), M); },
      py::arg("x"), py::arg("y"), py::arg("l") = 0.5, py::arg("sigma2") = 2.0, py::arg("M"));
  m.def(
      "bridge_band_prob",
      [](double x, double y, double l, double s2, double a) { return bridge_band_prob(bridge(x, y, l, s2), a); },
      py::arg("x"), py::arg("y"), py::arg("l") = 0.5, py::arg("sigma2") = 2.0, py::arg("a"));
  m.def("truncation_K", [](double h) { return truncation_K(h); }, py::arg("h"));

  m.def(
      "iid_recursion",
      [](double q, int d, int64_t l0, int64_t ld, int n) {
        return iid_recursion(q, build_scales(d, 1, n, std::make_pair(l0, ld)), n);
      },
      py::arg("q"), py::arg("d"), py::arg("l0"), py::arg("ld"), py::arg("n"),
      "Exact level probabilities P_0..P_n for i.i.d. seeds.");
  m.def(
      "laplace_exact",
      [](const std::vector<std::pair<std::vector<int64_t>, double>>& V, double u, int d) {
        std::vector<std::pair<Point, double>> pv;
        for (const auto& [x, w] : V) pv.emplace_back(to_point(x), w);
        return laplace_exact(pv, u, d).value;
      },
      py::arg("potential"), py::arg("u"), py::arg("d") = 3);

  m.def("experiment_kinds", &experiment_kinds);
  m.def("config_keys", &config_keys);
  m.def(
      "run_experiment",
      [](const std::string& text, const std::string& out_dir) {
        const std::string t = text;
        ExperimentConfig c = (!t.empty() && t.find_first_not_of(" \t\r\n") != std::string::npos &&
                              t[t.find_first_not_of(" \t\r\n")] == '{')
                                 ? parse_config_json(t)
                                 : parse_config_text(t);
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run(c, out_dir);
          if (!out_dir.empty()) emit_report(r, out_dir);
        }
        return report_json(r).dump();
      },
      py::arg("config"), py::arg("out_dir") = "",
      "Runs one experiment from INI or JSON text and returns the report as a JSON string.");
}
