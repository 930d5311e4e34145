#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "specdetect/classical_tests.hpp"
#include "specdetect/errors.hpp"
#include "specdetect/optimal_lss.hpp"
#include "specdetect/simulation.hpp"

namespace py = pybind11;
namespace sd = specdetect;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Optimal linear spectral statistics for weak principal components";
  m.attr("__version__") = SPECDETECT_VERSION;

  py::register_exception<sd::DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<sd::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<sd::AtomicMeasure>(m, "AtomicMeasure")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("atoms"), py::arg("weights"))
      .def_static("uniform", &sd::AtomicMeasure::uniform, py::arg("atoms"))
      .def_static("point", &sd::AtomicMeasure::point, py::arg("location"))
      .def_property_readonly("atoms", [](const sd::AtomicMeasure& a) { return to_vector(a.atoms()); })
      .def_property_readonly("weights", [](const sd::AtomicMeasure& a) { return to_vector(a.weights()); })
      .def("moment", &sd::AtomicMeasure::moment)
      .def("mixture", &sd::AtomicMeasure::mixture, py::arg("other"), py::arg("eps"))
      .def("__eq__", [](const sd::AtomicMeasure& a, const sd::AtomicMeasure& b) { return a == b; });

  py::class_<sd::Interval>(m, "Interval")
      .def_readonly("lower", &sd::Interval::lower)
      .def_readonly("upper", &sd::Interval::upper)
      .def("__repr__", [](const sd::Interval& i) {
        return "Interval(" + std::to_string(i.lower) + ", " + std::to_string(i.upper) + ")";
      });

  py::class_<sd::StieltjesCurve>(m, "StieltjesCurve")
      .def_readonly("grid", &sd::StieltjesCurve::grid)
      .def_readonly("weights", &sd::StieltjesCurve::weights)
      .def_readonly("v", &sd::StieltjesCurve::v)
      .def_property_readonly("intervals", [](const sd::StieltjesCurve& c) { return c.support.intervals; })
      .def_property_readonly("density", [](const sd::StieltjesCurve& c) {
        std::vector<double> d(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) d[i] = c.density(i);
        return d;
      });

  m.def("stieltjes_grid",
        [](const sd::AtomicMeasure& H, double gamma, int points, double epsilon) {
          sd::GridOptions g;
          g.points_per_interval = points;
          g.epsilon = epsilon;
          return sd::stieltjes_grid(H, gamma, g);
        },
        py::arg("H"), py::arg("gamma"), py::arg("points_per_interval") = 1000, py::arg("epsilon") = 5e-6);
  m.def("solve_silverstein", [](const sd::AtomicMeasure& H, double gamma, sd::cplx z) {
    return sd::solve_silverstein(H, gamma, z);
  });
  m.def("esd_moment_exact", &sd::esd_moment_exact, py::arg("H"), py::arg("gamma"), py::arg("k"));
  m.def("spike_forward_map", &sd::spike_forward_map, py::arg("H"), py::arg("gamma"), py::arg("s"));

  m.def("weak_derivative",
        [](const sd::AtomicMeasure& G, const sd::StieltjesCurve& curve) {
          const auto d = sd::weak_derivative_cdf(G, curve);
          py::list masses;
          for (const auto& p : d.point_masses) masses.append(py::make_tuple(p.location, p.weight));
          py::dict out;
          out["grid"] = d.grid;
          out["density"] = d.density;
          out["cdf"] = d.cdf;
          out["point_masses"] = masses;
          return out;
        },
        py::arg("G"), py::arg("curve"));

  py::class_<sd::LssFunction>(m, "LssFunction")
      .def("__call__", [](const sd::LssFunction& f, double x) { return f(x); })
      .def_property_readonly("knots", [](const sd::LssFunction& f) { return to_vector(f.knots()); })
      .def_property_readonly("values", [](const sd::LssFunction& f) { return to_vector(f.values()); })
      .def_property_readonly("normalization", &sd::LssFunction::normalization);

  py::class_<sd::EfficacyReport>(m, "EfficacyReport")
      .def_readonly("mu", &sd::EfficacyReport::mu)
      .def_readonly("sigma", &sd::EfficacyReport::sigma)
      .def_readonly("efficacy", &sd::EfficacyReport::efficacy)
      .def_readonly("power", &sd::EfficacyReport::power)
      .def_readonly("alpha", &sd::EfficacyReport::alpha)
      .def_property_readonly("regime", [](const sd::EfficacyReport& r) { return std::string(sd::to_string(r.regime)); });

  py::class_<sd::OptimalLss>(m, "OptimalLss")
      .def_readonly("phi", &sd::OptimalLss::phi)
      .def_readonly("report", &sd::OptimalLss::report)
      .def_readonly("substituted", &sd::OptimalLss::substituted);

  m.def("optimal_lss",
        [](const sd::AtomicMeasure& H, const sd::AtomicMeasure& G0, const sd::AtomicMeasure& G1, double gamma,
           int h, std::optional<int> n, const std::string& solver, bool scale_invariant) {
          sd::AlgoConfig cfg;
          cfg.solver = sd::solver_from_string(solver);
          const sd::SpikedModel model{H, G0, G1, gamma, h, n};
          return scale_invariant ? sd::optimal_ls3(model, cfg) : sd::optimal_lss(model, cfg);
        },
        py::arg("H"), py::arg("G0"), py::arg("G1"), py::arg("gamma"), py::arg("h") = 1, py::arg("n") = py::none(),
        py::arg("solver") = "diagreg", py::arg("scale_invariant") = false);

  m.def("catalog_ids", [] {
    std::vector<std::string> ids;
    for (const auto& e : sd::test_catalog()) ids.emplace_back(e.test_id);
    return ids;
  });
  m.def("equivalent_lss",
        [](const std::string& id, const sd::StieltjesCurve& curve, double omh_spike, double lambda) {
          return sd::equivalent_lss(sd::catalog_entry(id), curve, {omh_spike, lambda});
        },
        py::arg("test_id"), py::arg("curve"), py::arg("omh_spike") = 1.5, py::arg("lambda_") = 1.0);

  m.def("ar1_eigenvalues", &sd::ar1_eigenvalues, py::arg("rho"), py::arg("p"));
  m.def("sample_eigenvalues",
        [](const std::vector<double>& pop, int n, std::uint64_t seed) { return sd::sample_eigenvalues(pop, n, seed); },
        py::arg("population"), py::arg("n"), py::arg("seed"));
  m.def("apply_lss", [](const sd::LssFunction& phi, const std::vector<double>& eig) { return sd::apply_lss(phi, eig); },
        py::arg("phi"), py::arg("eigenvalues"));
}
