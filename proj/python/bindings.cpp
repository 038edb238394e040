#include "ridgeci/bootstrap.hpp"
#include "ridgeci/cli.hpp"
#include "ridgeci/coverage.hpp"
#include "ridgeci/errors.hpp"
#include "ridgeci/field.hpp"
#include "ridgeci/inference.hpp"
#include "ridgeci/kde.hpp"
#include "ridgeci/spectral.hpp"
#include "ridgeci/synthetic.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace ridgeci;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<bool> to_bool_array(const NodeMask& m) {
  py::array_t<bool> out(m.size());
  auto buf = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < m.size(); ++i) buf(i) = m[i] != 0;
  return out;
}

RowMatrix grid_nodes(const GridSpec& g) {
  RowMatrix X(static_cast<Eigen::Index>(g.node_count()), g.d());
  for (std::size_t i = 0; i < g.node_count(); ++i) X.row(static_cast<Eigen::Index>(i)) = g.node(i).transpose();
  return X;
}

KernelDensityEstimator make_estimator(const RowMatrix& points, double h) {
  SampleMatrix s(points);
  const int d = s.d();
  return KernelDensityEstimator(std::move(s), Bandwidth(h), KernelSpec{d, KernelProfile::Triweight});
}

// "auto" selects default_rho_n for the case; otherwise a number or "zero".
RhoSpec resolve_rho_text(const KernelDensityEstimator& est, const std::string& rho, const std::string& case_hint) {
  if (rho == "auto") return RhoSpec::Value(default_rho_n(est, parse_case_hint(case_hint)));
  return parse_rho(rho);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Kernel density ridges with bootstrap confidence regions";

  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "default_bandwidth",
      [](const RowMatrix& points, const std::string& case_hint) {
        return default_bandwidth(SampleMatrix(points), parse_case_hint(case_hint)).h;
      },
      py::arg("points"), py::arg("case_hint") = "auto");

  m.def(
      "nonridgeness",
      [](const Eigen::MatrixXd& hess, const Eigen::VectorXd& grad, int r) {
        return nonridgeness(spectral_frame(hess, grad, r), grad);
      },
      py::arg("hessian"), py::arg("gradient"), py::arg("r") = 1);

  py::class_<KernelDensityEstimator>(m, "Estimator")
      .def(py::init(&make_estimator), py::arg("points"), py::arg("h"))
      .def_property_readonly("n", &KernelDensityEstimator::n)
      .def_property_readonly("d", &KernelDensityEstimator::d)
      .def_property_readonly("h", &KernelDensityEstimator::h)
      .def(
          "jet",
          [](const KernelDensityEstimator& est, const Eigen::VectorXd& x) {
            const DensityJet j = est.jet_at(x);
            return py::make_tuple(j.value, j.gradient, unvech(j.hess_vech));
          },
          py::arg("x"), "Returns (value, gradient, Hessian) of the estimate at x.")
      .def(
          "density",
          [](const KernelDensityEstimator& est, const RowMatrix& X) {
            Eigen::VectorXd out(X.rows());
            for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = est.jet_at(X.row(i).transpose()).value;
            return out;
          },
          py::arg("points"));

  py::class_<RidgeField>(m, "RidgeField")
      .def_property_readonly("r", [](const RidgeField& f) { return f.r; })
      .def_property_readonly("h", [](const RidgeField& f) { return f.h; })
      .def_property_readonly("use_log", [](const RidgeField& f) { return f.use_log; })
      .def_property_readonly("density_threshold", [](const RidgeField& f) { return f.density_threshold; })
      .def_property_readonly("resolution", [](const RidgeField& f) { return f.grid.resolution; })
      .def_property_readonly("nodes", [](const RidgeField& f) { return grid_nodes(f.grid); })
      .def_property_readonly("density", [](const RidgeField& f) { return to_array(f.density); })
      .def_property_readonly("grad_norm", [](const RidgeField& f) { return to_array(f.grad_norm); })
      .def_property_readonly("p_hat", [](const RidgeField& f) { return to_array(f.p_hat); })
      .def_property_readonly("lambda_r1", [](const RidgeField& f) { return to_array(f.lambda_r1); })
      .def_property_readonly("valid", [](const RidgeField& f) { return to_bool_array(f.valid); })
      .def("__len__", &RidgeField::size);

  m.def(
      "evaluate_field",
      [](const KernelDensityEstimator& est, double spacing, int r, bool use_log, double floor_q) {
        const GridSpec grid = auto_grid(est.sample(), est.h(), spacing);
        FieldOptions fo;
        fo.r = r;
        fo.use_log = use_log;
        RidgeField field = evaluate_field(est, grid, fo);
        if (floor_q > 0.0) density_floor_mask(est, field, floor_q);
        return field;
      },
      py::arg("estimator"), py::arg("spacing") = 0.0, py::arg("r") = 1, py::arg("log_density") = false,
      py::arg("floor_q") = 0.05, "Field on the automatic grid (spacing <= 0 selects h/3).");

  m.def(
      "default_rho",
      [](const KernelDensityEstimator& est, const std::string& case_hint) {
        return default_rho_n(est, parse_case_hint(case_hint));
      },
      py::arg("estimator"), py::arg("case_hint") = "auto");

  m.def(
      "confidence_region",
      [](const KernelDensityEstimator& est, const RidgeField& field, int B, double alpha, const std::string& mode,
         const std::string& rho, std::uint64_t seed, const std::string& case_hint) {
        BootstrapConfig bc;
        bc.B = B;
        bc.alpha = alpha;
        bc.mode = parse_bootstrap_mode(mode);
        bc.rho = resolve_rho_text(est, rho, case_hint);
        bc.seed = seed;
        const ConfidenceResult res = confidence_region(est, field, bc);
        py::dict out;
        out["threshold"] = res.region.threshold;
        out["mask"] = to_bool_array(res.region.mask);
        out["rho"] = res.region.rho;
        out["candidate_count"] = res.region.candidate_count;
        out["draws"] = to_array(res.draws.draws);
        return out;
      },
      py::arg("estimator"), py::arg("field"), py::arg("B") = 500, py::arg("alpha") = 0.1,
      py::arg("mode") = "multiplier", py::arg("rho") = "auto", py::arg("seed") = 0, py::arg("case_hint") = "auto");

  m.def(
      "flatness_test",
      [](const KernelDensityEstimator& est, const RidgeField& field, const std::string& rho, double alpha, int B,
         std::uint64_t seed, double r_n, const std::string& case_hint) {
        FlatnessOptions fo;
        fo.rho = resolve_rho_text(est, rho, case_hint);
        fo.alpha = alpha;
        fo.B = B;
        fo.seed = seed;
        fo.r_n = r_n;
        const FlatnessTestResult res = flatness_test(est, field, fo);
        py::dict out;
        out["T_n"] = res.T_n;
        out["phi"] = res.phi_e;
        out["reject"] = res.reject;
        out["t_n"] = res.t_n;
        out["beta_hat"] = res.beta.beta_hat;
        out["radius"] = res.radius;
        out["warning"] = res.warning;
        return out;
      },
      py::arg("estimator"), py::arg("field"), py::arg("rho") = "auto", py::arg("alpha") = 0.1, py::arg("B") = 500,
      py::arg("seed") = 0, py::arg("r_n") = 0.0, py::arg("case_hint") = "auto");

  py::class_<SyntheticModel>(m, "SyntheticModel")
      .def(py::init([](const std::string& name, double sigma, double a) {
             ModelParams p;
             p.sigma = sigma;
             p.a = a;
             return SyntheticModel::build(name, p);
           }),
           py::arg("name"), py::arg("sigma") = 0.2, py::arg("a") = 0.5)
      .def_property_readonly("name", &SyntheticModel::name)
      .def_property_readonly("case", [](const SyntheticModel& s) { return case_hint_name(s.case_hint()); })
      .def("sample", &SyntheticModel::sample_points, py::arg("n"), py::arg("seed") = 0)
      .def("value", [](const SyntheticModel& s, const Eigen::VectorXd& x) { return s.value(x); }, py::arg("x"))
      .def("true_ridge_points", &SyntheticModel::true_ridge_points, py::arg("m") = 256)
      .def(
          "nonridgeness",
          [](const SyntheticModel& s, const Eigen::VectorXd& x) { return analytic_nonridgeness(s, x); },
          py::arg("x"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"ridgeci"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
