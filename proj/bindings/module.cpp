#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gmmland/classifier.hpp"
#include "gmmland/theory_checks.hpp"

namespace py = pybind11;
using namespace gmmland;

namespace {

EngineConfig make_engine_config(const std::string& mode, int order,
                                std::int64_t samples, std::uint64_t seed) {
  EngineConfig cfg;
  if (mode == "tensor_quadrature") {
    cfg.mode = ExpectationMode::tensor_quadrature;
  } else if (mode == "monte_carlo") {
    cfg.mode = ExpectationMode::monte_carlo;
  } else {
    throw std::invalid_argument("mode must be tensor_quadrature or monte_carlo");
  }
  cfg.quadrature_order = order;
  cfg.mc_samples = samples;
  cfg.seed = seed;
  return cfg;
}

const char* kind_name(GroupKind k) {
  return k == GroupKind::many_fit_one ? "many_fit_one" : "one_fit_many";
}

const char* termination_name(Termination t) {
  switch (t) {
    case Termination::gradient_tol: return "gradient_tol";
    case Termination::step_tol: return "step_tol";
    case Termination::max_iters: return "max_iters";
    case Termination::runaway: return "runaway";
  }
  return "unknown";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "population likelihood landscape of spherical Gaussian mixtures";

  py::class_<TrueMixture>(m, "TrueMixture")
      .def(py::init<MatrixXd, double>(), py::arg("centers"), py::arg("sigma"),
           "centers: (d, k_star) array, one component mean per column")
      .def_property_readonly("centers", &TrueMixture::centers)
      .def_property_readonly("sigma", &TrueMixture::sigma)
      .def_property_readonly("dim", &TrueMixture::dim)
      .def_property_readonly("count", &TrueMixture::count)
      .def_property_readonly("delta_min", &TrueMixture::delta_min)
      .def_property_readonly("delta_max", &TrueMixture::delta_max)
      .def_property_readonly("snr", &TrueMixture::snr);

  py::class_<ExpectationEngine>(m, "Engine")
      .def(py::init([](const std::string& mode, int order,
                       std::int64_t samples, std::uint64_t seed) {
             return ExpectationEngine(
                 make_engine_config(mode, order, samples, seed));
           }),
           py::arg("mode") = "tensor_quadrature", py::arg("order") = 0,
           py::arg("samples") = 2'000'000, py::arg("seed") = 0);

  py::class_<StationarityReport>(m, "StationarityReport")
      .def_readonly("grad_inf_norm", &StationarityReport::grad_inf_norm)
      .def_readonly("em_residual", &StationarityReport::em_residual)
      .def_readonly("stein_residual", &StationarityReport::stein_residual)
      .def_readonly("raw_stein_residual",
                    &StationarityReport::raw_stein_residual)
      .def_readonly("hessian_min_eigenvalue",
                    &StationarityReport::hessian_min_eigenvalue)
      .def_readonly("hessian_spectral_norm",
                    &StationarityReport::hessian_spectral_norm)
      .def_readonly("local_minimum", &StationarityReport::local_minimum);

  m.def("component_log_density", &component_log_density, py::arg("x"),
        py::arg("center"), py::arg("sigma"));

  m.def(
      "evaluate_point",
      [](const VectorXd& x, const MatrixXd& beta, double sigma) {
        const PointEvaluation pe =
            evaluate_point(x, FittedCenters(beta), sigma);
        py::dict out;
        out["log_component_densities"] = pe.log_component_densities;
        out["associations"] = pe.associations;
        out["log_mixture_density"] = pe.log_mixture_density;
        return out;
      },
      py::arg("x"), py::arg("beta"), py::arg("sigma"));

  m.def(
      "loss",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine) -> py::tuple {
        const LandscapeValue v = loss(FittedCenters(beta), model, engine);
        if (v.kl_gap) return py::make_tuple(v.loss, *v.kl_gap);
        return py::make_tuple(v.loss, py::none());
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"));

  m.def(
      "gradient",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine) {
        return gradient(FittedCenters(beta), model, engine);
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"));

  m.def(
      "hessian",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine) {
        return hessian(FittedCenters(beta), model, engine);
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"));

  m.def(
      "em_step",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine) {
        return em_step(FittedCenters(beta), model, engine).centers();
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"));

  m.def(
      "descend",
      [](const MatrixXd& beta0, const TrueMixture& model,
         const ExpectationEngine& engine, const std::string& method,
         double grad_tol, double step_tol, int max_iters) {
        DescentOptions opts;
        opts.method = method == "gradient_descent"
                          ? DescentMethod::gradient_descent
                          : DescentMethod::em;
        opts.grad_tol = grad_tol;
        opts.step_tol = step_tol;
        opts.max_iters = max_iters;
        const DescentTrace tr =
            descend(FittedCenters(beta0), model, engine, opts);
        py::dict out;
        out["beta"] = tr.final_point();
        out["losses"] = tr.losses;
        out["iterations"] = tr.losses.size() - 1;
        out["termination"] = termination_name(tr.termination);
        return out;
      },
      py::arg("beta0"), py::arg("model"), py::arg("engine"),
      py::arg("method") = "em", py::arg("grad_tol") = 1e-9,
      py::arg("step_tol") = 1e-12, py::arg("max_iters") = 50000);

  m.def(
      "stationarity_report",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine) {
        return stationarity_report(FittedCenters(beta), model, engine);
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"));

  m.def(
      "check_mean_consistency",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine) {
        return check_mean_consistency(FittedCenters(beta), model, engine);
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"));

  m.def(
      "check_span",
      [](const MatrixXd& beta, const TrueMixture& model) {
        return check_span(FittedCenters(beta), model);
      },
      py::arg("beta"), py::arg("model"));

  m.def(
      "classify",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine, double tau_fit, double tau_empty,
         double tau_dup) {
        const FittedCenters fc(beta);
        ClassifierThresholds thr;
        thr.tau_fit = tau_fit;
        thr.tau_empty = tau_empty;
        thr.tau_dup = tau_dup;
        const StructureReport rep =
            classify(association_stats(fc, model, engine), fc, model, thr);
        py::dict out;
        out["label"] = rep.label();
        out["s0"] = rep.s0;
        out["unclassified"] = rep.unclassified;
        py::list groups;
        for (const auto& g : rep.groups) {
          py::dict gd;
          gd["fitted"] = g.fitted;
          gd["true"] = g.true_members;
          gd["kind"] = kind_name(g.kind);
          gd["error"] = g.error;
          groups.append(gd);
        }
        out["groups"] = groups;
        py::list edges;
        for (const auto& [i, s] : bipartite_graph(rep)) {
          edges.append(py::make_tuple(i, s));
        }
        out["edges"] = edges;
        return out;
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"),
      py::arg("tau_fit") = 0.6, py::arg("tau_empty") = -1.0,
      py::arg("tau_dup") = 1.0);

  m.def(
      "voronoi_mass",
      [](const MatrixXd& beta, const TrueMixture& model,
         const ExpectationEngine& engine) {
        const VoronoiMass vm = voronoi_mass(
            model, VoronoiQuery(FittedCenters(beta), 0.0), engine);
        py::dict out;
        out["probs"] = vm.probs;
        out["method"] = vm.method == MassMethod::interval_exact
                            ? "interval_exact"
                            : "monte_carlo";
        out["duplicate_groups"] = vm.duplicate_groups;
        return out;
      },
      py::arg("beta"), py::arg("model"), py::arg("engine"));

  m.def(
      "run_theory_battery",
      [](const ExpectationEngine& engine) {
        const TheoryBatteryResult battery = run_theory_battery(engine);
        py::list out;
        for (const auto& r : battery.results) {
          py::dict d;
          d["name"] = r.name;
          d["grid_size"] = r.grid_size;
          d["violations"] = r.violations;
          d["worst_margin"] = r.worst_margin;
          out.append(d);
        }
        return out;
      },
      py::arg("engine"));
}
