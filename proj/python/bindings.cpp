#include "ccgas/conic.hpp"
#include "ccgas/error.hpp"
#include "ccgas/linearization.hpp"
#include "ccgas/network.hpp"
#include "ccgas/policy.hpp"
#include "ccgas/pricing.hpp"
#include "ccgas/state.hpp"
#include "ccgas/steady_state.hpp"
#include "ccgas/uncertainty.hpp"
#include "ccgas/validation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace ccgas;

namespace {

py::dict revenue_dict(const RevenueReport& r) {
  auto split = [](const RevenueSplit& s) {
    py::dict d;
    d["nominal"] = s.nominal;
    d["recourse"] = s.recourse;
    d["limits"] = s.limits;
    d["variance"] = s.variance;
    d["total"] = s.total();
    return d;
  };
  py::list sup, act, con;
  for (const auto& s : r.supplier) sup.append(split(s));
  for (const auto& s : r.active) act.append(split(s));
  for (const auto& s : r.consumer) con.append(split(s));
  py::dict d;
  d["supplier_nodes"] = r.supplier_nodes;
  d["supplier"] = sup;
  d["active_edges"] = r.active_edges;
  d["active"] = act;
  d["consumer"] = con;
  d["flow_rent"] = r.flow_rent;
  d["pressure_rent"] = r.pressure_rent;
  d["variance_rent"] = r.variance_rent;
  d["reference_rent"] = r.reference_rent;
  d["linearization_surplus"] = r.linearization_surplus;
  d["adequacy_gap"] = r.adequacy_gap();
  d["identity_residual"] = r.identity_residual();
  return d;
}

}  // namespace

PYBIND11_MODULE(_ccgas, m) {
  m.doc() = "Chance-constrained gas network dispatch with affine recourse.";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<ValidationError>(m, "ValidationError", error);
  py::register_exception<DimensionError>(m, "DimensionError", error);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", error);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", error);
  py::register_exception<UnboundedError>(m, "UnboundedError", error);
  py::register_exception<DegenerateError>(m, "DegenerateError", error);

  py::enum_<Distribution>(m, "Distribution")
      .value("gaussian", Distribution::gaussian)
      .value("distribution_free", Distribution::distribution_free);
  py::enum_<PolicyMask>(m, "PolicyMask")
      .value("injections", PolicyMask::injections)
      .value("injections_compressors", PolicyMask::injections_compressors)
      .value("all_assets", PolicyMask::all_assets);
  py::enum_<SolveStatus>(m, "SolveStatus")
      .value("optimal", SolveStatus::optimal)
      .value("infeasible", SolveStatus::infeasible)
      .value("unbounded", SolveStatus::unbounded)
      .value("iteration_limit", SolveStatus::iteration_limit);

  py::class_<GasNetwork>(m, "GasNetwork")
      .def_property_readonly("name", &GasNetwork::name)
      .def_property_readonly("num_nodes", &GasNetwork::num_nodes)
      .def_property_readonly("num_edges", &GasNetwork::num_edges)
      .def_property_readonly("reference", &GasNetwork::reference)
      .def_property_readonly("incidence", &GasNetwork::incidence)
      .def_property_readonly("active_incidence", &GasNetwork::active_incidence)
      .def_property_readonly("suppliers", &GasNetwork::suppliers)
      .def_property_readonly("active_edges", &GasNetwork::active_edges)
      .def_property_readonly("compressors", &GasNetwork::compressors)
      .def_property_readonly("valves", &GasNetwork::valves)
      .def_property_readonly("extraction_mean", &GasNetwork::extraction_mean)
      .def_property_readonly("covariance", &GasNetwork::covariance)
      .def_property_readonly("cost_linear", &GasNetwork::cost_linear)
      .def_property_readonly("cost_quadratic", &GasNetwork::cost_quadratic)
      .def("to_json", &serialize_network);
  m.def("parse_network", [](const std::string& text) { return parse_network(text); }, py::arg("json_text"));
  m.def("load_network", &load_network, py::arg("path"));

  py::class_<StationaryPoint>(m, "StationaryPoint")
      .def_readonly("flow", &StationaryPoint::flow)
      .def_readonly("pressure", &StationaryPoint::pressure)
      .def_readonly("regulation", &StationaryPoint::regulation)
      .def_readonly("injection", &StationaryPoint::injection)
      .def_readonly("objective", &StationaryPoint::objective)
      .def_readonly("residual_norm", &StationaryPoint::residual_norm)
      .def("to_json", &serialize_point);
  m.def("solve_deterministic", [](const GasNetwork& net) { return solve_deterministic(net); }, py::arg("network"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<FlowSolution>(m, "FlowSolution")
      .def_readonly("flow", &FlowSolution::flow)
      .def_readonly("pressure", &FlowSolution::pressure)
      .def_readonly("iterations", &FlowSolution::iterations)
      .def_readonly("residual", &FlowSolution::residual);
  m.def("simulate_flow",
        [](const GasNetwork& net, const VectorXd& injection, const VectorXd& regulation, double reference_pressure) {
          return simulate_flow(net, injection, regulation, reference_pressure);
        },
        py::arg("network"), py::arg("injection"), py::arg("regulation"), py::arg("reference_pressure"));

  py::class_<LinearizedModel>(m, "LinearizedModel")
      .def_property_readonly("offset", [](const LinearizedModel& l) { return l.sens.offset; })
      .def_property_readonly("pressure_sens", [](const LinearizedModel& l) { return l.sens.pressure_sens; })
      .def_property_readonly("regulation_sens", [](const LinearizedModel& l) { return l.sens.regulation_sens; })
      .def_readonly("nodal_pressure_gain", &LinearizedModel::nodal_pressure_gain)
      .def_readonly("nodal_regulation_gain", &LinearizedModel::nodal_regulation_gain)
      .def_readonly("pressure_from_injection", &LinearizedModel::pressure_from_injection)
      .def_readonly("flow_from_injection", &LinearizedModel::flow_from_injection)
      .def_readonly("flow_from_regulation", &LinearizedModel::flow_from_regulation)
      .def_readonly("pressure_from_regulation", &LinearizedModel::pressure_from_regulation)
      .def_readonly("reference", &LinearizedModel::reference)
      .def_readonly("anchor", &LinearizedModel::anchor);
  m.def("linearize", &linearize, py::arg("point"), py::arg("network"));
  m.def("pressure_response", &pressure_response, py::arg("lin"), py::arg("alpha"), py::arg("beta"));
  m.def("flow_response", &flow_response, py::arg("lin"), py::arg("alpha"), py::arg("beta"));

  py::class_<UncertaintyModel>(m, "UncertaintyModel")
      .def_readonly("mean", &UncertaintyModel::mean)
      .def_readonly("covariance", &UncertaintyModel::covariance)
      .def_readonly("factor", &UncertaintyModel::factor)
      .def_readonly("stochastic", &UncertaintyModel::stochastic)
      .def_readonly("epsilon", &UncertaintyModel::epsilon)
      .def_readonly("num_constraints", &UncertaintyModel::num_constraints)
      .def_readonly("epsilon_hat", &UncertaintyModel::epsilon_hat)
      .def_readonly("safety", &UncertaintyModel::safety);
  m.def("budgeted_uncertainty", &budgeted_uncertainty, py::arg("network"), py::arg("lin"), py::arg("epsilon"),
        py::arg("distribution") = Distribution::gaussian, py::arg("mask") = PolicyMask::all_assets,
        py::arg("safety_override") = -1.0);
  m.def("sample_errors", &sample_errors, py::arg("unc"), py::arg("count"), py::arg("seed"));
  m.def("safety_parameter", &safety_parameter, py::arg("epsilon_hat"), py::arg("distribution"));

  py::class_<PolicyOptions>(m, "PolicyOptions")
      .def(py::init<>())
      .def_readwrite("psi_pressure", &PolicyOptions::psi_pressure)
      .def_readwrite("psi_flow", &PolicyOptions::psi_flow)
      .def_readwrite("mask", &PolicyOptions::mask);

  py::class_<PolicySolution>(m, "PolicySolution")
      .def_readonly("status", &PolicySolution::status)
      .def_readonly("inaccurate", &PolicySolution::inaccurate)
      .def_readonly("iterations", &PolicySolution::iterations)
      .def_readonly("objective", &PolicySolution::objective)
      .def_readonly("relative_gap", &PolicySolution::relative_gap)
      .def_readonly("message", &PolicySolution::message)
      .def_readonly("safety", &PolicySolution::safety)
      .def_readonly("injection", &PolicySolution::injection)
      .def_readonly("regulation", &PolicySolution::regulation)
      .def_readonly("flow", &PolicySolution::flow)
      .def_readonly("pressure", &PolicySolution::pressure)
      .def_readonly("alpha", &PolicySolution::alpha)
      .def_readonly("beta", &PolicySolution::beta)
      .def_readonly("std_pressure", &PolicySolution::std_pressure)
      .def_readonly("std_flow", &PolicySolution::std_flow)
      .def_readonly("lambda_c", &PolicySolution::lambda_c)
      .def_readonly("lambda_r", &PolicySolution::lambda_r)
      .def_property_readonly("optimal", &PolicySolution::optimal);
  m.def(
      "optimize_policies",
      [](const GasNetwork& net, const LinearizedModel& lin, const UncertaintyModel& unc, const PolicyOptions& opt) {
        return optimize_policies(net, lin, unc, opt);
      },
      py::arg("network"), py::arg("lin"), py::arg("unc"), py::arg("options") = PolicyOptions{},
      py::call_guard<py::gil_scoped_release>());

  // Conic standard form min cᵀx s.t. Ax = b, h − Gx ∈ R₊^l × SOC..., for external solvers.
  m.def(
      "policy_standard_form",
      [](const GasNetwork& net, const LinearizedModel& lin, const UncertaintyModel& unc, const PolicyOptions& opt) {
        const PolicyProgram prog = assemble(net, lin, unc, opt);
        const StandardForm sf = prog.program.standard_form();
        py::dict d;
        d["c"] = sf.c;
        d["A"] = sf.A;
        d["b"] = sf.b;
        d["G"] = sf.G;
        d["h"] = sf.h;
        d["nonneg_dim"] = sf.nonneg_dim;
        d["soc_dims"] = sf.soc_dims;
        d["objective_constant"] = prog.objective_constant;
        return d;
      },
      py::arg("network"), py::arg("lin"), py::arg("unc"), py::arg("options") = PolicyOptions{});

  m.def(
      "revenues",
      [](const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net, const UncertaintyModel& unc) {
        return revenue_dict(revenues(sol, lin, net, unc));
      },
      py::arg("solution"), py::arg("lin"), py::arg("network"), py::arg("unc"));
  m.def(
      "stationarity",
      [](const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net, const UncertaintyModel& unc,
         const PolicyOptions& opt) {
        py::dict d;
        for (const auto& [name, v] : check_stationarity(sol, lin, net, unc, opt).blocks) d[py::str(name)] = v;
        return d;
      },
      py::arg("solution"), py::arg("lin"), py::arg("network"), py::arg("unc"), py::arg("options") = PolicyOptions{});

  py::class_<ViolationReport>(m, "ViolationReport")
      .def_readonly("samples", &ViolationReport::samples)
      .def_readonly("joint_violations", &ViolationReport::joint_violations)
      .def_readonly("joint_frequency", &ViolationReport::joint_frequency)
      .def_readonly("joint_ci_low", &ViolationReport::joint_ci_low)
      .def_readonly("joint_ci_high", &ViolationReport::joint_ci_high);
  m.def("evaluate_policies",
        [](const PolicySolution& sol, const LinearizedModel& lin, const GasNetwork& net, const MatrixXd& samples) {
          return evaluate_policies(sol, lin, net, samples);
        },
        py::arg("solution"), py::arg("lin"), py::arg("network"), py::arg("samples"));
  m.def("sample_complexity", &sample_complexity, py::arg("p"), py::arg("v"));
}
