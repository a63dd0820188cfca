#include "ccgas/state.hpp"

#include "ccgas/error.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ccgas {

namespace {

using json = nlohmann::json;
const char* kModule = "steady-state";

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

std::vector<double> to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd from_json(const json& j, const char* key, Index expected) {
  if (!j.contains(key) || !j[key].is_array())
    throw ParseError(kModule, std::string("solution file: missing array '") + key + "'");
  const auto v = j[key].get<std::vector<double>>();
  if (static_cast<Index>(v.size()) != expected)
    throw DimensionError(kModule, std::string("solution file: '") + key + "' has wrong length");
  return Eigen::Map<const VectorXd>(v.data(), expected);
}

}  // namespace

double physics_residual(const GasNetwork& net, const StationaryPoint& pt, const VectorXd& extraction) {
  const MatrixXd& A = net.incidence();
  const MatrixXd& B = net.active_incidence();
  const VectorXd w = net.friction();
  const VectorXd cons = A * pt.flow - (pt.injection - B * pt.regulation - extraction);
  const VectorXd drop = w.cwiseProduct(A.transpose() * pt.pressure + pt.regulation);
  const VectorXd weym = pt.flow.cwiseProduct(pt.flow.cwiseAbs()) - drop;
  const double flow_scale =
      std::max({1.0, inf_norm(pt.flow), inf_norm(pt.injection), inf_norm(extraction)});
  const double drop_scale = std::max(
      {1.0, inf_norm(pt.flow.cwiseAbs2()), inf_norm(w.cwiseProduct(A.transpose() * pt.pressure))});
  return std::max(inf_norm(cons) / flow_scale, inf_norm(weym) / drop_scale);
}

double limit_violation(const GasNetwork& net, const StationaryPoint& pt) {
  const double pscale = std::max(1.0, inf_norm(net.pressure_max()));
  const double fscale = std::max({1.0, inf_norm(net.injection_max()), inf_norm(pt.flow)});
  double v = 0.0;
  for (Index k = 0; k < net.num_nodes(); ++k) {
    const Node& n = net.node(k);
    v = std::max(v, (n.pressure_min - pt.pressure(k)) / pscale);
    v = std::max(v, (pt.pressure(k) - n.pressure_max) / pscale);
    v = std::max(v, (n.injection_min - pt.injection(k)) / fscale);
    v = std::max(v, (pt.injection(k) - n.injection_max) / fscale);
  }
  for (Index l = 0; l < net.num_edges(); ++l) {
    const Edge& e = net.edge(l);
    v = std::max(v, (e.kappa_min - pt.regulation(l)) / pscale);
    v = std::max(v, (pt.regulation(l) - e.kappa_max) / pscale);
    if (net.is_active(l)) v = std::max(v, -pt.flow(l) / fscale);
  }
  return v;
}

std::string serialize_point(const StationaryPoint& pt) {
  json j;
  j["flow"] = to_vec(pt.flow);
  j["pressure"] = to_vec(pt.pressure);
  j["regulation"] = to_vec(pt.regulation);
  j["injection"] = to_vec(pt.injection);
  j["residual_norm"] = pt.residual_norm;
  j["objective"] = pt.objective;
  return j.dump(2);
}

StationaryPoint parse_point(std::string_view json_text, const GasNetwork& net) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(kModule, std::string("malformed solution file: ") + e.what());
  }
  StationaryPoint pt;
  pt.flow = from_json(j, "flow", net.num_edges());
  pt.pressure = from_json(j, "pressure", net.num_nodes());
  pt.regulation = from_json(j, "regulation", net.num_edges());
  pt.injection = from_json(j, "injection", net.num_nodes());
  pt.residual_norm = j.value("residual_norm", 0.0);
  pt.objective = j.value("objective", 0.0);
  return pt;
}

void save_point(const StationaryPoint& pt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(kModule, "cannot write '" + path.string() + "'");
  out << serialize_point(pt) << '\n';
}

StationaryPoint load_point(const std::filesystem::path& path, const GasNetwork& net) {
  std::ifstream in(path);
  if (!in) throw ParseError(kModule, "cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_point(ss.str(), net);
}

}  // namespace ccgas
