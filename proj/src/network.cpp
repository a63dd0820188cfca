#include "ccgas/network.hpp"

#include "ccgas/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

namespace ccgas {

namespace {

using json = nlohmann::json;

const char* kModule = "network";

std::string edge_label(const Edge& e) {
  return "(" + std::to_string(e.from) + "," + std::to_string(e.to) + ")";
}

[[noreturn]] void invalid(const std::string& what) { throw ValidationError(kModule, what); }

template <typename T>
T field(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(kModule, where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ParseError(kModule, where + ": field '" + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return field<T>(j, key, where);
}

}  // namespace

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::passive: return "passive";
    case EdgeKind::compressor: return "compressor";
    case EdgeKind::valve: return "valve";
  }
  return "passive";
}

EdgeKind edge_kind_from_string(std::string_view s) {
  if (s == "passive") return EdgeKind::passive;
  if (s == "compressor") return EdgeKind::compressor;
  if (s == "valve") return EdgeKind::valve;
  throw ParseError(kModule, "unknown edge kind '" + std::string(s) + "'");
}

GasNetwork::GasNetwork(NetworkData data) : data_(std::move(data)) {
  const auto& nodes = data_.nodes;
  const auto& edges = data_.edges;
  if (nodes.size() < 2) invalid("network needs at least two nodes");
  if (edges.empty()) invalid("network has no edges");

  std::unordered_map<int, Index> index_of;
  for (size_t k = 0; k < nodes.size(); ++k) {
    const Node& n = nodes[k];
    if (!index_of.emplace(n.id, static_cast<Index>(k)).second)
      invalid("duplicate node id " + std::to_string(n.id));
    const std::string where = "node " + std::to_string(n.id);
    if (n.pressure_min > n.pressure_max) invalid(where + ": pressure_min > pressure_max");
    if (n.pressure_min < 0.0) invalid(where + ": negative squared pressure limit");
    if (n.injection_min > n.injection_max) invalid(where + ": injection_min > injection_max");
    if (n.cost_quadratic < 0.0) invalid(where + ": cost_quadratic < 0");
    if (n.extraction_stddev < 0.0) invalid(where + ": extraction_stddev < 0");
  }

  auto lookup = [&](int id, const Edge& e) {
    auto it = index_of.find(id);
    if (it == index_of.end())
      invalid("edge " + edge_label(e) + " references unknown node " + std::to_string(id));
    return it->second;
  };

  std::set<std::pair<Index, Index>> seen;
  for (size_t l = 0; l < edges.size(); ++l) {
    const Edge& e = edges[l];
    const std::string where = "edge " + edge_label(e);
    const Index from = lookup(e.from, e);
    const Index to = lookup(e.to, e);
    if (from == to) invalid(where + ": self-loop");
    if (!seen.insert({std::min(from, to), std::max(from, to)}).second)
      invalid(where + ": parallel edge");
    if (!(e.w > 0.0)) invalid(where + ": w must be positive");
    if (e.kappa_min > e.kappa_max) invalid(where + ": kappa_min > kappa_max");
    switch (e.kind) {
      case EdgeKind::passive:
        if (e.kappa_min != 0.0 || e.kappa_max != 0.0)
          invalid(where + ": passive edge with non-zero regulation limits");
        break;
      case EdgeKind::compressor:
        if (e.kappa_min < 0.0) invalid(where + ": compressor with kappa_min < 0");
        if (!(e.b > 0.0)) invalid(where + ": active edge needs b > 0");
        compressors_.push_back(static_cast<Index>(l));
        active_.push_back(static_cast<Index>(l));
        break;
      case EdgeKind::valve:
        if (e.kappa_max > 0.0) invalid(where + ": valve with kappa_max > 0");
        if (!(e.b > 0.0)) invalid(where + ": active edge needs b > 0");
        valves_.push_back(static_cast<Index>(l));
        active_.push_back(static_cast<Index>(l));
        break;
    }
    from_.push_back(from);
    to_.push_back(to);
  }

  // Connectivity of the underlying undirected graph.
  const auto N = static_cast<Index>(nodes.size());
  std::vector<std::vector<Index>> adj(static_cast<size_t>(N));
  for (size_t l = 0; l < edges.size(); ++l) {
    adj[static_cast<size_t>(from_[l])].push_back(to_[l]);
    adj[static_cast<size_t>(to_[l])].push_back(from_[l]);
  }
  std::vector<bool> visited(static_cast<size_t>(N), false);
  std::queue<Index> q;
  q.push(0);
  visited[0] = true;
  Index reached = 1;
  while (!q.empty()) {
    const Index k = q.front();
    q.pop();
    for (Index m : adj[static_cast<size_t>(k)]) {
      if (!visited[static_cast<size_t>(m)]) {
        visited[static_cast<size_t>(m)] = true;
        ++reached;
        q.push(m);
      }
    }
  }
  if (reached != N) invalid("network is not connected");

  auto ref = index_of.find(data_.reference_node);
  if (ref == index_of.end())
    invalid("reference node " + std::to_string(data_.reference_node) + " does not exist");
  reference_ = ref->second;
  if (nodes[static_cast<size_t>(reference_)].extraction_stddev != 0.0)
    invalid("reference node " + std::to_string(data_.reference_node) +
            " hosts a stochastic extraction");
  for (Index l : active_) {
    if (from_[static_cast<size_t>(l)] == reference_ || to_[static_cast<size_t>(l)] == reference_)
      invalid("reference node " + std::to_string(data_.reference_node) +
              " is an endpoint of active edge " + edge_label(edges[static_cast<size_t>(l)]));
  }

  if (data_.correlation) {
    const MatrixXd& C = *data_.correlation;
    if (C.rows() != N || C.cols() != N) invalid("correlation matrix must be N×N");
    if (!C.isApprox(C.transpose(), 1e-12)) invalid("correlation matrix is not symmetric");
    for (Index i = 0; i < N; ++i) {
      if (std::abs(C(i, i) - 1.0) > 1e-12) invalid("correlation diagonal must be 1");
      for (Index j = 0; j < N; ++j)
        if (std::abs(C(i, j)) > 1.0 + 1e-12) invalid("correlation entry outside [-1,1]");
    }
  }

  for (Index k = 0; k < N; ++k) {
    const Node& n = nodes[static_cast<size_t>(k)];
    if (n.injection_min < n.injection_max) suppliers_.push_back(k);
  }

  const auto E = static_cast<Index>(edges.size());
  A_ = MatrixXd::Zero(N, E);
  B_ = MatrixXd::Zero(N, E);
  for (Index l = 0; l < E; ++l) {
    const Index s = from_[static_cast<size_t>(l)];
    A_(s, l) = 1.0;
    A_(to_[static_cast<size_t>(l)], l) = -1.0;
    const Edge& e = edges[static_cast<size_t>(l)];
    if (e.kind == EdgeKind::compressor) B_(s, l) = e.b;
    if (e.kind == EdgeKind::valve) B_(s, l) = -e.b;
  }
}

Index GasNetwork::node_index(int id) const {
  for (size_t k = 0; k < data_.nodes.size(); ++k)
    if (data_.nodes[k].id == id) return static_cast<Index>(k);
  throw ValidationError(kModule, "unknown node id " + std::to_string(id));
}

bool GasNetwork::is_supplier(Index k) const {
  return std::find(suppliers_.begin(), suppliers_.end(), k) != suppliers_.end();
}

#define CCGAS_NODE_VECTOR(fn, member)                           \
  VectorXd GasNetwork::fn() const {                             \
    VectorXd v(num_nodes());                                    \
    for (Index k = 0; k < num_nodes(); ++k) v(k) = node(k).member; \
    return v;                                                   \
  }
#define CCGAS_EDGE_VECTOR(fn, member)                           \
  VectorXd GasNetwork::fn() const {                             \
    VectorXd v(num_edges());                                    \
    for (Index l = 0; l < num_edges(); ++l) v(l) = edge(l).member; \
    return v;                                                   \
  }

CCGAS_NODE_VECTOR(pressure_min, pressure_min)
CCGAS_NODE_VECTOR(pressure_max, pressure_max)
CCGAS_NODE_VECTOR(injection_min, injection_min)
CCGAS_NODE_VECTOR(injection_max, injection_max)
CCGAS_NODE_VECTOR(cost_linear, cost_linear)
CCGAS_NODE_VECTOR(cost_quadratic, cost_quadratic)
CCGAS_NODE_VECTOR(extraction_mean, extraction_mean)
CCGAS_NODE_VECTOR(extraction_stddev, extraction_stddev)
CCGAS_EDGE_VECTOR(friction, w)
CCGAS_EDGE_VECTOR(kappa_min, kappa_min)
CCGAS_EDGE_VECTOR(kappa_max, kappa_max)

#undef CCGAS_NODE_VECTOR
#undef CCGAS_EDGE_VECTOR

VectorXd GasNetwork::conversion() const {
  VectorXd v = VectorXd::Zero(num_edges());
  for (Index l : active_) v(l) = edge(l).b;
  return v;
}

MatrixXd GasNetwork::covariance() const {
  const VectorXd sd = extraction_stddev();
  MatrixXd C = data_.correlation ? *data_.correlation : MatrixXd::Identity(num_nodes(), num_nodes());
  return sd.asDiagonal() * C * sd.asDiagonal();
}

MatrixXd incidence_matrix(const GasNetwork& net) { return net.incidence(); }
MatrixXd active_incidence(const GasNetwork& net) { return net.active_incidence(); }

NetworkData parse_network_data(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(kModule, std::string("malformed network file: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(kModule, "network file must be a JSON object");

  NetworkData data;
  data.name = field_or<std::string>(j, "name", "", "network");
  if (!j.contains("nodes") || !j["nodes"].is_array())
    throw ParseError(kModule, "missing 'nodes' array");
  if (!j.contains("edges") || !j["edges"].is_array())
    throw ParseError(kModule, "missing 'edges' array");

  size_t i = 0;
  for (const json& jn : j["nodes"]) {
    const std::string where = "nodes[" + std::to_string(i++) + "]";
    Node n;
    n.id = field<int>(jn, "id", where);
    n.pressure_min = field<double>(jn, "pressure_min", where);
    n.pressure_max = field<double>(jn, "pressure_max", where);
    n.injection_min = field_or<double>(jn, "injection_min", 0.0, where);
    n.injection_max = field_or<double>(jn, "injection_max", 0.0, where);
    n.cost_linear = field_or<double>(jn, "cost_linear", 0.0, where);
    n.cost_quadratic = field_or<double>(jn, "cost_quadratic", 0.0, where);
    n.extraction_mean = field_or<double>(jn, "extraction_mean", 0.0, where);
    n.extraction_stddev = field_or<double>(jn, "extraction_stddev", 0.0, where);
    data.nodes.push_back(n);
  }
  i = 0;
  for (const json& je : j["edges"]) {
    const std::string where = "edges[" + std::to_string(i++) + "]";
    Edge e;
    e.from = field<int>(je, "from", where);
    e.to = field<int>(je, "to", where);
    e.w = field<double>(je, "w", where);
    e.kind = edge_kind_from_string(field_or<std::string>(je, "kind", "passive", where));
    e.b = field_or<double>(je, "b", 0.0, where);
    e.kappa_min = field_or<double>(je, "kappa_min", 0.0, where);
    e.kappa_max = field_or<double>(je, "kappa_max", 0.0, where);
    data.edges.push_back(e);
  }
  data.reference_node = field<int>(j, "reference_node", "network");

  if (j.contains("correlation") && !j["correlation"].is_null()) {
    const json& jc = j["correlation"];
    if (!jc.is_array()) throw ParseError(kModule, "'correlation' must be a matrix");
    const auto N = static_cast<Index>(jc.size());
    MatrixXd C(N, N);
    for (Index r = 0; r < N; ++r) {
      const json& row = jc[static_cast<size_t>(r)];
      if (!row.is_array() || static_cast<Index>(row.size()) != N)
        throw ParseError(kModule, "'correlation' must be square");
      for (Index c = 0; c < N; ++c) C(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
    data.correlation = std::move(C);
  }
  return data;
}

GasNetwork parse_network(std::string_view json_text) {
  return GasNetwork(parse_network_data(json_text));
}

GasNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(kModule, "cannot open network file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

std::string serialize_network(const GasNetwork& net) {
  json j;
  j["name"] = net.name();
  j["nodes"] = json::array();
  for (const Node& n : net.nodes()) {
    j["nodes"].push_back({{"id", n.id},
                          {"pressure_min", n.pressure_min},
                          {"pressure_max", n.pressure_max},
                          {"injection_min", n.injection_min},
                          {"injection_max", n.injection_max},
                          {"cost_linear", n.cost_linear},
                          {"cost_quadratic", n.cost_quadratic},
                          {"extraction_mean", n.extraction_mean},
                          {"extraction_stddev", n.extraction_stddev}});
  }
  j["edges"] = json::array();
  for (const Edge& e : net.edges()) {
    j["edges"].push_back({{"from", e.from},
                          {"to", e.to},
                          {"w", e.w},
                          {"kind", std::string(to_string(e.kind))},
                          {"b", e.b},
                          {"kappa_min", e.kappa_min},
                          {"kappa_max", e.kappa_max}});
  }
  j["reference_node"] = net.data().reference_node;
  if (net.data().correlation) {
    const MatrixXd& C = *net.data().correlation;
    json jc = json::array();
    for (Index r = 0; r < C.rows(); ++r) {
      json row = json::array();
      for (Index c = 0; c < C.cols(); ++c) row.push_back(C(r, c));
      jc.push_back(row);
    }
    j["correlation"] = jc;
  }
  return j.dump(2);
}

void save_network(const GasNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(kModule, "cannot write network file '" + path.string() + "'");
  out << serialize_network(net) << '\n';
}

}  // namespace ccgas
