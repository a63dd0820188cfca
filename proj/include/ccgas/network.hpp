#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccgas {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class EdgeKind { passive, compressor, valve };

std::string_view to_string(EdgeKind kind);
EdgeKind edge_kind_from_string(std::string_view s);

/// Node record as stored in the network file. Pressures are squared
/// pressures; injections and extractions are mass flow rates.
struct Node {
  int id = 0;
  double pressure_min = 0.0;
  double pressure_max = 0.0;
  double injection_min = 0.0;
  double injection_max = 0.0;
  double cost_linear = 0.0;
  double cost_quadratic = 0.0;
  double extraction_mean = 0.0;
  double extraction_stddev = 0.0;
};

/// Directed pipeline from sending node `from` to receiving node `to`.
/// Regulation limits are in squared-pressure units and must be zero on
/// passive edges.
struct Edge {
  int from = 0;
  int to = 0;
  double w = 1.0;
  EdgeKind kind = EdgeKind::passive;
  double b = 0.0;
  double kappa_min = 0.0;
  double kappa_max = 0.0;
};

/// Raw, unvalidated contents of a network file.
struct NetworkData {
  std::string name;
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  int reference_node = 0;
  std::optional<MatrixXd> correlation;
};

/// Immutable, validated gas network. Node and edge ordering is the file
/// order, and every matrix and vector uses that ordering.
class GasNetwork {
 public:
  /// Validates `data`; throws ValidationError naming the violated invariant.
  explicit GasNetwork(NetworkData data);

  Index num_nodes() const { return static_cast<Index>(data_.nodes.size()); }
  Index num_edges() const { return static_cast<Index>(data_.edges.size()); }

  const std::string& name() const { return data_.name; }
  const std::vector<Node>& nodes() const { return data_.nodes; }
  const std::vector<Edge>& edges() const { return data_.edges; }
  const Node& node(Index k) const { return data_.nodes[static_cast<size_t>(k)]; }
  const Edge& edge(Index l) const { return data_.edges[static_cast<size_t>(l)]; }
  const NetworkData& data() const { return data_; }

  Index node_index(int id) const;
  Index reference() const { return reference_; }
  Index sending(Index l) const { return from_[static_cast<size_t>(l)]; }
  Index receiving(Index l) const { return to_[static_cast<size_t>(l)]; }

  /// N×E node-edge incidence (+1 sending, −1 receiving).
  const MatrixXd& incidence() const { return A_; }
  /// N×E sending-node/active-pipeline matrix with conversion factors.
  const MatrixXd& active_incidence() const { return B_; }

  const std::vector<Index>& active_edges() const { return active_; }
  const std::vector<Index>& compressors() const { return compressors_; }
  const std::vector<Index>& valves() const { return valves_; }
  bool is_active(Index l) const { return edge(l).kind != EdgeKind::passive; }

  /// Nodes whose injection is a decision (injection_min < injection_max).
  const std::vector<Index>& suppliers() const { return suppliers_; }
  bool is_supplier(Index k) const;

  VectorXd pressure_min() const;
  VectorXd pressure_max() const;
  VectorXd injection_min() const;
  VectorXd injection_max() const;
  VectorXd cost_linear() const;
  VectorXd cost_quadratic() const;
  VectorXd extraction_mean() const;
  VectorXd extraction_stddev() const;
  VectorXd friction() const;  // w
  VectorXd conversion() const;  // b (zero on passive edges)
  VectorXd kappa_min() const;
  VectorXd kappa_max() const;

  /// Σ = D C D with D = diag(stddev) and C the correlation (identity if absent).
  MatrixXd covariance() const;

 private:
  NetworkData data_;
  Index reference_ = 0;
  std::vector<Index> from_, to_;
  std::vector<Index> active_, compressors_, valves_, suppliers_;
  MatrixXd A_, B_;
};

MatrixXd incidence_matrix(const GasNetwork& net);
MatrixXd active_incidence(const GasNetwork& net);

NetworkData parse_network_data(std::string_view json_text);
GasNetwork parse_network(std::string_view json_text);
GasNetwork load_network(const std::filesystem::path& path);
std::string serialize_network(const GasNetwork& net);
void save_network(const GasNetwork& net, const std::filesystem::path& path);

}  // namespace ccgas
