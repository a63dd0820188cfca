#include "ccgas/error.hpp"
#include "ccgas/network.hpp"
#include "ccgas/state.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>

using namespace ccgas;
using namespace fixtures;

namespace {

const char* kTriangle = R"({
  "name": "tri",
  "reference_node": 1,
  "nodes": [
    {"id": 1, "pressure_min": 10, "pressure_max": 90, "injection_max": 10, "cost_linear": 1.0},
    {"id": 2, "pressure_min": 10, "pressure_max": 90, "extraction_mean": 2.0, "extraction_stddev": 0.2},
    {"id": 3, "pressure_min": 10, "pressure_max": 90, "extraction_mean": 1.0, "extraction_stddev": 0.1}
  ],
  "edges": [
    {"from": 1, "to": 2, "w": 1.0},
    {"from": 2, "to": 3, "w": 0.5, "kind": "compressor", "b": 0.01, "kappa_min": 0, "kappa_max": 10},
    {"from": 1, "to": 3, "w": 2.0}
  ],
  "correlation": [[1, 0, 0], [0, 1, 0.5], [0, 0.5, 1]]
})";

void expect_invalid(NetworkData d, const std::string& fragment) {
  try {
    GasNetwork net(std::move(d));
    FAIL("no error for: " << fragment);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(fragment) != std::string::npos);
  }
}

NetworkData base() { return small_mesh().data(); }

}  // namespace

TEST_CASE("network: parse, matrices and covariance") {
  const GasNetwork net = parse_network(kTriangle);
  CHECK(net.name() == "tri");
  CHECK(net.num_nodes() == 3);
  CHECK(net.num_edges() == 3);
  const MatrixXd& A = net.incidence();
  CHECK(A(0, 0) == 1.0);
  CHECK(A(1, 0) == -1.0);
  CHECK(A(2, 0) == 0.0);
  CHECK(A.colwise().sum().cwiseAbs().maxCoeff() == 0.0);
  const MatrixXd& B = net.active_incidence();
  CHECK(B(1, 1) == doctest::Approx(0.01));
  CHECK(B.col(0).norm() == 0.0);
  CHECK(net.compressors() == std::vector<Index>{1});
  CHECK(net.active_edges() == std::vector<Index>{1});
  CHECK(net.suppliers() == std::vector<Index>{0});
  const MatrixXd S = net.covariance();
  CHECK(S(1, 1) == doctest::Approx(0.04));
  CHECK(S(1, 2) == doctest::Approx(0.5 * 0.2 * 0.1));
  CHECK(S.row(0).norm() == 0.0);
}

TEST_CASE("network: serialization round trip") {
  const GasNetwork net = parse_network(kTriangle);
  const GasNetwork again = parse_network(serialize_network(net));
  CHECK(serialize_network(again) == serialize_network(net));
  CHECK((again.covariance() - net.covariance()).norm() == 0.0);

  const auto path = std::filesystem::temp_directory_path() / "ccgas_network_roundtrip.json";
  save_network(net, path);
  CHECK(serialize_network(load_network(path)) == serialize_network(net));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_network("/nonexistent/net.json"), ParseError);
}

TEST_CASE("network: stationary point files keep the network ordering") {
  const GasNetwork net = small_mesh();
  StationaryPoint p;
  p.flow = VectorXd::LinSpaced(net.num_edges(), 1.0, 7.0);
  p.pressure = VectorXd::LinSpaced(net.num_nodes(), 30.0, 80.0);
  p.regulation = VectorXd::Zero(net.num_edges());
  p.injection = VectorXd::Zero(net.num_nodes());
  p.objective = 3.25;
  const StationaryPoint q = parse_point(serialize_point(p), net);
  CHECK(q.flow == p.flow);
  CHECK(q.pressure == p.pressure);
  CHECK(q.objective == 3.25);
  CHECK_THROWS_AS(parse_point("{\"flow\": [1]}", net), Error);
}

TEST_CASE("network: malformed files") {
  CHECK_THROWS_AS(parse_network("{"), ParseError);
  CHECK_THROWS_AS(parse_network("[]"), ParseError);
  CHECK_THROWS_AS(parse_network(R"({"nodes": [], "reference_node": 1})"), ParseError);
  CHECK_THROWS_AS(parse_network(R"({"nodes": [{"id": 1}], "edges": [], "reference_node": 1})"), ParseError);
  CHECK_THROWS_AS(edge_kind_from_string("pump"), ParseError);
}

TEST_CASE("network: structural validation names the violated rule") {
  {
    NetworkData d = base();
    d.nodes[1].id = 1;
    expect_invalid(d, "duplicate node id");
  }
  {
    NetworkData d = base();
    d.edges.push_back(pipe(2, 1, 1.0));
    expect_invalid(d, "parallel edge");
  }
  {
    NetworkData d = base();
    d.edges[0].w = 0.0;
    expect_invalid(d, "w must be positive");
  }
  {
    NetworkData d = base();
    d.edges[0].kappa_max = 1.0;
    expect_invalid(d, "passive edge with non-zero regulation");
  }
  {
    NetworkData d = base();
    d.edges[1].b = 0.0;
    expect_invalid(d, "b > 0");
  }
  {
    NetworkData d = base();
    d.edges[5].kappa_max = 3.0;
    expect_invalid(d, "valve with kappa_max > 0");
  }
  {
    NetworkData d = base();
    d.nodes[0].extraction_stddev = 0.1;
    expect_invalid(d, "reference node 1");
  }
  {
    NetworkData d = base();
    d.reference_node = 2;  // endpoint of the compressor 2→4
    expect_invalid(d, "reference node 2");
  }
  {
    NetworkData d = base();
    d.nodes.push_back(node(7, 0, 10));
    expect_invalid(d, "not connected");
  }
  {
    NetworkData d = base();
    d.nodes[3].pressure_min = 100.0;
    expect_invalid(d, "pressure_min > pressure_max");
  }
  {
    NetworkData d = base();
    d.correlation = MatrixXd::Identity(6, 6);
    (*d.correlation)(1, 2) = 0.3;
    expect_invalid(d, "not symmetric");
  }
}
