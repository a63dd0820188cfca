#pragma once

#include "ccgas/network.hpp"

#include <initializer_list>
#include <random>

namespace fixtures {

using namespace ccgas;

inline Node node(int id, double pmin, double pmax, double tmin = 0, double tmax = 0, double c1 = 0,
                 double c2 = 0, double d = 0, double sd = 0) {
  Node n;
  n.id = id;
  n.pressure_min = pmin;
  n.pressure_max = pmax;
  n.injection_min = tmin;
  n.injection_max = tmax;
  n.cost_linear = c1;
  n.cost_quadratic = c2;
  n.extraction_mean = d;
  n.extraction_stddev = sd;
  return n;
}

inline Edge pipe(int from, int to, double w) {
  Edge e;
  e.from = from;
  e.to = to;
  e.w = w;
  return e;
}

inline Edge compressor(int from, int to, double w, double kmin, double kmax, double b) {
  Edge e = pipe(from, to, w);
  e.kind = EdgeKind::compressor;
  e.kappa_min = kmin;
  e.kappa_max = kmax;
  e.b = b;
  return e;
}

inline Edge valve(int from, int to, double w, double kmin, double kmax, double b) {
  Edge e = compressor(from, to, w, kmin, kmax, b);
  e.kind = EdgeKind::valve;
  return e;
}

inline GasNetwork make(std::vector<Node> nodes, std::vector<Edge> edges, int ref = 1) {
  NetworkData d;
  d.name = "fixture";
  d.nodes = std::move(nodes);
  d.edges = std::move(edges);
  d.reference_node = ref;
  return GasNetwork(std::move(d));
}

/// Supplier at node 1 feeding a consumer at node 2 through one pipe.
inline GasNetwork single_pipe(double w = 1.0, double demand = 1.0, double c1 = 1.0, double c2 = 0.0,
                              double sd = 0.0) {
  return make({node(1, 0, 100, 0, 10, c1, c2), node(2, 0, 100, 0, 0, 0, 0, demand, sd)},
              {pipe(1, 2, w)});
}

/// Triangle 1-2-3 with a supplier at 1 and consumers at 2 and 3.
inline GasNetwork triangle(double w12 = 1.0, double w13 = 2.0, double w23 = 0.5) {
  return make({node(1, 0, 100, 0, 10, 1.0), node(2, 0, 100, 0, 0, 0, 0, 1.0),
               node(3, 0, 100, 0, 0, 0, 0, 2.0)},
              {pipe(1, 2, w12), pipe(1, 3, w13), pipe(2, 3, w23)});
}

/// Small meshed network: two suppliers with different costs, one compressor,
/// one valve and three uncertain consumers.
inline GasNetwork small_mesh() {
  return make(
      {node(1, 20, 80, 0, 12, 1.0, 0.05), node(2, 10, 80, 0, 0, 0, 0, 2.0, 0.2),
       node(3, 10, 80, 0, 8, 2.0, 0.1), node(4, 10, 80, 0, 0, 0, 0, 3.0, 0.3),
       node(5, 10, 80, 0, 0, 0, 0, 2.5, 0.25), node(6, 10, 80, 0, 0, 0, 0, 0, 0)},
      {pipe(1, 2, 2.0), compressor(2, 4, 1.5, 0, 20, 0.01), pipe(3, 4, 2.0), pipe(4, 5, 1.5),
       pipe(2, 6, 2.5), valve(6, 5, 2.0, -20, 0, 0.0 + 1e-3), pipe(3, 6, 1.0)},
      1);
}

/// Random connected network with N nodes: a random spanning tree plus
/// chords, a cheap reference supplier at node 1, a second supplier at node 2,
/// uncertain consumers elsewhere and, for N ≥ 5, one compressor and one valve
/// away from the reference.
inline GasNetwork random_mesh(unsigned seed, int N) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(0.5, 2.0);
  std::vector<Node> nodes;
  for (int k = 1; k <= N; ++k) {
    if (k == 1)
      nodes.push_back(node(k, 100, 4000, 0, 100, 1.0, 0.01));
    else if (k == 2)
      nodes.push_back(node(k, 100, 4000, 0, 50, 1.5 + 0.5 * U(rng), 0.02));
    else {
      const double d = U(rng);
      nodes.push_back(node(k, 100, 4000, 0, 0, 0, 0, d, 0.1 * d));
    }
  }
  std::vector<Edge> edges;
  auto connected = [&edges](int a, int b) {
    for (const Edge& e : edges)
      if ((e.from == a && e.to == b) || (e.from == b && e.to == a)) return true;
    return false;
  };
  for (int k = 2; k <= N; ++k) {
    std::uniform_int_distribution<int> parent(1, k - 1);
    edges.push_back(pipe(parent(rng), k, U(rng)));
  }
  for (int k = 3; k <= N; k += 2)
    if (!connected(k, k - 2)) edges.push_back(pipe(k - 2, k, U(rng)));
  if (N >= 5) {
    // Promote the first two tree edges that avoid the reference.
    int promoted = 0;
    for (Edge& e : edges) {
      if (promoted == 2) break;
      if (e.from == 1 || e.to == 1) continue;
      if (promoted == 0) e = compressor(e.from, e.to, e.w, 0, 500, 1e-3);
      else e = valve(e.from, e.to, e.w, -500, 0, 1e-3);
      ++promoted;
    }
  }
  return make(std::move(nodes), std::move(edges), 1);
}

}  // namespace fixtures
