"""Writes the synthetic 24-node meshed network used by the examples and tests."""
import json
import sys


def main(path):
    nodes = []
    suppliers = {1: (1.0, 0.002, 60.0), 9: (1.6, 0.004, 25.0), 15: (2.2, 0.006, 20.0), 21: (2.6, 0.008, 15.0)}
    demand = {2: 3.0, 3: 4.0, 4: 2.5, 5: 3.5, 6: 2.0, 7: 3.0, 8: 4.5, 10: 2.5, 11: 3.0, 12: 2.0, 13: 3.5,
              14: 2.5, 16: 3.0, 17: 4.0, 18: 2.0, 19: 3.0, 20: 2.5, 22: 3.5, 23: 2.0, 24: 3.0}
    for i in range(1, 25):
        n = {"id": i, "pressure_min": 1600.0, "pressure_max": 4900.0}
        if i in suppliers:
            c1, c2, cap = suppliers[i]
            n.update(injection_min=0.0, injection_max=cap, cost_linear=c1, cost_quadratic=c2)
        if i in demand:
            n.update(extraction_mean=demand[i], extraction_stddev=round(0.15 * demand[i], 4))
        nodes.append(n)
    nodes[0]["pressure_max"] = 4900.0
    edges = []

    def pipe(a, b, w):
        edges.append({"from": a, "to": b, "w": w})

    # two rings joined by cross links
    for a, b in [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 8), (8, 9), (9, 10), (10, 11), (11, 12)]:
        pipe(a, b, 0.8)
    for a, b in [(13, 14), (14, 15), (15, 16), (16, 17), (17, 18), (18, 19), (19, 20), (20, 21), (21, 22),
                 (22, 23), (23, 24)]:
        pipe(a, b, 0.8)
    pipe(12, 1, 0.6)
    pipe(24, 13, 0.6)
    pipe(6, 18, 0.4)
    edges.append({"from": 2, "to": 13, "w": 0.5, "kind": "compressor", "b": 1e-4,
                  "kappa_min": 0.0, "kappa_max": 1500.0})
    edges.append({"from": 3, "to": 23, "w": 0.5, "kind": "compressor", "b": 1e-4,
                  "kappa_min": 0.0, "kappa_max": 1500.0})
    edges.append({"from": 9, "to": 16, "w": 0.5, "kind": "valve", "b": 1e-4,
                  "kappa_min": -1500.0, "kappa_max": 0.0})
    edges.append({"from": 10, "to": 20, "w": 0.5, "kind": "valve", "b": 1e-4,
                  "kappa_min": -1500.0, "kappa_max": 0.0})
    net = {"name": "mesh24", "reference_node": 1, "nodes": nodes, "edges": edges}
    with open(path, "w") as f:
        json.dump(net, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "mesh24.json")
