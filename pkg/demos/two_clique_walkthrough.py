"""
Two links that cannot share the channel
=======================================

The smallest interesting network: two links in conflict.  We ask for a
service rate of 1/4 on each and compare three answers for the fugacities.
"""

import numpy as np

from csmabethe import bethe, csma, oracle, topology

net = topology.build_conflict_graph_network(topology.complete_adjacency(2))
graph = topology.build_interference_graph(net)
feasible = topology.enumerate_all_local_feasible(net, graph)

# Each link sees both links; the pattern "both on" is missing.
print("local patterns at link 0:", feasible[0].patterns().astype(int).tolist())

s = np.array([0.25, 0.25])

# Local fugacities come from a small max-entropy problem per link.
local = bethe.solve_local_gibbsian(feasible[0], s)
print("local fugacities e^beta:", np.exp(local.beta).round(6).tolist())

vertex = bethe.bethe_fugacities(net, s, graph, feasible)
edge = bethe.conflict_fugacities(graph, s, "edge")
exact = oracle.exact_fugacities(s, oracle.enumerate_feasible_schedules(net))
print(f"vertex-centric lambda = {vertex.lambdas[0]:.6f}")
print(f"edge-centric lambda   = {edge.lambdas[0]:.6f}")
print(f"exact lambda          = {exact.lambdas[0]:.6f}")

# The conflict graph here is a tree, so the edge-centric answer is exact.
# The vertex-centric one over-shoots; the simulator shows by how much.
for name, fug in [("vertex", vertex), ("edge", edge)]:
    stats = csma.simulate(net, fug, 1_000_000, seed=0)
    print(f"{name:>6}: achieved {stats.achieved.round(4).tolist()}, "
          f"error {csma.bethe_error(s, stats.achieved):.4f}")
