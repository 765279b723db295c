"""
Local utility maximisation
==========================

Proportional fairness (log utilities) over the Bethe capacity region, solved
by a dual subgradient method where every link only talks to its neighbours.
"""

import numpy as np

from csmabethe import adaptive, harness, oracle, topology
from csmabethe.utility import log_utility

net = harness.random_conflict_network(15, seed=3)
res = adaptive.umax_run(net, log_utility(), theta=1.0, max_iters=200, stop_norm=0.0)

for t in range(0, 200, 25):
    print(f"iteration {t + 1:3d}  subgradient norm {res.subgradient_norm[t]:.4f}")
print("final rates:", res.rates[-1].round(3).tolist())

# A larger theta weights utility over entropy and tightens the guarantee
# sum U(s) >= optimum - sum_j log|I_j| / theta.  Check it on a small network
# where the optimum over the true capacity region can be found by brute force.
small = harness.random_conflict_network(5, plane_side=3.0, seed=1)
graph = topology.build_interference_graph(small)
feasible = topology.enumerate_all_local_feasible(small, graph)
_, best = oracle.utility_optimum_bruteforce(oracle.enumerate_feasible_schedules(small),
                                            log_utility())
slack = sum(np.log(f.size) for f in feasible)
for theta in (1.0, 10.0, 100.0):
    run = adaptive.umax_run(small, log_utility(), theta,
                            step=adaptive.scaled_harmonic_step(theta), max_iters=3000,
                            stop_norm=1e-6, graph=graph, feasible_sets=feasible)
    got = float(np.sum(np.log(run.rates[-1])))
    print(f"theta {theta:5.0f}: utility {got:8.4f}  bound {best - slack / theta:8.4f}  "
          f"optimum {best:8.4f}")

# The utility can exceed the optimum: the local constraints describe a region
# that contains the true capacity region, so the rates found here need not
# be exactly supportable by CSMA.
