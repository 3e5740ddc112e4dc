"""Leader-follower tracking with heterogeneous information access.

Four nonlinear followers form a chain; only the first one hears the leader
(a sine-forced autonomous system).  Every round each agent re-optimizes its
own window against the latest predictions it received, so the leader's
trajectory propagates down the chain within a few closed-loop steps: all
four first-state tracking errors drop below 0.016 in about a dozen steps.
"""

import numpy as np

from optcons import scenarios

spec = scenarios.load_preset("leader_follower")
print(f"scenario: {spec.name}, chain of {spec.topology.n} followers, "
      f"leader feeds agent(s) {sorted(spec.topology.leader_links)}")

result = scenarios.run_scenario(spec)
xl = result.leader_states

print("\n step   |x1-xl|_1st  |x2-xl|_1st  |x3-xl|_1st  |x4-xl|_1st")
for t in range(0, 31, 3):
    row = "   ".join(f"{abs(result.states[i][t, 0] - xl[t, 0]):10.4f}"
                     for i in (1, 2, 3, 4))
    print(f"  {t:4d}   {row}")

settled = []
for i in (1, 2, 3, 4):
    e1 = np.abs(result.states[i][:, 0] - xl[:, 0])
    bad = np.nonzero(e1 > 0.016)[0]
    settled.append(int(bad[-1]) + 1 if bad.size else 0)
print(f"\nfirst-state error <= 0.016 from step {max(settled)} on")
