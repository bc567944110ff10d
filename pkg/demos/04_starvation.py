"""A switch can keep its busy index small and still starve a packet.

The switch below always serves input 1 first.  Input 1 runs at line rate,
so the single packet waiting on input 2 never leaves, even though the
amount of data held in the switch never exceeds two packets.

Run: python demos/04_starvation.py
"""

from edgebound import metrics
from edgebound.engine import Simulation
from edgebound.experiments import starvation_scenario

P = 4
for horizon in (10**3, 10**4, 10**5):
    res = Simulation(starvation_scenario(p_max=P, duration=horizon)).run(horizon=horizon)
    victim = next(p for p in res.packets if p.flow_id == "victim")
    print(f"horizon {horizon:>6}: victim delivered={victim.delivered}, waited {horizon - victim.hops[0].arrival} "
          f"ticks so far, max busy index {metrics.max_BI(res.trace)} (2*p_max = {2 * P})")
