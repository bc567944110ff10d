"""Five packets through a quantum shaper, then through two leaky buckets.

Run: python demos/01_shaper_walkthrough.py
"""

from fractions import Fraction

from edgebound.metrics import sliding_window_max
from edgebound.shaper import LeakyBucket, QuantumShaper, shape

SIGMA, D = 4, 6
ingress = [(1, 3), (2, 1), (3, 2), (3, 1), (4, 1)]


def report(name, egress):
    vol, at = sliding_window_max([t for t, _ in egress], [s for _, s in egress], D)
    cells = ", ".join(f"{s}@t{t}" for t, s in egress)
    print(f"{name:<22} {cells}")
    print(f"{'':<22} busiest {D}-tick window [{at}, {at + D}) carries {vol} units (budget {SIGMA})")


print(f"ingress: {', '.join(f'{s}@t{t}' for t, s in ingress)}\n")

# Credit spent at time t comes back at exactly t + D, so no D-tick window
# can ever see more than sigma units leave.
q = QuantumShaper(SIGMA, D)
for t, size in ingress:
    out = q.offer(size, t)
    print(f"t={t}: offer {size} -> released {[r.packet for r in out]}, credit {q.credit}, "
          f"replenishments {sorted(q.pending)}")
print()
report("quantum shaper", shape(QuantumShaper(SIGMA, D), ingress))

# A token bucket at 3 units per 6 ticks lets the backlog out too early.
report("leaky 3 per 6 ticks", shape(LeakyBucket(SIGMA, Fraction(3, 6)), ingress))

# Slowing it to 1 unit per 6 ticks keeps the window, at a quarter of the rate.
report("leaky 1 per 6 ticks", shape(LeakyBucket(SIGMA, Fraction(1, 6)), ingress))
