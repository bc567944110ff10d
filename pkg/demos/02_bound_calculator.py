"""Per-hop budgets versus one edge window.

With a quantum shaper at the edge, the end-to-end bound is the edge window
plus a serialization term per extra hop, instead of a full class deadline
at every hop.  This script prints both for a range of path lengths.

Run: python demos/02_bound_calculator.py
"""

from edgebound.bounds import SingleClassConfig, edge_window, multiclass_bounds
from edgebound.model import TrafficClass

C = 12000          # bits per tick
P_MAX = 12000      # one tick of line rate

print("single class, end-to-end target 100 ticks")
for H in range(1, 8):
    D = edge_window(SingleClassConfig(D_prime=100, H=H, p_max=P_MAX, C=C))
    print(f"  H={H}: shape flows to sigma per {D} ticks (budget {D * C:,} bits per window)")

print("\nthree classes plus best effort, C = 4 units per tick")
classes = [
    TrafficClass(1, P_max_k=4, d_k=10, C_k=1),
    TrafficClass(2, P_max_k=4, d_k=20, C_k=1),
    TrafficClass(3, P_max_k=4, d_k=60, C_k=1),
    TrafficClass(4, P_max_k=4),
]
for H in (1, 3, 6, 10):
    report = multiclass_bounds(classes, H=H, C=4)
    cells = "  ".join(f"k={b.class_id}: {b.D_k:>3} (greedy {b.greedy_bound:>3})" for b in report.classes)
    print(f"  H={H:>2}  {cells}")

print("\nfull table for H=3:")
print(multiclass_bounds(classes, H=3, C=4).table())
