"""Long-run throughput of a backlogged source behind each shaper.

Run: python demos/05_utilization.py
"""

from fractions import Fraction

from edgebound.shaper import LeakyBucket, QuantumShaper, run_greedy

SIGMA, D = 4, 6
horizon = 1000 * D
for name, shaper in [
    ("quantum sigma=4 D=6", QuantumShaper(SIGMA, D)),
    ("leaky 1 per 6 ticks", LeakyBucket(SIGMA, Fraction(1, 6))),
]:
    sent = len(run_greedy(shaper, 1, horizon))
    print(f"{name:<22} {sent / horizon:.4f} units/tick  (sigma/D = {SIGMA / D:.4f})")
