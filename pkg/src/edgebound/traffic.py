"""Seeded ingress traffic generators.

Random draws use NumPy's PCG64 bit generator seeded through
``numpy.random.SeedSequence``, so a given ``(spec, seed)`` yields the same
arrival list on every platform.

Kinds:

``periodic``  one ``size`` packet every ``period`` ticks starting at ``phase``
``bursty``    ``burst_size`` packets of ``packet_size`` every ``burst_gap`` ticks
``uniform``   gaps uniform on ``[1, 2*mean_gap - 1]``, sizes ``unit`` times a
              uniform draw from ``size_range``
``greedy``    closed loop: a new packet appears whenever the consumer takes one
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

KINDS = ("periodic", "bursty", "uniform", "greedy")


@dataclass
class GeneratorSpec:
    kind: str
    period: int = 1
    phase: int = 0
    size: int = 1
    burst_size: int = 1
    burst_gap: int = 1
    packet_size: int = 1
    mean_gap: int = 1
    size_range: tuple = (1, 1)
    seed: Optional[int] = None
    stop: Optional[int] = None
    unit: int = 1

    def __post_init__(self):
        if self.kind == "uniform-random":
            self.kind = "uniform"
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        self.size_range = tuple(self.size_range)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown generator fields {sorted(extra)}")
        return cls(**d)

    @property
    def max_size(self) -> int:
        if self.kind == "periodic":
            return self.size
        if self.kind == "uniform":
            return self.size_range[1] * self.unit
        return self.packet_size


class TrafficSource:
    """Stateful open-loop source: successive calls return disjoint time ranges."""

    def __init__(self, spec: GeneratorSpec, seed: Optional[int] = None):
        if spec.kind == "greedy":
            raise ValueError("greedy sources are closed loop; the simulator drives them")
        self.spec = spec
        s = spec.seed if spec.seed is not None else seed
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(s or 0)))
        self.up_to = 0
        self._next = spec.phase

    def _draw_size(self) -> int:
        lo, hi = self.spec.size_range
        return int(self.rng.integers(lo, hi + 1)) * self.spec.unit

    def _draw_gap(self) -> int:
        m = self.spec.mean_gap
        return 1 if m <= 1 else int(self.rng.integers(1, 2 * m))

    def next_arrivals(self, up_to: int) -> list:
        """Arrivals with ``previous up_to <= time < up_to`` as ``(time, size)``."""
        if up_to < self.up_to:
            raise ValueError("up_to must be monotone")
        self.up_to = up_to
        spec = self.spec
        if spec.stop is not None:
            up_to = min(up_to, spec.stop)
        out = []
        kind = spec.kind
        while self._next < up_to:
            t = self._next
            if kind == "periodic":
                out.append((t, spec.size))
                self._next = t + spec.period
            elif kind == "bursty":
                out.extend((t, spec.packet_size) for _ in range(spec.burst_size))
                self._next = t + spec.burst_gap
            else:
                out.append((t, self._draw_size()))
                self._next = t + self._draw_gap()
        return out


def next_arrivals(spec, up_to: int, seed: Optional[int] = None) -> list:
    """All arrivals of ``spec`` in ``[0, up_to)``.

    A greedy spec yields just its first packet; the rest are produced on demand.
    """
    if isinstance(spec, dict):
        spec = GeneratorSpec.from_dict(spec)
    if spec.kind == "greedy":
        return [(spec.phase, spec.packet_size)] if spec.phase < up_to else []
    return TrafficSource(spec, seed).next_arrivals(up_to)
