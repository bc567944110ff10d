"""Edge shapers: the quantum shaper and a leaky-bucket baseline.

Both shapers hold packets in a FIFO backlog and release the head packet as
soon as enough credit is available.  They differ only in how consumed credit
comes back:

* :class:`QuantumShaper` returns exactly the consumed amount ``D`` ticks after
  the release that consumed it, so any window of ``D`` ticks carries at most
  ``sigma`` bits of egress.
* :class:`LeakyBucket` accrues credit continuously at a fixed rate.

Example (the credit walkthrough with ``sigma=4``, ``D=6``)::

    >>> s = QuantumShaper(sigma=4, D=6)
    >>> [(r.time, r.packet) for r in s.offer(3, 1)]
    [(1, 3)]
    >>> s.pending
    [(7, 3)]
"""

from __future__ import annotations

import heapq
from collections import deque
from fractions import Fraction
from typing import Any, NamedTuple


class StarvationError(ValueError):
    """A packet can never be released because it exceeds the bucket size."""


class Release(NamedTuple):
    time: int
    packet: Any


def _size(packet) -> int:
    return packet if isinstance(packet, int) else packet.size


class QuantumShaper:
    """Credit bucket whose consumed credit is replenished as a quantum ``D`` later.

    ``packet`` arguments may be anything with a ``size`` attribute, or a plain
    int size.
    """

    def __init__(self, sigma: int, D: int):
        if sigma <= 0 or D <= 0:
            raise ValueError("sigma and D must be positive")
        self.sigma = sigma
        self.D = D
        self.credit = sigma
        self.pending: list = []  # heap of (due_time, amount)
        self.backlog: deque = deque()  # (packet, arrival time)
        self.now = 0

    def __repr__(self):
        return (
            f"QuantumShaper(sigma={self.sigma}, D={self.D}, credit={self.credit}, "
            f"pending={sorted(self.pending)}, backlog={len(self.backlog)})"
        )

    def _tick(self, now: int) -> None:
        if now < self.now:
            raise ValueError(f"clock moved backwards: {now} < {self.now}")
        self.now = now

    def _drain(self, now: int, out: list) -> None:
        while self.backlog and self.credit >= _size(self.backlog[0][0]):
            packet, arrival = self.backlog.popleft()
            size = _size(packet)
            t = max(now, arrival)
            self.credit -= size
            heapq.heappush(self.pending, (t + self.D, size))
            out.append(Release(t, packet))

    def advance(self, now: int) -> list:
        """Apply every replenishment due by ``now`` and release what fits."""
        self._tick(now)
        out: list = []
        while self.pending and self.pending[0][0] <= now:
            due, amount = heapq.heappop(self.pending)
            self.credit = min(self.credit + amount, self.sigma)
            # same-time entries are observationally one replenishment
            while self.pending and self.pending[0][0] == due:
                self.credit = min(self.credit + heapq.heappop(self.pending)[1], self.sigma)
            self._drain(due, out)
        return out

    def offer(self, packet, now: int) -> list:
        """Enqueue ``packet`` at ``now``; return everything released at ``now``."""
        if _size(packet) > self.sigma:
            raise StarvationError(
                f"packet of {_size(packet)} bits can never pass a bucket of {self.sigma}"
            )
        out = self.advance(now)
        self.backlog.append((packet, now))
        self._drain(now, out)
        return out

    def next_due(self):
        """Time of the next scheduled replenishment, or None."""
        return self.pending[0][0] if self.pending else None

    def check(self) -> None:
        assert 0 <= self.credit <= self.sigma, self
        assert self.credit + sum(a for _, a in self.pending) == self.sigma, self


class LeakyBucket:
    """Token bucket refilled continuously at ``rate`` bits per tick.

    Credit is kept as an exact rational so fractional rates such as 3 units
    per 6 ticks never drift.
    """

    def __init__(self, capacity: int, rate):
        rate = Fraction(rate)
        if capacity <= 0 or rate <= 0:
            raise ValueError("capacity and rate must be positive")
        self.capacity = capacity
        self.rate = rate
        self.credit = Fraction(capacity)
        self.backlog: deque = deque()
        self.now = 0

    def __repr__(self):
        return f"LeakyBucket(capacity={self.capacity}, rate={self.rate}, credit={self.credit})"

    def _accrue(self, now: int) -> None:
        if now < self.now:
            raise ValueError(f"clock moved backwards: {now} < {self.now}")
        self.credit = min(self.credit + self.rate * (now - self.now), Fraction(self.capacity))
        self.now = now

    def _drain(self, out: list) -> None:
        while self.backlog and self.credit >= _size(self.backlog[0][0]):
            packet, _ = self.backlog.popleft()
            self.credit -= _size(packet)
            out.append(Release(self.now, packet))

    def advance(self, now: int) -> list:
        """Release every held packet whose credit has accrued by ``now``.

        Releases happen at the first tick the head packet fits, so calling
        this at coarse intervals gives the same times as calling every tick.
        """
        out: list = []
        while self.backlog:
            t = self.next_due()
            if t is None or t > now:
                break
            self._accrue(t)
            self._drain(out)
        self._accrue(now)
        self._drain(out)
        return out

    def offer(self, packet, now: int) -> list:
        if _size(packet) > self.capacity:
            raise StarvationError(
                f"packet of {_size(packet)} bits can never pass a bucket of {self.capacity}"
            )
        out = self.advance(now)
        self.backlog.append((packet, now))
        self._drain(out)
        return out

    def next_due(self):
        """First tick at which the head of the backlog can be released."""
        if not self.backlog:
            return None
        need = _size(self.backlog[0][0]) - self.credit
        if need <= 0:
            return self.now
        return self.now + -(-need // self.rate)

    def check(self) -> None:
        assert 0 <= self.credit <= self.capacity, self


def shape(shaper, ingress) -> list:
    """Run a list of ``(time, packet)`` arrivals through ``shaper`` to completion.

    Returns the egress as ``(time, packet)`` pairs in release order.
    """
    out: list = []
    for t, packet in sorted(ingress, key=lambda a: a[0]):
        out.extend(shaper.offer(packet, t))
    while shaper.backlog:
        t = shaper.next_due()
        if t is None:
            break
        out.extend(shaper.advance(t))
    return [(r.time, r.packet) for r in out]


def run_greedy(shaper, size: int, horizon: int) -> list:
    """Feed ``shaper`` from an always-backlogged source until ``horizon``.

    One packet of ``size`` is always waiting; a new one is offered each time
    the previous one leaves.  Returns release times of packets sent before
    ``horizon``.
    """
    times: list = []
    waiting = 0

    def take(releases):
        nonlocal waiting
        for r in releases:
            if r.time < horizon:
                times.append(r.time)
            waiting -= 1

    now = 0
    while now < horizon:
        while waiting == 0:
            waiting += 1
            take(shaper.offer(size, now))
        nxt = shaper.next_due()
        if nxt is None or nxt >= horizon:
            break
        now = nxt
        take(shaper.advance(now))
    return times
