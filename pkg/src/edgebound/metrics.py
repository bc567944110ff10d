"""Offline trace analyses: busy index, window volumes and window-bound oracles.

Conventions, all on integer ticks:

* a packet is *present* at a stage at time ``t`` when ``arrival <= t < end``
  (it leaves the instant its last bit is sent);
* windows are half-open, ``[t, t + d)``;
* ``in_volume(t, d)`` counts bits arriving in the window plus bits already
  waiting just before ``t`` (``arrival < t <= end``);
* ``out_volume(t, d)`` counts bits whose service ends in the window.

With ``S_arr(x)`` / ``S_end(x)`` the bits with arrival / end strictly before
``x`` this gives ``in = S_arr(t+d) - S_end(t)``, ``out = S_end(t+d) - S_end(t)``
and ``queued = in - out = S_arr(t+d) - S_end(t+d)``: the backlog just before
the window closes.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .engine import EventTrace

_INF = np.iinfo(np.int64).max


class TraceCorruption(ValueError):
    """A trace implies a negative queue or other impossible state."""


class TraceView:
    """Cached per-(packet, stage) interval arrays of an :class:`EventTrace`."""

    def __init__(self, trace: EventTrace):
        self.trace = trace
        iv = trace.intervals() if len(trace) else None
        if iv is None:
            e = np.zeros(0, dtype=np.int64)
            iv = {k: e for k in ("packet", "stage", "class", "size", "arrival", "start", "end")}
            iv["node"] = np.zeros(0, dtype=object)
        self.iv = iv
        self._cache: dict = {}

    @property
    def H(self) -> int:
        return int(self.iv["stage"].max()) if self.iv["stage"].size else 0

    def select(self, stage=None, cls=None) -> tuple:
        key = (stage, cls)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        m = np.ones(self.iv["stage"].size, dtype=bool)
        if stage is not None:
            m &= self.iv["stage"] == stage
        if cls is not None:
            m &= self.iv["class"] == cls
        arr, end, size = self.iv["arrival"][m], self.iv["end"][m], self.iv["size"][m]
        ao = np.argsort(arr, kind="stable")
        eo = np.argsort(end, kind="stable")
        hit = (
            arr[ao],
            np.concatenate([[0], np.cumsum(size[ao])]),
            end[eo],
            np.concatenate([[0], np.cumsum(size[eo])]),
        )
        self._cache[key] = hit
        return hit

    def s_arr(self, x, stage=None, cls=None):
        a, ca, _, _ = self.select(stage, cls)
        return ca[np.searchsorted(a, x, side="left")]

    def s_end(self, x, stage=None, cls=None):
        _, _, e, ce = self.select(stage, cls)
        return ce[np.searchsorted(e, x, side="left")]

    def s_arr_le(self, x, stage=None, cls=None):
        a, ca, _, _ = self.select(stage, cls)
        return ca[np.searchsorted(a, x, side="right")]

    def s_end_le(self, x, stage=None, cls=None):
        _, _, e, ce = self.select(stage, cls)
        return ce[np.searchsorted(e, x, side="right")]


def _view(trace) -> TraceView:
    return trace if isinstance(trace, TraceView) else TraceView(trace)


def _int(x):
    return int(x) if np.ndim(x) == 0 else x


def busy_index(trace, t, stage: Optional[int] = None, cls: Optional[int] = None):
    """Bits present (arrived, last bit not yet sent) at time ``t``.

    ``stage=None`` sums over the whole network.
    """
    v = _view(trace)
    return _int(v.s_arr_le(t, stage, cls) - v.s_end_le(t, stage, cls))


def max_BI(trace, stage: Optional[int] = None, cls: Optional[int] = None) -> int:
    """Maximum busy index; it only rises at arrivals, so only those are checked."""
    v = _view(trace)
    a = v.select(stage, cls)[0]
    if a.size == 0:
        return 0
    return int(np.max(busy_index(v, np.unique(a), stage, cls)))


def max_BI_bruteforce(trace, stage: Optional[int] = None, cls: Optional[int] = None) -> int:
    """Per-tick scan of busy_index; quadratic, for cross-checking short traces."""
    v = _view(trace)
    a, _, e, _ = v.select(stage, cls)
    if a.size == 0:
        return 0
    sizes = v.iv["size"]
    m = np.ones(v.iv["stage"].size, dtype=bool)
    if stage is not None:
        m &= v.iv["stage"] == stage
    if cls is not None:
        m &= v.iv["class"] == cls
    arr, end, size = v.iv["arrival"][m], v.iv["end"][m], sizes[m]
    best = 0
    for t in range(int(arr.min()), int(arr.max()) + 1):
        best = max(best, int(size[(arr <= t) & (t < end)].sum()))
    return best


def in_volume(trace, t, d, stage: Optional[int] = 1, cls: Optional[int] = None):
    """Bits arriving in ``[t, t+d)`` plus bits waiting just before ``t``."""
    v = _view(trace)
    return _int(v.s_arr(np.add(t, d), stage, cls) - v.s_end(t, stage, cls))


def arrivals_volume(trace, t, d, stage: Optional[int] = 1, cls: Optional[int] = None):
    """Only the arrival component of :func:`in_volume`."""
    v = _view(trace)
    return _int(v.s_arr(np.add(t, d), stage, cls) - v.s_arr(t, stage, cls))


def out_volume(trace, t, d, stage: Optional[int] = 1, cls: Optional[int] = None):
    """Bits whose last bit is sent in ``[t, t+d)``."""
    v = _view(trace)
    return _int(v.s_end(np.add(t, d), stage, cls) - v.s_end(t, stage, cls))


def queued(trace, t, d, stage: Optional[int] = 1, cls: Optional[int] = None):
    """in_volume - out_volume; raises :class:`TraceCorruption` if negative."""
    q = np.asarray(in_volume(trace, t, d, stage, cls)) - np.asarray(out_volume(trace, t, d, stage, cls))
    if np.any(q < 0):
        raise TraceCorruption(f"negative queued volume at stage {stage}")
    return _int(q)


def backlog_before(trace, t, stage: Optional[int] = 1, cls: Optional[int] = None):
    """Bits with ``arrival < t <= end``, counted packet by packet."""
    v = _view(trace)
    m = np.ones(v.iv["stage"].size, dtype=bool)
    if stage is not None:
        m &= v.iv["stage"] == stage
    if cls is not None:
        m &= v.iv["class"] == cls
    arr, end, size = v.iv["arrival"][m], v.iv["end"][m], v.iv["size"][m]
    return int(size[(arr < t) & (t <= end)].sum())


def network_in_volume(trace, t, d, cls: Optional[int] = None):
    """in_volume with the whole network as the system.

    Arrivals at the first stage in the window plus bits anywhere in the
    network just before ``t``.
    """
    v = _view(trace)
    H = v.H
    inside = v.s_arr(t, 1, cls) - v.s_end(t, H, cls)
    return _int(arrivals_volume(v, t, d, 1, cls) + inside)


def sliding_window_max(times, sizes, d) -> tuple:
    """Largest total size in any window ``[t, t+d)`` and its start ``t``.

    Window volume only changes when an item enters or leaves, so starting
    windows at each item time (and at 0) finds the maximum exactly.
    """
    times = np.asarray(times, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    if times.size == 0:
        return 0, 0
    o = np.argsort(times, kind="stable")
    ts, cs = times[o], np.concatenate([[0], np.cumsum(sizes[o])])
    starts = np.unique(np.concatenate([[0], ts]))
    vol = cs[np.searchsorted(ts, starts + d, side="left")] - cs[np.searchsorted(ts, starts, side="left")]
    i = int(np.argmax(vol))
    return int(vol[i]), int(starts[i])


def sliding_window_max_bruteforce(times, sizes, d) -> tuple:
    """Every-tick scan of all window starts; the independent oracle."""
    times = list(times)
    sizes = list(sizes)
    if not times:
        return 0, 0
    best, where = -1, 0
    for t in range(min(0, min(times) - d + 1), max(times) + 1):
        vol = sum(s for x, s in zip(times, sizes) if t <= x < t + d)
        if vol > best:
            best, where = vol, t
    return best, where


def window_violations(times, sizes, d, budget) -> list:
    """Start times ``t`` (at item times) whose window ``[t, t+d)`` exceeds ``budget``."""
    times = np.asarray(times, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    if times.size == 0:
        return []
    o = np.argsort(times, kind="stable")
    ts, cs = times[o], np.concatenate([[0], np.cumsum(sizes[o])])
    starts = np.unique(ts)
    vol = cs[np.searchsorted(ts, starts + d)] - cs[np.searchsorted(ts, starts)]
    return [(int(s), int(x)) for s, x in zip(starts, vol) if x > budget]


def max_in_volume(trace, d, stage: Optional[int] = 1, cls: Optional[int] = None) -> tuple:
    """Max over ``t`` of in_volume(t, d) and a witness ``t``.

    in_volume only rises when ``t + d`` passes an arrival, so the candidates
    are ``arrival + 1 - d``.
    """
    v = _view(trace)
    a = v.select(stage, cls)[0]
    if a.size == 0:
        return 0, 0
    cand = np.unique(a + 1 - d)
    vol = in_volume(v, cand, d, stage, cls)
    i = int(np.argmax(vol))
    return int(vol[i]), int(cand[i])


def check_necessary(trace, D, C, stage: Optional[int] = None) -> tuple:
    """(holds, measured BI, D*C).  A failing check rules out delay bound D."""
    bi = max_BI(trace, stage)
    limit = D * C
    return bi <= limit, bi, limit


def audit_work_conservation(trace) -> list:
    """Intervals where a port idled while a packet was waiting.

    Returns ``(port, idle_from, idle_to)`` tuples; empty means work conserving.
    """
    v = _view(trace)
    iv = v.iv
    bad = []
    nodes = iv["node"]
    for port in sorted(set(nodes.tolist())):
        m = nodes == port
        arr, start, end = iv["arrival"][m], iv["start"][m], iv["end"][m]
        o = np.argsort(start, kind="stable")
        s, e = start[o], end[o]
        served = s != _INF
        # idle gaps between consecutive services, plus the tail after the last one
        gaps_from = np.concatenate([[np.iinfo(np.int64).min], e[served]])
        gaps_to = np.concatenate([s[served], [_INF]])
        open_gap = gaps_from < gaps_to
        gf, gt = gaps_from[open_gap], gaps_to[open_gap]
        for a, st in zip(arr, start):
            if a == st:
                continue
            hit = (gf < st) & (gt > a)
            if np.any(hit):
                j = int(np.argmax(hit))
                lo, hi = max(int(gf[j]), int(a)), min(int(gt[j]), int(st))
                if lo < hi:
                    bad.append((port, lo, hi))
    return bad


def flow_fifo_violations(packets) -> list:
    """Packets that left some stage before an earlier packet of the same flow."""
    last: dict = {}
    bad = []
    for p in sorted(packets, key=lambda p: p.id):
        for h, hop in enumerate(p.hops):
            if hop.departure is None:
                continue
            key = (p.flow_id, h)
            prev = last.get(key)
            if prev is not None and hop.departure < prev:
                bad.append((p.flow_id, p.id, h + 1))
            last[key] = hop.departure
    return bad


def metric_identities(trace, d, times=None, propagation: int = 0) -> list:
    """Check the per-stage flow-conservation identities on ``trace``.

    * queued(t, d) equals the backlog just before ``t + d`` (recomputed per packet);
    * stage-h out_volume equals stage-(h+1) arrivals shifted by ``propagation``;
    * summed stage queues equal network in_volume minus last-stage out_volume
      (``propagation`` must be 0 for this one).

    Returns a list of failure descriptions.
    """
    v = _view(trace)
    H = v.H
    if H == 0:
        return []
    if times is None:
        hi = int(v.iv["end"][v.iv["end"] != _INF].max(initial=0))
        times = np.arange(0, hi + 1)
    times = np.asarray(times, dtype=np.int64)
    fails = []
    total_q = np.zeros(times.size, dtype=np.int64)
    for h in range(1, H + 1):
        q = np.asarray(queued(v, times, d, h))
        total_q += q
        direct = np.array([backlog_before(v, int(t) + d, h) for t in times[:: max(1, times.size // 64)]])
        if not np.array_equal(q[:: max(1, times.size // 64)], direct):
            fails.append(f"stage {h}: queued != backlog recount")
        if h < H:
            out_h = np.asarray(out_volume(v, times, d, h))
            in_next = np.asarray(arrivals_volume(v, times + propagation, d, h + 1))
            if not np.array_equal(out_h, in_next):
                fails.append(f"stage {h}: out_volume != next-stage arrivals")
    if propagation == 0:
        rhs = np.asarray(network_in_volume(v, times, d)) - np.asarray(out_volume(v, times, d, H))
        if not np.array_equal(total_q, rhs):
            fails.append("sum of stage queues != network in_volume - last-stage out_volume")
    return fails
