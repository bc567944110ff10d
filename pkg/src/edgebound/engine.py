"""Deterministic discrete-event simulator of an edge-shaped multi-hop network.

Each real switch has one output port per downstream neighbour plus an egress
port.  A port holds one FIFO per traffic class and serves them with
non-preemptive strict priority; a packet is received when its last bit
arrives (store and forward).  Flow shapers sit at the flow's first hop.

Within one tick events run in a fixed phase order: service completions,
shaper replenishments, source emissions, hop arrivals; only then do idle
ports pick their next packet.  A packet arriving exactly when a server frees
up is therefore eligible for it.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (
    EGRESS,
    STARVE_LOW_INPUT,
    Packet,
    HopRecord,
    Scenario,
    normalize_topology,
    transmission_time,
)
from .shaper import LeakyBucket, QuantumShaper
from .traffic import GeneratorSpec, TrafficSource

COMPLETE, REPLENISH, EMIT, ARRIVE = range(4)

ARRIVAL = "arrival"
SERVICE_START = "service-start"
SERVICE_END = "service-end"

TRACE_COLUMNS = ("time", "seq", "kind", "packet_id", "flow_id", "class_id", "stage", "node", "size")
PACKET_COLUMNS = (
    "packet_id", "flow_id", "class_id", "size", "emit_time", "ingress_time",
    "delivered_time", "delay", "shaper_delay",
)


class SimulationError(RuntimeError):
    """Internal inconsistency, e.g. the event clock moving backwards."""


class EventTrace:
    """Time-ordered arrival / service records, one row per stage event."""

    def __init__(self, records=None):
        self.records: list = list(records) if records is not None else []

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def intervals(self) -> dict:
        """Per (packet, stage) arrival/start/end arrays, keyed by column name.

        Unfinished stages get ``end = +inf`` (encoded as int64 max).
        """
        rows: dict = {}
        for time, _seq, kind, pid, _flow, cls, stage, node, size in self.records:
            key = (pid, stage)
            r = rows.get(key)
            if r is None:
                r = rows[key] = [pid, stage, cls, size, -1, -1, -1, node]
            if kind == ARRIVAL:
                r[4] = time
            elif kind == SERVICE_START:
                r[5] = time
            else:
                r[6] = time
        big = np.iinfo(np.int64).max
        vals = list(rows.values())
        arr = lambda i: np.array([v[i] for v in vals], dtype=np.int64)
        end = arr(6)
        start = arr(5)
        return {
            "packet": arr(0),
            "stage": arr(1),
            "class": arr(2),
            "size": arr(3),
            "arrival": arr(4),
            "start": np.where(start < 0, big, start),
            "end": np.where(end < 0, big, end),
            "node": np.array([v[7] for v in vals], dtype=object),
        }

    def check(self) -> None:
        last = None
        started: dict = {}
        arrived: set = set()
        for rec in self.records:
            key = (rec[0], rec[1])
            if last is not None and key < last:
                raise SimulationError(f"trace out of order at {rec}")
            last = key
            k = (rec[3], rec[6])
            if rec[2] == ARRIVAL:
                arrived.add(k)
            elif rec[2] == SERVICE_START:
                if k not in arrived:
                    raise SimulationError(f"service before arrival: {rec}")
                started[k] = rec[0]
            elif k not in started:
                raise SimulationError(f"service end without start: {rec}")


class Port:
    def __init__(self, key, capacity, propagation, n_classes, policy, input_order):
        self.key = key
        self.label = f"{key[0]}>{key[1] if key[1] is not EGRESS else 'egress'}"
        self.capacity = capacity
        self.propagation = propagation
        self.policy = policy
        self.input_order = list(input_order)
        self.queues: dict = {}
        self.n_classes = n_classes
        self.in_service = None
        self.busy_until = 0

    def rank(self, packet, input_name) -> int:
        if self.policy == STARVE_LOW_INPUT:
            try:
                return self.input_order.index(input_name)
            except ValueError:
                return len(self.input_order)
        return packet.class_id

    def push(self, item, rank) -> None:
        q = self.queues.get(rank)
        if q is None:
            q = self.queues[rank] = deque()
        q.append(item)

    def pop(self):
        for rank in sorted(self.queues):
            q = self.queues[rank]
            if q:
                return q.popleft()
        return None

    def backlog(self) -> int:
        return sum(len(q) for q in self.queues.values())


@dataclass
class _Stage:
    node: str
    port: Optional[Port]


@dataclass
class _Flow:
    spec: object
    index: int
    stages: list
    shaper: object = None
    greedy: Optional[GeneratorSpec] = None
    emitted: int = 0


@dataclass
class SimResult:
    scenario: Scenario
    trace: EventTrace
    packets: list
    horizon: Optional[int]
    end_time: int
    H: int
    C: object
    ports: dict = field(default_factory=dict)

    @property
    def delivered(self) -> list:
        return [p for p in self.packets if p.delivered]

    @property
    def in_flight(self) -> list:
        return [p for p in self.packets if p.ingress_time is not None and not p.delivered]

    def delays(self, class_id: Optional[int] = None) -> np.ndarray:
        return np.array(
            [p.delay for p in self.delivered if class_id is None or p.class_id == class_id],
            dtype=np.int64,
        )

    def summary(self, report=None) -> dict:
        from .metrics import max_BI

        out: dict = {"horizon": self.horizon, "end_time": self.end_time, "H": self.H,
                     "C": str(self.C), "packets": len(self.packets),
                     "delivered": len(self.delivered), "in_flight": len(self.in_flight),
                     "max_BI": int(max_BI(self.trace)), "classes": {}}
        for c in self.scenario.classes:
            d = self.delays(c.class_id)
            entry = {"count": int(d.size),
                     "max_delay": int(d.max()) if d.size else None,
                     "mean_delay": float(d.mean()) if d.size else None}
            if report is not None and not c.best_effort:
                bound = report.for_class(c.class_id).D_k
                entry["bound"] = bound
                entry["violations"] = int((d > bound).sum())
                entry["margin"] = bound - entry["max_delay"] if d.size else None
            out["classes"][str(c.class_id)] = entry
        return out


class Simulation:
    """One run of a scenario.  Not thread-safe; build one per run."""

    def __init__(self, scenario: Scenario):
        scenario.validate()
        self.scenario = scenario
        self.topology, self.flow_specs = normalize_topology(scenario.topology, scenario.flows)
        self.n_classes = len(scenario.classes)
        self.ports: dict = {}
        self.flows: list = []
        for i, f in enumerate(self.flow_specs):
            self.flows.append(self._build_flow(i, f))
        self.trace = EventTrace()
        self.packets: list = []
        self._events: list = []
        self._seq = 0
        self._tseq = 0
        self._now = 0
        self._dirty: set = set()

    def _port(self, node, nxt) -> Port:
        key = (node, nxt)
        p = self.ports.get(key)
        if p is None:
            sw = self.topology.switches[node]
            p = Port(
                key,
                self.topology.port_capacity(node, nxt),
                self.topology.port_propagation(node, nxt),
                self.n_classes,
                sw.policy,
                sw.input_order,
            )
            self.ports[key] = p
        return p

    def _build_flow(self, index, f) -> _Flow:
        topo = self.topology
        real = [n for n in f.path if topo.real(n)]
        stages = []
        ri = 0
        for node in f.path:
            if topo.real(node):
                nxt = real[ri + 1] if ri + 1 < len(real) else EGRESS
                stages.append(_Stage(node, self._port(node, nxt)))
                ri += 1
            else:
                stages.append(_Stage(node, None))
        kind = f.shaper.get("kind", "quantum")
        if kind == "quantum":
            shaper = QuantumShaper(f.sigma, self.scenario.shaper_window(f))
        elif kind == "leaky":
            shaper = LeakyBucket(int(f.shaper["capacity"]), _fraction(f.shaper["rate"]))
        else:
            shaper = None
        gen = GeneratorSpec.from_dict(dict(self.scenario.generator_for(f)))
        return _Flow(f, index, stages, shaper, gen if gen.kind == "greedy" else None)

    # --- event plumbing -----------------------------------------------------

    def _push(self, time, phase, payload) -> None:
        if time < self._now:
            raise SimulationError(f"event scheduled in the past: {time} < {self._now}")
        self._seq += 1
        heapq.heappush(self._events, (time, phase, self._seq, payload))

    def _record(self, time, kind, packet, stage, node) -> None:
        self._tseq += 1
        self.trace.records.append(
            (time, self._tseq, kind, packet.id, packet.flow_id, packet.class_id, stage, node, packet.size)
        )

    # --- handlers ----------------------------------------------------------------

    def _emit(self, flow: _Flow, size: int, t: int) -> None:
        spec = flow.spec
        pkt = Packet(len(self.packets), spec.flow_id, spec.class_id, size, t)
        self.packets.append(pkt)
        flow.emitted += 1
        if flow.shaper is None:
            self._inject(flow, pkt, t)
            return
        releases = flow.shaper.offer(pkt, t)
        self._released(flow, releases)
        if isinstance(flow.shaper, LeakyBucket) and flow.shaper.backlog:
            self._push(flow.shaper.next_due(), REPLENISH, flow)

    def _released(self, flow: _Flow, releases) -> None:
        for r in releases:
            self._inject(flow, r.packet, r.time)
            if isinstance(flow.shaper, QuantumShaper):
                self._push(r.time + flow.shaper.D, REPLENISH, flow)
            if flow.greedy is not None:
                self._refill(flow, r.time)

    def _refill(self, flow: _Flow, t: int) -> None:
        if t < self._stop:
            self._push(t, EMIT, (flow, flow.greedy.packet_size))

    def _inject(self, flow: _Flow, pkt: Packet, t: int) -> None:
        pkt.ingress_time = t
        self._push(t, ARRIVE, (flow, pkt, 0))

    def _arrive(self, flow: _Flow, pkt: Packet, si: int, t: int) -> None:
        stage = flow.stages[si]
        pkt.hops.append(HopRecord(stage.node, t))
        self._record(t, ARRIVAL, pkt, si + 1, stage.port.label if stage.port else stage.node)
        if stage.port is None:
            hop = pkt.hops[-1]
            hop.start = hop.departure = t
            self._record(t, SERVICE_START, pkt, si + 1, stage.node)
            self._record(t, SERVICE_END, pkt, si + 1, stage.node)
            self._forward(flow, pkt, si, t, 0)
            return
        if si == 0:
            input_name = flow.spec.input_name
        else:
            input_name = flow.stages[si - 1].node
        port = stage.port
        port.push((flow, pkt, si), port.rank(pkt, input_name))
        self._dirty.add(port.key)

    def _forward(self, flow, pkt, si, t, propagation) -> None:
        if si + 1 < len(flow.stages):
            self._push(t + propagation, ARRIVE, (flow, pkt, si + 1))

    def _complete(self, port: Port, t: int) -> None:
        flow, pkt, si = port.in_service
        port.in_service = None
        pkt.hops[-1].departure = t
        self._record(t, SERVICE_END, pkt, si + 1, port.label)
        self._dirty.add(port.key)
        self._forward(flow, pkt, si, t, port.propagation)

    def _serve(self, port: Port, t: int) -> None:
        if port.in_service is not None:
            return
        item = port.pop()
        if item is None:
            return
        flow, pkt, si = item
        port.in_service = item
        done = t + transmission_time(pkt.size, port.capacity)
        port.busy_until = done
        pkt.hops[-1].start = t
        self._record(t, SERVICE_START, pkt, si + 1, port.label)
        self._push(done, COMPLETE, port)
        if si == 0 and flow.greedy is not None and flow.shaper is None:
            self._refill(flow, t)

    # --- main loop ----------------------------------------------------------------

    def run(self, horizon: Optional[int] = None) -> SimResult:
        """Simulate until ``horizon`` (exclusive) or until the network drains.

        Sources stop emitting at the scenario's ``run.duration``.
        """
        sc = self.scenario
        self._stop = sc.run.duration if horizon is None else min(sc.run.duration, horizon)
        for flow in self.flows:
            gen = GeneratorSpec.from_dict(dict(sc.generator_for(flow.spec)))
            if gen.kind == "greedy":
                if gen.phase < self._stop:
                    self._push(gen.phase, EMIT, (flow, gen.packet_size))
                continue
            seed = int(np.random.SeedSequence([sc.run.seed, flow.index]).generate_state(1)[0])
            for t, size in TrafficSource(gen, seed).next_arrivals(self._stop):
                self._push(t, EMIT, (flow, size))

        events = self._events
        while events:
            t = events[0][0]
            if horizon is not None and t >= horizon:
                break
            if t < self._now:
                raise SimulationError(f"event clock moved backwards: {t} < {self._now}")
            self._now = t
            while events and events[0][0] == t:
                _, phase, _, payload = heapq.heappop(events)
                if phase == COMPLETE:
                    self._complete(payload, t)
                elif phase == REPLENISH:
                    flow = payload
                    self._released(flow, flow.shaper.advance(t))
                    if isinstance(flow.shaper, LeakyBucket) and flow.shaper.backlog:
                        self._push(flow.shaper.next_due(), REPLENISH, flow)
                elif phase == EMIT:
                    flow, size = payload
                    self._emit(flow, size, t)
                else:
                    flow, pkt, si = payload
                    self._arrive(flow, pkt, si, t)
                if not (events and events[0][0] == t):
                    dirty, self._dirty = sorted(self._dirty, key=repr), set()
                    for key in dirty:
                        self._serve(self.ports[key], t)
        end = self._now if horizon is None else horizon
        return SimResult(sc, self.trace, self.packets, horizon, end, self.topology.H,
                         self.topology.bottleneck_capacity, self.ports)


def _fraction(v):
    from .model import as_rate

    return as_rate(v)


def run(scenario: Scenario, horizon: Optional[int] = None) -> SimResult:
    """Convenience wrapper: build a :class:`Simulation` and run it."""
    return Simulation(scenario).run(horizon)
