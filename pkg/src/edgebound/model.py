"""Core domain types: packets, traffic classes, flows, topology and scenarios.

Time is counted in integer ticks and data in integer bits, so every
simulation, oracle and bound computation is exact.  Link capacities are
bits per tick and may be rational (``fractions.Fraction``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Union

Ticks = int
Bits = int
Rate = Union[int, Fraction]

PASS_THROUGH = "pass"
REAL = "real"

STRICT_PRIORITY = "strict-priority"
STARVE_LOW_INPUT = "starve-low-input"
POLICIES = (STRICT_PRIORITY, STARVE_LOW_INPUT)

#: marks a switch's egress port (no downstream switch)
EGRESS = None


class ConfigError(ValueError):
    """Raised for malformed or inconsistent scenario configuration."""


def as_rate(value: Any) -> Rate:
    """Parse a rate given as int, ``"a/b"`` string or ``[a, b]`` pair."""
    if isinstance(value, bool):
        raise ConfigError(f"invalid rate {value!r}")
    if isinstance(value, (list, tuple)) and len(value) == 2:
        r = Fraction(int(value[0]), int(value[1]))
    elif isinstance(value, (int, Fraction)):
        r = Fraction(value)
    elif isinstance(value, str):
        try:
            r = Fraction(value)
        except ValueError:
            raise ConfigError(f"invalid rate {value!r}; use an int, 'a/b' or [a, b]") from None
    elif isinstance(value, float) and value.is_integer():
        r = Fraction(int(value))
    else:
        raise ConfigError(f"invalid rate {value!r}; use an int, 'a/b' or [a, b]")
    return int(r) if r.denominator == 1 else r


def rate_to_json(r: Rate) -> Any:
    r = Fraction(r)
    return r.numerator if r.denominator == 1 else f"{r.numerator}/{r.denominator}"


def transmission_time(size: Bits, capacity: Rate) -> Ticks:
    """Ticks needed to serialize ``size`` bits: ceil(size / capacity)."""
    return math.ceil(Fraction(size) / Fraction(capacity))


@dataclass
class HopRecord:
    node: str
    arrival: Ticks
    start: Optional[Ticks] = None
    departure: Optional[Ticks] = None


@dataclass
class Packet:
    id: int
    flow_id: str
    class_id: int
    size: Bits
    emit_time: Ticks
    ingress_time: Optional[Ticks] = None
    hops: list = field(default_factory=list)

    def __post_init__(self):
        if self.size <= 0:
            raise ConfigError(f"packet {self.id}: size must be positive")

    @property
    def delivered(self) -> bool:
        return bool(self.hops) and self.hops[-1].departure is not None

    @property
    def delay(self) -> Optional[Ticks]:
        """Network delay: last-hop departure minus network ingress."""
        if not self.delivered or self.ingress_time is None:
            return None
        return self.hops[-1].departure - self.ingress_time

    def check(self) -> None:
        last = self.ingress_time if self.ingress_time is not None else self.emit_time
        for hop in self.hops:
            if hop.arrival < last:
                raise AssertionError(f"packet {self.id}: hop times decrease at {hop.node}")
            if hop.departure is not None and hop.departure < hop.arrival:
                raise AssertionError(f"packet {self.id}: departs {hop.node} before arrival")
            last = hop.departure if hop.departure is not None else hop.arrival


@dataclass
class TrafficClass:
    """Per-class parameters.  ``d_k`` and ``C_k`` are None for best effort."""

    class_id: int
    P_max_k: Optional[Bits] = None
    d_k: Optional[Ticks] = None
    C_k: Optional[Rate] = None

    @property
    def best_effort(self) -> bool:
        return self.d_k is None


def validate_classes(classes: list) -> None:
    if not classes:
        raise ConfigError("at least one traffic class is required")
    ids = [c.class_id for c in classes]
    if ids != list(range(1, len(classes) + 1)):
        raise ConfigError(f"class ids must be 1..{len(classes)} in order, got {ids}")
    bounded = [c for c in classes if not c.best_effort]
    if classes[: len(bounded)] != bounded:
        raise ConfigError("best-effort class must come after all bounded classes")
    if len(classes) - len(bounded) > 1:
        raise ConfigError("at most one best-effort class is allowed")
    prev = 0
    for c in bounded:
        if c.d_k <= 0:
            raise ConfigError(f"class {c.class_id}: d_k must be positive")
        if c.d_k < prev:
            raise ConfigError(
                f"class {c.class_id}: d_k must be non-decreasing with class id "
                "(highest priority has the smallest delay bound)"
            )
        prev = c.d_k
        if c.C_k is None or c.C_k <= 0:
            raise ConfigError(f"class {c.class_id}: C_k must be positive")
    for c in classes:
        if c.P_max_k is not None and c.P_max_k < 0:
            raise ConfigError(f"class {c.class_id}: P_max_k must be non-negative")


@dataclass
class FlowSpec:
    flow_id: str
    class_id: int
    path: list
    sigma: Optional[Bits] = None
    shaper: dict = field(default_factory=lambda: {"kind": "quantum"})
    generator: Any = None
    ingress: Optional[str] = None

    @property
    def input_name(self) -> str:
        """Name of the input link feeding the flow's first switch."""
        return self.ingress if self.ingress is not None else self.flow_id


@dataclass
class Switch:
    id: str
    kind: str = REAL
    policy: str = STRICT_PRIORITY
    input_order: list = field(default_factory=list)
    egress_capacity: Optional[Rate] = None


@dataclass
class Link:
    src: str
    dst: str
    capacity: Rate
    propagation: Ticks = 0


@dataclass
class Topology:
    switches: dict
    links: dict
    default_capacity: Optional[Rate] = None
    bottleneck_capacity: Optional[Rate] = None
    H: Optional[int] = None

    def real(self, node: str) -> bool:
        return self.switches[node].kind == REAL

    def port_capacity(self, node: str, nxt: Optional[str]) -> Rate:
        if nxt is EGRESS:
            cap = self.switches[node].egress_capacity
            if cap is None:
                cap = self.default_capacity
            if cap is None:
                raise ConfigError(f"switch {node}: no egress_capacity and no default_capacity")
            return cap
        return self.links[(node, nxt)].capacity

    def port_propagation(self, node: str, nxt: Optional[str]) -> Ticks:
        if nxt is EGRESS:
            return 0
        return self.links[(node, nxt)].propagation


def real_ports(topology: Topology, path: list) -> list:
    """(node, next real node or EGRESS) for each real switch on ``path``."""
    nodes = [n for n in path if topology.real(n)]
    return [(u, nodes[i + 1] if i + 1 < len(nodes) else EGRESS) for i, u in enumerate(nodes)]


def _check_path(topology: Topology, flow: FlowSpec) -> None:
    if not flow.path:
        raise ConfigError(f"flow {flow.flow_id}: empty path")
    seen = set()
    for node in flow.path:
        if node not in topology.switches:
            raise ConfigError(f"flow {flow.flow_id}: unknown switch {node!r}")
        if node in seen:
            raise ConfigError(f"flow {flow.flow_id}: cyclic path revisits {node!r}")
        seen.add(node)
    for u, v in real_ports(topology, flow.path):
        if v is not EGRESS and (u, v) not in topology.links:
            raise ConfigError(f"flow {flow.flow_id}: no link {u!r} -> {v!r}")
        topology.port_capacity(u, v)


def bottleneck_capacity(topology: Topology, flows: Iterable[FlowSpec]) -> Rate:
    """Minimum capacity over every port traversed by any of ``flows``."""
    caps = [topology.port_capacity(u, v) for f in flows for u, v in real_ports(topology, f.path)]
    if not caps:
        raise ConfigError("no flows traverse the topology")
    return min(caps)


def normalize_topology(raw: Topology, flows: list) -> tuple:
    """Pad every flow path with pass-through switches up to the longest path.

    Pass-through stages are appended after the flow's last real switch, one
    private switch per missing stage, so they never share a queue.  Returns
    ``(topology, flows)``; the inputs are not mutated.
    """
    for f in flows:
        _check_path(raw, f)
    H = max(len(f.path) for f in flows) if flows else 0
    if raw.H is not None and raw.H > H:
        H = raw.H
    switches = dict(raw.switches)
    new_flows = []
    for f in flows:
        path = list(f.path)
        for i in range(len(path), H):
            pid = f"~pt:{f.flow_id}:{i + 1}"
            switches[pid] = Switch(pid, kind=PASS_THROUGH)
            path.append(pid)
        new_flows.append(
            FlowSpec(f.flow_id, f.class_id, path, f.sigma, dict(f.shaper), f.generator, f.ingress)
        )
    topo = Topology(switches, dict(raw.links), raw.default_capacity, raw.bottleneck_capacity, H)
    if topo.bottleneck_capacity is None and flows:
        topo.bottleneck_capacity = bottleneck_capacity(topo, new_flows)
    assert all(len(f.path) == H for f in new_flows)
    return topo, new_flows


@dataclass
class RunConfig:
    duration: Ticks = 1000
    seed: int = 0
    tick: str = "1us"


@dataclass
class Scenario:
    topology: Topology
    classes: list
    flows: list
    generators: dict = field(default_factory=dict)
    run: RunConfig = field(default_factory=RunConfig)
    capacity_scope: str = "network"

    @property
    def K(self) -> int:
        return sum(1 for c in self.classes if not c.best_effort)

    def class_of(self, class_id: int) -> TrafficClass:
        return self.classes[class_id - 1]

    def p_max(self, class_id: Optional[int] = None) -> Bits:
        """Configured P^max of a class, or the global maximum if ``class_id`` is None."""
        if class_id is not None:
            p = self.class_of(class_id).P_max_k
            return p if p is not None else self.p_max()
        vals = [c.P_max_k for c in self.classes if c.P_max_k is not None]
        if not vals:
            raise ConfigError("no class declares P_max_k")
        return max(vals)

    def generator_for(self, flow: FlowSpec) -> dict:
        g = flow.generator
        if isinstance(g, str):
            if g not in self.generators:
                raise ConfigError(f"flow {flow.flow_id}: unknown generator {g!r}")
            return self.generators[g]
        if g is None:
            raise ConfigError(f"flow {flow.flow_id}: no generator bound")
        return g

    def validate(self) -> None:
        validate_classes(self.classes)
        ids = [f.flow_id for f in self.flows]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate flow ids")
        for f in self.flows:
            if not 1 <= f.class_id <= len(self.classes):
                raise ConfigError(f"flow {f.flow_id}: unknown class {f.class_id}")
            _check_path(self.topology, f)
            kind = f.shaper.get("kind", "quantum")
            if kind not in ("quantum", "leaky", "none"):
                raise ConfigError(f"flow {f.flow_id}: unknown shaper kind {kind!r}")
            if kind == "quantum":
                if f.sigma is None:
                    raise ConfigError(f"flow {f.flow_id}: quantum shaper needs sigma")
                if f.sigma < self.p_max(f.class_id):
                    raise ConfigError(
                        f"flow {f.flow_id}: sigma={f.sigma} below class P_max "
                        f"{self.p_max(f.class_id)}"
                    )
                if self.shaper_window(f) is None:
                    raise ConfigError(f"flow {f.flow_id}: quantum shaper needs D or a class d_k")
            elif kind == "leaky":
                missing = [k for k in ("capacity", "rate") if k not in f.shaper]
                if missing:
                    raise ConfigError(f"flow {f.flow_id}: leaky shaper needs {', '.join(missing)}")
                as_rate(f.shaper["rate"])
            if f.generator is not None:
                from .traffic import GeneratorSpec

                try:
                    gen = GeneratorSpec.from_dict(dict(self.generator_for(f)))
                except (TypeError, ValueError) as e:
                    raise ConfigError(f"flow {f.flow_id}: bad generator: {e}") from None
                if gen.max_size > self.p_max(f.class_id):
                    raise ConfigError(
                        f"flow {f.flow_id}: generator packets up to {gen.max_size} bits exceed "
                        f"class P_max {self.p_max(f.class_id)}"
                    )
            if self.topology.H is not None and len(f.path) > self.topology.H:
                raise ConfigError(f"flow {f.flow_id}: path longer than H={self.topology.H}")
        for name, sw in self.topology.switches.items():
            if sw.policy not in POLICIES:
                raise ConfigError(f"switch {name}: unknown policy {sw.policy!r}")
        if self.capacity_scope not in ("network", "first-hop"):
            raise ConfigError(f"unknown capacity_scope {self.capacity_scope!r}")

    def shaper_window(self, flow: FlowSpec) -> Optional[Ticks]:
        D = flow.shaper.get("D")
        if D is not None:
            return int(D)
        return self.class_of(flow.class_id).d_k


# --- JSON I/O -------------------------------------------------------------


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}: missing field {key!r}")
    return d[key]


def topology_from_dict(d: dict) -> Topology:
    switches = {}
    for i, s in enumerate(_req(d, "switches", "topology")):
        if isinstance(s, str):
            s = {"id": s}
        where = f"topology.switches[{i}]"
        sid = str(_req(s, "id", where))
        cap = s.get("egress_capacity")
        switches[sid] = Switch(
            sid,
            kind=s.get("kind", REAL),
            policy=s.get("policy", STRICT_PRIORITY),
            input_order=list(s.get("input_order", [])),
            egress_capacity=as_rate(cap) if cap is not None else None,
        )
    links = {}
    for i, l in enumerate(d.get("links", [])):
        where = f"topology.links[{i}]"
        link = Link(
            str(_req(l, "src", where)),
            str(_req(l, "dst", where)),
            as_rate(_req(l, "capacity", where)),
            int(l.get("propagation", 0)),
        )
        if link.capacity <= 0:
            raise ConfigError(f"{where}: capacity must be positive")
        links[(link.src, link.dst)] = link
    default = d.get("default_capacity")
    bn = d.get("bottleneck_capacity")
    return Topology(
        switches,
        links,
        as_rate(default) if default is not None else None,
        as_rate(bn) if bn is not None else None,
        d.get("H"),
    )


def scenario_from_dict(d: dict) -> Scenario:
    topo = topology_from_dict(_req(d, "topology", "scenario"))
    classes = []
    for i, c in enumerate(_req(d, "classes", "scenario")):
        where = f"classes[{i}]"
        classes.append(
            TrafficClass(
                int(_req(c, "class_id", where)),
                P_max_k=c.get("P_max_k"),
                d_k=c.get("d_k"),
                C_k=as_rate(c["C_k"]) if c.get("C_k") is not None else None,
            )
        )
    flows = []
    for i, f in enumerate(_req(d, "flows", "scenario")):
        where = f"flows[{i}]"
        flows.append(
            FlowSpec(
                str(_req(f, "flow_id", where)),
                int(_req(f, "class_id", where)),
                [str(n) for n in _req(f, "path", where)],
                f.get("sigma"),
                dict(f.get("shaper", {"kind": "quantum"})),
                f.get("generator"),
                f.get("ingress"),
            )
        )
    run = d.get("run", {})
    sc = Scenario(
        topo,
        classes,
        flows,
        dict(d.get("generators", {})),
        RunConfig(int(run.get("duration", 1000)), int(run.get("seed", 0)), run.get("tick", "1us")),
        d.get("capacity_scope", "network"),
    )
    sc.validate()
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    t = sc.topology
    topo = {
        "switches": [
            {
                "id": s.id,
                "kind": s.kind,
                "policy": s.policy,
                **({"input_order": s.input_order} if s.input_order else {}),
                **(
                    {"egress_capacity": rate_to_json(s.egress_capacity)}
                    if s.egress_capacity is not None
                    else {}
                ),
            }
            for s in t.switches.values()
            if s.kind == REAL
        ],
        "links": [
            {"src": l.src, "dst": l.dst, "capacity": rate_to_json(l.capacity), "propagation": l.propagation}
            for l in t.links.values()
        ],
    }
    if t.default_capacity is not None:
        topo["default_capacity"] = rate_to_json(t.default_capacity)
    classes = []
    for c in sc.classes:
        entry = {"class_id": c.class_id, "P_max_k": c.P_max_k}
        if c.d_k is not None:
            entry["d_k"] = c.d_k
        if c.C_k is not None:
            entry["C_k"] = rate_to_json(c.C_k)
        classes.append(entry)
    flows = []
    for f in sc.flows:
        entry = {
            "flow_id": f.flow_id,
            "class_id": f.class_id,
            "path": [n for n in f.path if not n.startswith("~pt:")],
            "shaper": f.shaper,
            "generator": f.generator,
        }
        if f.sigma is not None:
            entry["sigma"] = f.sigma
        if f.ingress is not None:
            entry["ingress"] = f.ingress
        flows.append(entry)
    return {
        "topology": topo,
        "classes": classes,
        "flows": flows,
        "generators": sc.generators,
        "run": {"duration": sc.run.duration, "seed": sc.run.seed, "tick": sc.run.tick},
        "capacity_scope": sc.capacity_scope,
    }


def load_scenario(path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from None
    return scenario_from_dict(data)
