"""Scenario families and seeded campaigns that check the delay bounds.

Random topologies are feed-forward stage graphs: switches are arranged in
``H`` stages and every flow visits consecutive stages, so no flow path (and
no cross-flow dependency) loops.  Packet sizes are multiples of the
bottleneck capacity and every other port is at least as fast, which keeps
per-hop serialization times free of rounding slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import metrics
from .bounds import scenario_bounds
from .engine import Simulation
from .model import (
    STARVE_LOW_INPUT,
    FlowSpec,
    Link,
    RunConfig,
    Scenario,
    Switch,
    Topology,
    TrafficClass,
    bottleneck_capacity,
    scenario_to_dict,
)
from .shaper import LeakyBucket, QuantumShaper, run_greedy, shape

SUITES = ("fig4", "starvation", "single-class-bound", "multi-class-bound", "utilization")

WALKTHROUGH_INGRESS = [(1, 3), (2, 1), (3, 2), (3, 1), (4, 1)]
WALKTHROUGH_GOLDEN = [(1, 3), (2, 1), (7, 2), (7, 1), (8, 1)]
WALKTHROUGH_SIGMA = 4
WALKTHROUGH_D = 6


# --- random scenario construction -------------------------------------------


def _stage_graph(rng, H: int, unit: int, speedups) -> Topology:
    switches, links = {}, {}
    layers = []
    for s in range(1, H + 1):
        layer = [f"s{s}.{j}" for j in range(int(rng.integers(1, 4)))]
        layers.append(layer)
        for sid in layer:
            switches[sid] = Switch(sid, egress_capacity=_cap(rng, unit, speedups))
    for a, b in zip(layers, layers[1:]):
        for u in a:
            for v in b:
                links[(u, v)] = Link(u, v, _cap(rng, unit, speedups))
    topo = Topology(switches, links)
    topo.layers = layers
    return topo


def _cap(rng, unit, speedups):
    r = Fraction(speedups[int(rng.integers(len(speedups)))]) * unit
    return int(r) if r.denominator == 1 else r


def _random_path(rng, topo: Topology, H: int, length: Optional[int] = None, sink: Optional[str] = None) -> list:
    L = int(rng.integers(1, H + 1)) if length is None else length
    if sink is not None:
        return [str(rng.choice(topo.layers[s])) for s in range(H - L, H - 1)] + [sink]
    first = int(rng.integers(0, H - L + 1))
    return [str(rng.choice(topo.layers[s])) for s in range(first, first + L)]


def _force_bottleneck(topo: Topology, path: list, unit) -> None:
    u = path[0]
    if len(path) > 1:
        topo.links[(u, path[1])].capacity = unit
    else:
        topo.switches[u].egress_capacity = unit


def _random_generator(rng, unit: int, max_units: int, window: int, synchronized: bool = False) -> dict:
    if synchronized:
        return {"kind": "bursty", "burst_size": int(rng.integers(1, 6)), "packet_size": unit * max_units,
                "burst_gap": window * int(rng.integers(1, 3)), "phase": 0}
    kind = ("periodic", "bursty", "uniform", "greedy")[int(rng.integers(4))]
    size = unit * int(rng.integers(1, max_units + 1))
    phase = int(rng.integers(0, max(1, window)))
    if kind == "periodic":
        return {"kind": kind, "period": int(rng.integers(1, max(2, window))), "size": size, "phase": phase}
    if kind == "bursty":
        return {"kind": kind, "burst_size": int(rng.integers(1, 8)), "packet_size": size,
                "burst_gap": int(rng.integers(1, 2 * window + 1)), "phase": phase}
    if kind == "uniform":
        return {"kind": kind, "mean_gap": int(rng.integers(1, max(2, window // 2 + 1))),
                "size_range": [1, max_units], "unit": unit, "phase": phase}
    return {"kind": kind, "packet_size": size, "phase": phase}


def random_single_class(seed: int, max_flows: int = 20, max_H: int = 5,
                        converge: Optional[bool] = None) -> Scenario:
    """One edge-shaped class on a random stage graph, admitted with sum sigma <= D*C.

    ``converge`` routes every flow into one last-stage switch and fires
    synchronized maximum-size bursts; by default a third of seeds do so.
    """
    rng = np.random.default_rng([seed, 1])
    if converge is None:
        converge = seed % 3 == 2
    H = int(rng.integers(1, max_H + 1))
    unit = int(rng.choice([1, 8, 1500]))
    topo = _stage_graph(rng, H, unit, (1, "3/2", 2, 3))
    n = int(rng.integers(1, max_flows + 1))
    p_units = int(rng.integers(1, 5))
    sink = topo.layers[-1][0] if converge else None
    paths = [_random_path(rng, topo, H, H if i == 0 else None, sink) for i in range(n)]
    _force_bottleneck(topo, paths[0], unit)
    sigmas = [unit * (p_units + int(rng.integers(0, 2 * p_units + 1))) for _ in range(n)]
    D = sum(sigmas) // unit + int(rng.choice([0, 0, 0, 1, 5]))
    flows = [
        FlowSpec(f"f{i}", 1, paths[i], sigmas[i], {"kind": "quantum"},
                 _random_generator(rng, unit, p_units, D, converge))
        for i in range(n)
    ]
    duration = int(min(4000, D * int(rng.integers(8, 25))))
    sc = Scenario(topo, [TrafficClass(1, P_max_k=unit * p_units, d_k=D, C_k=unit)], flows,
                  run=RunConfig(duration, seed))
    C = bottleneck_capacity(sc.topology, flows)
    assert C == unit, (C, unit)
    sc.validate()
    return sc


def random_multi_class(seed: int, max_flows: int = 20, max_H: int = 5, restricted: bool = True,
                       converge: Optional[bool] = None) -> Scenario:
    """K in 2..3 bounded classes plus greedy best-effort background traffic.

    With ``restricted`` every d_k is an integer multiple of all smaller ones.
    ``converge`` works as in :func:`random_single_class`.
    """
    rng = np.random.default_rng([seed, 2])
    if converge is None:
        converge = seed % 3 == 2
    H = int(rng.integers(1, max_H + 1))
    K = int(rng.integers(2, 4))
    unit = int(rng.choice([1, 8, 100]))
    q = int(rng.integers(K, 5))
    C = unit * q
    topo = _stage_graph(rng, H, C, (1, 1, "3/2", 2))
    shares = [1] * K
    for _ in range(int(rng.integers(0, q - K + 1))):
        shares[int(rng.integers(K))] += 1
    if max_flows < K + 1:
        raise ValueError(f"max_flows must leave room for {K} bounded classes and best effort")
    n_be = min(int(rng.integers(1, 4)), max_flows - K)
    n_k = [int(rng.integers(1, 6)) for _ in range(K)]
    while sum(n_k) + n_be > max_flows:
        n_k[int(np.argmax(n_k))] -= 1
    p_units = [int(rng.integers(1, 4)) for _ in range(K + 1)]
    sigmas = [[C * (p_units[k] + int(rng.integers(0, 3))) for _ in range(n_k[k])] for k in range(K)]
    need = [math.ceil(Fraction(sum(sigmas[k]), unit * shares[k])) for k in range(K)]
    d = []
    for k in range(K):
        if k == 0:
            d.append(need[0] + int(rng.integers(0, 4)))
            continue
        if restricted:
            v = d[-1] * int(rng.integers(1, 4))
            while v < need[k]:
                v += d[-1]
        else:
            v = max(d[-1], need[k]) + int(rng.integers(0, d[-1] + 1))
        d.append(v)
    classes = [TrafficClass(k + 1, P_max_k=C * p_units[k], d_k=d[k], C_k=unit * shares[k]) for k in range(K)]
    classes.append(TrafficClass(K + 1, P_max_k=C * p_units[K]))
    flows = []
    first = True
    sink = topo.layers[-1][0] if converge else None
    for k in range(K):
        for i, sigma in enumerate(sigmas[k]):
            path = _random_path(rng, topo, H, H if first else None, sink)
            first = False
            flows.append(FlowSpec(f"c{k + 1}.{i}", k + 1, path, sigma, {"kind": "quantum"},
                                  _random_generator(rng, C, p_units[k], d[k], converge)))
    for i in range(n_be):
        path = _random_path(rng, topo, H, None, sink)
        flows.append(FlowSpec(f"be.{i}", K + 1, path, None, {"kind": "none"},
                              {"kind": "greedy", "packet_size": C * p_units[K],
                               "phase": int(rng.integers(0, d[0]))}))
    _force_bottleneck(topo, flows[0].path, C)
    duration = int(min(3000, d[-1] * int(rng.integers(4, 12))))
    sc = Scenario(topo, classes, flows, run=RunConfig(duration, seed))
    assert bottleneck_capacity(topo, flows) == C
    sc.validate()
    return sc


# --- campaign results ------------------------------------------------------------


@dataclass
class ScenarioResult:
    seed: int
    H: int
    C: object
    n_flows: int
    bounds: dict
    max_delay: dict
    violations: dict
    max_BI: int
    BI_limit: object
    identity_failures: list = field(default_factory=list)
    work_conservation: list = field(default_factory=list)
    greedy_ok: bool = True
    delivered: int = 0

    @property
    def ok(self) -> bool:
        return (not any(self.violations.values()) and self.max_BI <= self.BI_limit
                and not self.identity_failures and not self.work_conservation and self.greedy_ok)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "H": self.H, "C": str(self.C), "flows": self.n_flows,
            "delivered": self.delivered, "bound": self.bounds, "max_delay": self.max_delay,
            "margin": {k: self.bounds[k] - v for k, v in self.max_delay.items() if v is not None},
            "violations": self.violations, "max_BI": self.max_BI, "BI_limit": str(self.BI_limit),
            "identity_failures": self.identity_failures,
            "work_conservation_gaps": len(self.work_conservation), "greedy_ok": self.greedy_ok,
            "ok": self.ok,
        }


def check_scenario(sc: Scenario, identities: bool = True, window: Optional[int] = None) -> ScenarioResult:
    """Simulate ``sc`` to completion and compare every delay with its bound."""
    report = scenario_bounds(sc)
    if not report.admitted:
        raise ValueError("scenario not admitted: " + "; ".join(report.reasons))
    res = Simulation(sc).run()
    view = metrics.TraceView(res.trace)
    bounded = [c.class_id for c in sc.classes if not c.best_effort]
    bounds, max_delay, viol = {}, {}, {}
    for k in bounded:
        b = report.for_class(k).D_k
        d = res.delays(k)
        bounds[k] = b
        max_delay[k] = int(d.max()) if d.size else None
        viol[k] = int((d > b).sum())
    loosest = max(bounds.values())
    mask_classes = bounded if len(bounded) < len(sc.classes) else None
    if mask_classes is None:
        bi = metrics.max_BI(view)
    else:
        bi = max(_max_bi_classes(view, mask_classes), 0)
    out = ScenarioResult(sc.run.seed, res.H, res.C, len(sc.flows), bounds, max_delay, viol,
                         int(bi), loosest * res.C, delivered=len(res.delivered))
    out.greedy_ok = all(report.for_class(k).D_k <= report.for_class(k).greedy_bound for k in bounded)
    out.work_conservation = metrics.audit_work_conservation(view)
    if identities:
        w = window or sc.class_of(1).d_k
        out.identity_failures = metrics.metric_identities(view, w)
    return out


def _max_bi_classes(view, classes) -> int:
    a = np.unique(np.concatenate([view.select(None, k)[0] for k in classes]))
    if a.size == 0:
        return 0
    total = sum(np.asarray(metrics.busy_index(view, a, None, k)) for k in classes)
    return int(np.max(total))


def minimize(sc: Scenario, still_fails) -> Scenario:
    """Drop flows one at a time while ``still_fails(scenario)`` stays true."""
    flows = list(sc.flows)
    i = 0
    while i < len(flows) and len(flows) > 1:
        trial = flows[:i] + flows[i + 1:]
        cand = Scenario(sc.topology, sc.classes, trial, sc.generators, sc.run, sc.capacity_scope)
        try:
            bad = still_fails(cand)
        except ValueError:
            bad = False
        if bad:
            flows = trial
        else:
            i += 1
    return Scenario(sc.topology, sc.classes, flows, sc.generators, sc.run, sc.capacity_scope)


def bound_campaign(kind: str, seeds, identities: bool = True, restricted: bool = True) -> dict:
    """Run the single- or multi-class bound family over ``seeds``."""
    build = random_single_class if kind == "single-class-bound" else (
        lambda s: random_multi_class(s, restricted=restricted))
    results, failing = [], []
    for seed in sorted(seeds):
        sc = build(seed)
        r = check_scenario(sc, identities=identities)
        results.append(r)
        if not r.ok:
            failing.append(sc)
    reproduction = None
    if failing:
        first = failing[0]

        def still_fails(c):
            return not check_scenario(c, identities=False).ok

        reproduction = scenario_to_dict(minimize(first, still_fails))
    return {
        "suite": kind,
        "scenarios": len(results),
        "violations": sum(sum(r.violations.values()) for r in results),
        "bi_violations": sum(r.max_BI > r.BI_limit for r in results),
        "identity_failures": sum(bool(r.identity_failures) for r in results),
        "work_conservation_failures": sum(bool(r.work_conservation) for r in results),
        "min_margin": min((m for r in results for m in r.to_dict()["margin"].values()), default=None),
        "results": [r.to_dict() for r in results],
        "reproduction": reproduction,
        "ok": not failing,
    }


# --- named scenarios --------------------------------------------------------------


def fig4_suite() -> dict:
    quantum = shape(QuantumShaper(WALKTHROUGH_SIGMA, WALKTHROUGH_D), WALKTHROUGH_INGRESS)
    lb3 = shape(LeakyBucket(WALKTHROUGH_SIGMA, Fraction(3, 6)), WALKTHROUGH_INGRESS)
    lb1 = shape(LeakyBucket(WALKTHROUGH_SIGMA, Fraction(1, 6)), WALKTHROUGH_INGRESS)

    def wmax(egress):
        return metrics.sliding_window_max([t for t, _ in egress], [s for _, s in egress], WALKTHROUGH_D)

    q_max, lb3_max, lb1_max = wmax(quantum), wmax(lb3), wmax(lb1)
    return {
        "suite": "fig4",
        "quantum_egress": quantum,
        "golden": WALKTHROUGH_GOLDEN,
        "golden_match": quantum == WALKTHROUGH_GOLDEN,
        "quantum_window_max": q_max,
        "leaky_3_per_6_egress": lb3,
        "leaky_3_per_6_window_max": lb3_max,
        "leaky_1_per_6_egress": lb1,
        "leaky_1_per_6_window_max": lb1_max,
        "ok": quantum == WALKTHROUGH_GOLDEN and q_max[0] <= WALKTHROUGH_SIGMA and lb3_max[0] > WALKTHROUGH_SIGMA
        and lb1_max[0] <= WALKTHROUGH_SIGMA,
    }


def starvation_scenario(p_max: int = 4, capacity: int = 1, duration: int = 1000) -> Scenario:
    """One switch that always prefers input 1; input 1 runs at line rate."""
    topo = Topology({"s": Switch("s", policy=STARVE_LOW_INPUT, input_order=["in1", "in2"],
                                 egress_capacity=capacity)}, {})
    period = math.ceil(Fraction(p_max, capacity))
    flows = [
        FlowSpec("hog", 1, ["s"], None, {"kind": "none"},
                 {"kind": "periodic", "period": period, "size": p_max}, ingress="in1"),
        FlowSpec("victim", 1, ["s"], None, {"kind": "none"},
                 {"kind": "periodic", "period": 1, "size": p_max, "stop": 1}, ingress="in2"),
    ]
    return Scenario(topo, [TrafficClass(1, P_max_k=p_max)], flows, run=RunConfig(duration, 0))


def starvation_suite(horizons=(10**3, 10**4, 10**5), p_max: int = 4) -> dict:
    rows = []
    for h in horizons:
        sc = starvation_scenario(p_max, duration=h)
        res = Simulation(sc).run(horizon=h)
        victim = next(p for p in res.packets if p.flow_id == "victim")
        waiting = (victim.hops[-1].start if victim.hops[-1].start is not None else h) - victim.hops[0].arrival
        rows.append({"horizon": h, "victim_wait": waiting, "victim_departed": victim.delivered,
                     "max_BI": metrics.max_BI(res.trace)})
    linear = all(r["victim_wait"] == r["horizon"] and not r["victim_departed"] for r in rows)
    bi_ok = all(r["max_BI"] <= 2 * p_max for r in rows)
    return {"suite": "starvation", "p_max": p_max, "rows": rows, "wait_grows_linearly": linear,
            "bi_bounded": bi_ok, "ok": linear and bi_ok}


def utilization_suite(sigma: int = 4, D: int = 6, size: int = 1, periods: int = 1000) -> dict:
    horizon = periods * D
    q_times = run_greedy(QuantumShaper(sigma, D), size, horizon)
    q_rate = Fraction(len(q_times) * size, horizon)
    slow = Fraction(1, D)
    lb_times = run_greedy(LeakyBucket(sigma, slow), size, horizon)
    half = horizon // 2
    lb_steady = Fraction(sum(size for t in lb_times if t >= half), horizon - half)
    target = Fraction(sigma, D)
    rel = abs(q_rate - target) / target
    return {"suite": "utilization", "sigma": sigma, "D": D, "horizon": horizon,
            "quantum_rate": float(q_rate), "target_rate": float(target), "relative_error": float(rel),
            "leaky_rate_steady": float(lb_steady), "leaky_fill_rate": float(slow),
            "ok": rel <= Fraction(1, 100) and lb_steady <= slow}


def run_suite(name: str, seeds=range(100)) -> dict:
    if name == "fig4":
        return fig4_suite()
    if name == "starvation":
        return starvation_suite()
    if name == "utilization":
        return utilization_suite()
    if name in ("single-class-bound", "multi-class-bound"):
        return bound_campaign(name, seeds)
    raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
