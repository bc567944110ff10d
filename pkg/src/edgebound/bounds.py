"""Delay-bound and admission arithmetic.

Every intermediate quantity is an exact :class:`~fractions.Fraction`; only
the published per-class bound ``D_k`` is rounded, and always upward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .model import ConfigError, TrafficClass, validate_classes


class InfeasibleBound(ValueError):
    """The requested end-to-end bound leaves no room for an edge window."""


class ConditionError(ValueError):
    """Restricted multi-class bounds need every d_k / d_i to be an integer."""


@dataclass
class SingleClassConfig:
    D_prime: int
    H: int
    p_max: int
    C: object
    sigmas: list = field(default_factory=list)


def transit_ticks(H: int, p_max: int, C) -> int:
    """ceil((H - 1) * p_max / C): worst-case serialization after the first hop."""
    return math.ceil(Fraction((H - 1) * p_max) / Fraction(C))


def edge_window(cfg: SingleClassConfig) -> int:
    """Shaping window D = D' - (H-1) p_max / C, with the transit term rounded up."""
    if cfg.H < 1:
        raise ConfigError("H must be at least 1")
    D = cfg.D_prime - transit_ticks(cfg.H, cfg.p_max, cfg.C)
    if D <= 0:
        raise InfeasibleBound(
            f"D'={cfg.D_prime} does not exceed the transit term "
            f"{transit_ticks(cfg.H, cfg.p_max, cfg.C)} ticks"
        )
    return D


def admission_single(cfg: SingleClassConfig, D: int) -> bool:
    """Sum of per-flow window budgets must fit in one window of the bottleneck."""
    return sum(cfg.sigmas) <= D * Fraction(cfg.C)


def necessary_BI_bound(D: int, C):
    """Largest busy index a system with delay bound D on a rate-C link can show."""
    r = D * Fraction(C)
    return int(r) if r.denominator == 1 else r


def lemma1_scale(bound_B: int, a: int) -> int:
    """Volume bound over ``a`` back-to-back windows, each bounded by ``bound_B``."""
    if not isinstance(a, int) or a < 1:
        raise ValueError("a must be a positive integer")
    return a * bound_B


@dataclass
class ClassBound:
    class_id: int
    d_k: int
    alpha: Fraction
    delta: Fraction
    epsilon: Fraction
    zeta: Fraction
    D_k: int
    greedy_bound: int
    correction: Fraction = Fraction(0)
    repaired_delta: Optional[Fraction] = None

    @property
    def exact(self) -> Fraction:
        return self.delta + self.epsilon + self.zeta


@dataclass
class BoundReport:
    classes: list
    H: int
    C: object
    restricted: bool
    admitted: bool = True
    reasons: list = field(default_factory=list)
    conjectured: bool = False
    notes: list = field(default_factory=list)

    def for_class(self, k: int) -> ClassBound:
        return self.classes[k - 1]

    @property
    def loosest(self) -> int:
        return max(c.D_k for c in self.classes)

    def to_dict(self) -> dict:
        def q(x):
            if x is None:
                return None
            x = Fraction(x)
            return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

        return {
            "H": self.H,
            "C": q(self.C),
            "restricted": self.restricted,
            "conjectured": self.conjectured,
            "admitted": self.admitted,
            "reasons": self.reasons,
            "notes": self.notes,
            "classes": [
                {
                    "class_id": c.class_id,
                    "d_k": c.d_k,
                    "alpha_k": q(c.alpha),
                    "delta_k": q(c.delta),
                    "epsilon_k": q(c.epsilon),
                    "zeta_k": q(c.zeta),
                    "D_k": c.D_k,
                    "greedy_bound_k": c.greedy_bound,
                    **(
                        {"correction_k": q(c.correction), "repaired_delta_k": q(c.repaired_delta)}
                        if not self.restricted
                        else {}
                    ),
                }
                for c in self.classes
            ],
        }

    def table(self) -> str:
        head = f"{'k':>3} {'d_k':>6} {'alpha':>8} {'Delta':>9} {'eps':>8} {'zeta':>8} {'D_k':>6} {'greedy':>7}"
        lines = [head, "-" * len(head)]
        for c in self.classes:
            lines.append(
                f"{c.class_id:>3} {c.d_k:>6} {str(c.alpha):>8} {float(c.delta):>9.3f} "
                f"{float(c.epsilon):>8.3f} {float(c.zeta):>8.3f} {c.D_k:>6} {c.greedy_bound:>7}"
            )
        verdict = "admitted" if self.admitted else "admission rejected: " + "; ".join(self.reasons)
        lines.append(f"H={self.H} C={self.C} {verdict}")
        if self.conjectured:
            lines.append("general (non-integral) form: conjectured, not proven")
        return "\n".join(lines)


def multiclass_bounds(
    classes: Sequence[TrafficClass],
    H: int,
    C,
    restricted: bool = True,
    default_p_max: Optional[int] = None,
) -> BoundReport:
    """Per-class end-to-end bounds for K bounded classes plus best effort.

    ``classes`` lists classes 1..K (with ``d_k`` and ``C_k``) and optionally a
    trailing best-effort class.  A missing best-effort class contributes no
    blocking.  ``P_max_k`` left unset falls back to ``default_p_max``.
    """
    validate_classes(list(classes))
    C = Fraction(C)
    if C <= 0 or H < 1:
        raise ConfigError("C must be positive and H at least 1")
    bounded = [c for c in classes if not c.best_effort]

    def pmax(c):
        if c.P_max_k is not None:
            return c.P_max_k
        if default_p_max is None:
            raise ConfigError(f"class {c.class_id}: P_max_k unset and no default")
        return default_p_max

    if restricted:
        for k, ck in enumerate(bounded):
            for ci in bounded[:k]:
                if ck.d_k % ci.d_k:
                    raise ConditionError(
                        f"d_{ck.class_id}/d_{ci.class_id} = {ck.d_k}/{ci.d_k} is not an integer"
                    )

    report = BoundReport([], H, C, restricted, conjectured=not restricted)
    total_share = sum(Fraction(c.C_k) for c in bounded)
    if total_share > C:
        report.admitted = False
        report.reasons.append(f"condition 3: sum C_k = {total_share} exceeds C = {C}")
    if not restricted:
        report.notes.append(
            "correction term (ceil-floor)*C_i/C is dimensionless as printed; "
            "repaired_delta_k uses (ceil-floor)*d_i*C_i/C for comparison"
        )

    cumulative = Fraction(0)
    for k, ck in enumerate(bounded):
        cumulative += Fraction(ck.C_k)
        alpha = cumulative / C
        delta = alpha * ck.d_k
        correction = Fraction(0)
        repaired = None
        if not restricted:
            repaired_extra = Fraction(0)
            for ci in bounded[:k]:
                ratio = Fraction(ck.d_k, ci.d_k)
                gap = math.ceil(ratio) - math.floor(ratio)
                correction += gap * Fraction(ci.C_k) / C
                repaired_extra += gap * ci.d_k * Fraction(ci.C_k) / C
            repaired = delta + repaired_extra
            delta += correction
        lower = [pmax(c) for c in classes[k + 1 :]]
        blocking = Fraction(max(lower, default=0)) / C
        epsilon = H * blocking
        zeta = (H - 1) * Fraction(pmax(ck)) / C
        D_k = math.ceil(delta + epsilon + zeta)
        greedy = math.ceil(H * (ck.d_k + blocking))
        report.classes.append(
            ClassBound(ck.class_id, ck.d_k, alpha, delta, epsilon, zeta, D_k, greedy, correction, repaired)
        )
        if alpha > 1 and report.admitted:
            report.admitted = False
            report.reasons.append(f"alpha_{ck.class_id} = {alpha} exceeds 1")
    return report


def admission_multi(report: BoundReport, classes: Sequence[TrafficClass], sigmas_by_class: dict) -> BoundReport:
    """Fold per-class budget checks (sum sigma_i <= d_k * C_k) into ``report``."""
    for c in classes:
        if c.best_effort:
            continue
        total = sum(sigmas_by_class.get(c.class_id, []))
        if total > c.d_k * Fraction(c.C_k):
            report.admitted = False
            report.reasons.append(
                f"condition 2: class {c.class_id} budgets {total} exceed d_k*C_k = {c.d_k * Fraction(c.C_k)}"
            )
    return report


def scenario_bounds(scenario, restricted: Optional[bool] = None) -> BoundReport:
    """Bounds and admission verdicts for a validated :class:`~edgebound.model.Scenario`."""
    from .model import normalize_topology, real_ports

    topo, flows = normalize_topology(scenario.topology, scenario.flows)
    C = topo.bottleneck_capacity
    if restricted is None:
        bounded = [c for c in scenario.classes if not c.best_effort]
        restricted = all(b.d_k % a.d_k == 0 for i, b in enumerate(bounded) for a in bounded[:i])
    report = multiclass_bounds(scenario.classes, topo.H, C, restricted, default_p_max=scenario.p_max())
    sigmas: dict = {}
    for f in flows:
        if f.shaper.get("kind", "quantum") == "quantum":
            sigmas.setdefault(f.class_id, []).append(f.sigma)
        elif not scenario.class_of(f.class_id).best_effort:
            report.admitted = False
            report.reasons.append(f"flow {f.flow_id}: bounded class requires a quantum shaper")
    for f in flows:
        D = scenario.shaper_window(f)
        d_k = scenario.class_of(f.class_id).d_k
        if f.shaper.get("kind", "quantum") == "quantum" and d_k is not None and D > d_k:
            report.admitted = False
            report.reasons.append(f"flow {f.flow_id}: shaper window {D} exceeds class d_k {d_k}")
    admission_multi(report, scenario.classes, sigmas)
    if scenario.capacity_scope == "first-hop":
        by_port: dict = {}
        for f in flows:
            if f.sigma is None:
                continue
            port = real_ports(topo, f.path)[0]
            by_port.setdefault(port, []).append(f)
        for port, fs in by_port.items():
            cap = Fraction(topo.port_capacity(*port))
            for c in scenario.classes:
                if c.best_effort:
                    continue
                total = sum(f.sigma for f in fs if f.class_id == c.class_id)
                if total > c.d_k * cap:
                    report.admitted = False
                    report.reasons.append(f"first-hop port {port}: class {c.class_id} budgets exceed d_k*C")
    return report
