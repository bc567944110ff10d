"""Acceptance criteria, one test each, at the stated tolerances.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from edgebound import metrics
from edgebound.bounds import scenario_bounds
from edgebound.engine import Simulation
from edgebound.experiments import (
    WALKTHROUGH_D,
    WALKTHROUGH_GOLDEN,
    WALKTHROUGH_INGRESS,
    WALKTHROUGH_SIGMA,
    check_scenario,
    random_multi_class,
    random_single_class,
    starvation_suite,
    utilization_suite,
)
from edgebound.model import normalize_topology
from edgebound.shaper import LeakyBucket, QuantumShaper, run_greedy, shape
from edgebound.traffic import next_arrivals

SEEDS = range(100)


def window_max(egress, d):
    return metrics.sliding_window_max([t for t, _ in egress], [s for _, s in egress], d)


@pytest.mark.criterion(1, "golden shaper trace")
def test_golden_trace(record_property):
    t0 = time.perf_counter()
    egress = shape(QuantumShaper(WALKTHROUGH_SIGMA, WALKTHROUGH_D), WALKTHROUGH_INGRESS)
    elapsed = time.perf_counter() - t0
    record_property("egress", egress)
    record_property("seconds", round(elapsed, 4))
    assert egress == WALKTHROUGH_GOLDEN == [(1, 3), (2, 1), (7, 2), (7, 1), (8, 1)]
    assert elapsed < 1.0


def _random_ingress(kind, seed):
    rng = np.random.default_rng([seed, 77])
    sigma = int(rng.integers(1, 13))
    D = int(rng.integers(1, 16))
    p = int(rng.integers(1, sigma + 1))
    horizon = 40 * D + 20
    if kind == "periodic":
        spec = {"kind": "periodic", "period": int(rng.integers(1, D + 2)), "size": p,
                "phase": int(rng.integers(0, D))}
    elif kind == "bursty":
        spec = {"kind": "bursty", "burst_size": int(rng.integers(1, 3 * sigma + 1)), "packet_size": p,
                "burst_gap": int(rng.integers(1, 3 * D + 2)), "phase": int(rng.integers(0, D))}
    else:
        spec = {"kind": "uniform", "mean_gap": int(rng.integers(1, D + 2)), "size_range": [1, p]}
    return sigma, D, p, horizon, spec, seed


@pytest.mark.criterion(2, "shaper egress window property over random traces")
def test_window_property(record_property):
    t0 = time.perf_counter()
    counts, violations = {}, 0
    short = []
    for kind in ("periodic", "bursty", "uniform", "greedy"):
        n = 0
        for seed in range(1000):
            if kind == "greedy":
                rng = np.random.default_rng([seed, 78])
                sigma, D = int(rng.integers(1, 13)), int(rng.integers(1, 16))
                p = int(rng.integers(1, sigma + 1))
                times = run_greedy(QuantumShaper(sigma, D), p, 40 * D)
                egress = [(t, p) for t in times]
            else:
                sigma, D, p, horizon, spec, s = _random_ingress(kind, seed)
                egress = shape(QuantumShaper(sigma, D), next_arrivals(spec, horizon, seed=s))
            n += 1
            if window_max(egress, D)[0] > sigma:
                violations += 1
            if len(short) < 50 and egress and egress[-1][0] <= 400 and seed % 7 == 0:
                short.append((egress, D))
        counts[kind] = n
    mismatches = 0
    for egress, D in short:
        fast = window_max(egress, D)[0]
        slow = metrics.sliding_window_max_bruteforce([t for t, _ in egress], [s for _, s in egress], D)[0]
        mismatches += fast != slow
    elapsed = time.perf_counter() - t0
    record_property("traces", counts)
    record_property("violations", violations)
    record_property("oracle_crosschecks", len(short))
    record_property("seconds", round(elapsed, 1))
    assert all(v >= 1000 for v in counts.values())
    assert violations == 0
    assert len(short) == 50 and mismatches == 0
    assert elapsed < 120


@pytest.mark.criterion(3, "leaky bucket breaks the window or underutilizes")
def test_leaky_bucket(record_property):
    fast = shape(LeakyBucket(4, Fraction(3, 6)), WALKTHROUGH_INGRESS)
    slow = shape(LeakyBucket(4, Fraction(1, 6)), WALKTHROUGH_INGRESS)
    fast_max, at = window_max(fast, 6)
    slow_max, _ = window_max(slow, 6)
    horizon = 6000
    greedy = run_greedy(LeakyBucket(4, Fraction(1, 6)), 1, horizon)
    steady = Fraction(sum(1 for t in greedy if t >= horizon // 2), horizon - horizon // 2)
    record_property("fast_window_max", (fast_max, at))
    record_property("slow_window_max", slow_max)
    record_property("slow_long_run_rate", str(steady))
    assert fast_max > 4
    assert slow_max <= 4
    assert steady <= Fraction(1, 6)


def _single_class_run(seed):
    sc = random_single_class(seed)
    topo, flows = normalize_topology(sc.topology, sc.flows)
    H, C = topo.H, Fraction(topo.bottleneck_capacity)
    p = sc.p_max()
    Ds = {sc.shaper_window(f) for f in flows}
    assert len(Ds) == 1
    D = Ds.pop()
    assert sum(f.sigma for f in flows) <= D * C
    bound = D + (H - 1) * Fraction(p) / C
    res = Simulation(sc).run()
    delays = res.delays()
    return sc, res, bound, delays


_campaign_cache: dict = {}


def _campaigns():
    if not _campaign_cache:
        single, multi = [], []
        for seed in SEEDS:
            single.append(check_scenario(random_single_class(seed)))
            multi.append(check_scenario(random_multi_class(seed)))
        _campaign_cache["single"] = single
        _campaign_cache["multi"] = multi
    return _campaign_cache["single"], _campaign_cache["multi"]


@pytest.mark.criterion(4, "single-class edge-shaped end-to-end bound")
def test_single_class_bound(record_property):
    t0 = time.perf_counter()
    violations, packets, worst = 0, 0, Fraction(0)
    Hs = set()
    for seed in SEEDS:
        sc, res, bound, delays = _single_class_run(seed)
        Hs.add(res.H)
        assert len(sc.flows) <= 20 and not res.in_flight
        packets += delays.size
        violations += int((delays > bound).sum())
        if delays.size:
            worst = max(worst, Fraction(int(delays.max())) / bound)
    elapsed = time.perf_counter() - t0
    record_property("scenarios", len(SEEDS))
    record_property("packets", packets)
    record_property("worst_delay_over_bound", f"{float(worst):.3f}")
    record_property("H_seen", sorted(Hs))
    record_property("seconds", round(elapsed, 1))
    assert violations == 0
    assert Hs == {1, 2, 3, 4, 5}
    assert elapsed < 300


@pytest.mark.criterion(5, "multi-class per-class bound")
def test_multi_class_bound(record_property):
    t0 = time.perf_counter()
    _, multi = _campaigns()
    violations = sum(sum(r.violations.values()) for r in multi)
    packets = sum(r.delivered for r in multi)
    Ks = {len(r.bounds) for r in multi}
    ratios = [r.max_delay[k] / r.bounds[k] for r in multi for k in r.bounds if r.max_delay[k] is not None]
    greedy_ok = all(r.greedy_ok for r in multi)
    for seed in SEEDS[:20]:
        report = scenario_bounds(random_multi_class(seed))
        for c in report.classes:
            assert c.D_k <= c.greedy_bound
    record_property("scenarios", len(multi))
    record_property("packets", packets)
    record_property("K_seen", sorted(Ks))
    record_property("worst_delay_over_bound", f"{max(ratios):.3f}")
    record_property("seconds", round(time.perf_counter() - t0, 1))
    assert len(multi) >= 100 and Ks == {2, 3}
    assert violations == 0
    assert greedy_ok


@pytest.mark.criterion(6, "busy index within loosest bound times C")
def test_busy_index_consistency(record_property):
    single, multi = _campaigns()
    bad = [(r.seed, r.max_BI, r.BI_limit) for r in single + multi if r.max_BI > r.BI_limit]
    record_property("scenarios", len(single) + len(multi))
    record_property("worst_BI_over_limit",
                    f"{float(max(Fraction(r.max_BI) / Fraction(r.BI_limit) for r in single + multi)):.3f}")
    assert not bad


@pytest.mark.criterion(7, "input-priority starvation: bounded BI, unbounded wait")
def test_starvation(record_property):
    s = starvation_suite((10**3, 10**4, 10**5))
    rows = s["rows"]
    record_property("rows", [(r["horizon"], r["victim_wait"], r["max_BI"]) for r in rows])
    assert all(r["max_BI"] <= 2 * s["p_max"] for r in rows)
    assert all(not r["victim_departed"] for r in rows)
    waits = np.array([r["victim_wait"] for r in rows], dtype=float)
    hs = np.array([r["horizon"] for r in rows], dtype=float)
    # wait proportional to horizon: constant ratio, slope 1
    assert np.allclose(waits / hs, waits[0] / hs[0]) and waits[0] / hs[0] > 0.9


@pytest.mark.criterion(8, "greedy source reaches sigma/D through the shaper")
def test_utilization(record_property):
    s = utilization_suite(sigma=4, D=6, size=1, periods=1000)
    record_property("quantum_rate", round(s["quantum_rate"], 5))
    record_property("target", round(s["target_rate"], 5))
    record_property("leaky_rate", round(s["leaky_rate_steady"], 5))
    assert s["horizon"] == 1000 * 6
    assert s["relative_error"] <= 0.01
    assert s["leaky_rate_steady"] < s["target_rate"]


@pytest.mark.criterion(9, "volume identities exact on every simulated trace")
def test_identities(record_property):
    single, multi = _campaigns()
    fails = [(r.seed, r.identity_failures) for r in single + multi if r.identity_failures]
    traces = len(single) + len(multi)
    from edgebound.experiments import starvation_scenario

    for h in (10**3, 10**4):
        tr = Simulation(starvation_scenario(duration=h)).run(horizon=h).trace
        for d in (1, 4, 50):
            f = metrics.metric_identities(tr, d)
            if f:
                fails.append((f"starvation-{h}", f))
        traces += 1
    for seed in range(20):
        tr = Simulation(random_multi_class(seed)).run().trace
        for d in (1, 7, 64):
            f = metrics.metric_identities(tr, d)
            if f:
                fails.append((seed, d, f))
    record_property("traces", traces + 20)
    assert not fails, fails[:3]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
