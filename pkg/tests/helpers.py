"""Small scenario builders shared by the test modules."""

from edgebound.model import FlowSpec, Link, RunConfig, Scenario, Switch, Topology, TrafficClass


def chain(n, capacity=1, propagation=0, policy="strict-priority"):
    """Switches s1..sn in a line, every port at ``capacity``."""
    ids = [f"s{i}" for i in range(1, n + 1)]
    switches = {s: Switch(s, policy=policy, egress_capacity=capacity) for s in ids}
    links = {(a, b): Link(a, b, capacity, propagation) for a, b in zip(ids, ids[1:])}
    return Topology(switches, links)


def flow(fid, path, cls=1, sigma=None, shaper=None, gen=None, ingress=None):
    shaper = shaper if shaper is not None else {"kind": "none"}
    return FlowSpec(fid, cls, list(path), sigma, shaper, gen, ingress)


def scenario(topo, classes, flows, duration=100, seed=0):
    if isinstance(classes, int):
        classes = [TrafficClass(1, P_max_k=classes)]
    sc = Scenario(topo, classes, flows, run=RunConfig(duration, seed))
    sc.validate()
    return sc


def once(size, t=0):
    return {"kind": "periodic", "period": 1, "size": size, "phase": t, "stop": t + 1}
