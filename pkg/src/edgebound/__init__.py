"""Edge traffic shaping with hop-count-independent delay bounds.

A quantum shaper at each flow's ingress, exact bound arithmetic for one or
several strict-priority classes, and a deterministic discrete-event
simulator with trace metrics to check the bounds empirically.
"""

from .bounds import (
    BoundReport,
    ConditionError,
    InfeasibleBound,
    SingleClassConfig,
    admission_multi,
    admission_single,
    edge_window,
    lemma1_scale,
    multiclass_bounds,
    necessary_BI_bound,
    scenario_bounds,
)
from .engine import EventTrace, SimResult, Simulation, run
from .model import (
    ConfigError,
    FlowSpec,
    Link,
    Packet,
    RunConfig,
    Scenario,
    Switch,
    Topology,
    TrafficClass,
    load_scenario,
    normalize_topology,
    scenario_from_dict,
    scenario_to_dict,
)
from .shaper import LeakyBucket, QuantumShaper, StarvationError, shape
from .traffic import GeneratorSpec, TrafficSource, next_arrivals

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "ConditionError", "InfeasibleBound", "SingleClassConfig",
    "admission_multi", "admission_single", "edge_window", "lemma1_scale",
    "multiclass_bounds", "necessary_BI_bound", "scenario_bounds",
    "EventTrace", "SimResult", "Simulation", "run",
    "ConfigError", "FlowSpec", "Link", "Packet", "RunConfig", "Scenario", "Switch",
    "Topology", "TrafficClass", "load_scenario", "normalize_topology",
    "scenario_from_dict", "scenario_to_dict",
    "LeakyBucket", "QuantumShaper", "StarvationError", "shape",
    "GeneratorSpec", "TrafficSource", "next_arrivals",
]
