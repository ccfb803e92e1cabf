"""Network-slice placement on a capacitated substrate.

Builds three-tier substrate topologies, places service chains with a
power-of-two-choices heuristic or exact search, verifies placements against
the full constraint set, and replays Poisson arrival workloads in an online
discrete-event simulator with blocking and utilization metrics.
"""

from .exact import (
    DEFAULT_NODE_BUDGET,
    InstanceTooLargeError,
    SolveResult,
    SolveStatus,
    brute_force,
    export_lp,
    solve_ilp1,
    solve_ilp2,
)
from .nspr import (
    DEFAULT_CATALOG,
    DEFAULT_MIX,
    ClassSpec,
    SliceClass,
    SliceRequest,
    VlDemand,
    VnfDemand,
    catalog_from_json,
    catalog_to_json,
    make_request,
    sample_class,
)
from .p2c import OutcomeStatus, PlacementOutcome, Policy, get_two_candidates, place
from .placement import (
    CONSTRAINT_NAMES,
    LATENCY_EPS,
    MalformedPlacementError,
    Placement,
    Verdict,
    apply_placement,
    bandwidth_cost,
    check_placement,
    feasible_servers,
    min_cost_path,
    release_placement,
)
from .sim import (
    Algorithm,
    AggregateReport,
    MetricsReport,
    Scenario,
    SimulationInvariantError,
    aggregate,
    arrival_rates_for_load,
    run,
)
from .topology import (
    CapacityError,
    CapacitySnapshot,
    DCKind,
    DataCenter,
    LinkKind,
    Node,
    NodeKind,
    PhysicalLink,
    PhysicalNetwork,
    ReleaseError,
    Server,
    TopologyError,
    TopologyParams,
    build_reference_psn,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "Algorithm",
    "CONSTRAINT_NAMES",
    "CapacityError",
    "CapacitySnapshot",
    "ClassSpec",
    "DCKind",
    "DEFAULT_CATALOG",
    "DEFAULT_MIX",
    "DEFAULT_NODE_BUDGET",
    "DataCenter",
    "InstanceTooLargeError",
    "LATENCY_EPS",
    "LinkKind",
    "MalformedPlacementError",
    "MetricsReport",
    "Node",
    "NodeKind",
    "OutcomeStatus",
    "PhysicalLink",
    "PhysicalNetwork",
    "Placement",
    "PlacementOutcome",
    "Policy",
    "ReleaseError",
    "Scenario",
    "Server",
    "SimulationInvariantError",
    "SliceClass",
    "SliceRequest",
    "SolveResult",
    "SolveStatus",
    "TopologyError",
    "TopologyParams",
    "Verdict",
    "VlDemand",
    "VnfDemand",
    "aggregate",
    "apply_placement",
    "arrival_rates_for_load",
    "bandwidth_cost",
    "brute_force",
    "build_reference_psn",
    "catalog_from_json",
    "catalog_to_json",
    "check_placement",
    "export_lp",
    "feasible_servers",
    "get_two_candidates",
    "make_request",
    "min_cost_path",
    "place",
    "release_placement",
    "run",
    "sample_class",
    "solve_ilp1",
    "solve_ilp2",
    "__version__",
]
