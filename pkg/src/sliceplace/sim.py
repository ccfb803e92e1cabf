"""Online discrete-event simulation of slice arrivals and departures.

One run clones the substrate, draws Poisson arrivals calibrated to a target
CPU load, places each request against current residuals with the chosen
algorithm, holds accepted slices for an exponential time (departures release
resources), and reports blocking, per-VNF blocking attribution, and
time-averaged utilization per data-center tier.

Simultaneous events process departures before arrivals so capacity freed at
time t is visible to an arrival at t. Randomness is split into five
independent streams (arrival gaps, class draws, UAP draws, holding times,
placement decisions), so runs with the same seed pair arrival processes
across algorithms while placement draws stay independent.
"""

from __future__ import annotations

import csv
import heapq
import time
from dataclasses import dataclass, field
from enum import Enum
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from .exact import DEFAULT_NODE_BUDGET, SolveStatus, solve_ilp1, solve_ilp2
from .nspr import (DEFAULT_CATALOG, DEFAULT_MIX, ClassSpec, SliceClass,
                   SliceRequest, make_request, sample_class)
from .p2c import Policy, place
from .placement import (Placement, apply_placement, check_placement,
                        release_placement)
from .topology import LinkKind, PhysicalNetwork

TIER_GROUPS = ("EDC", "CDC", "CCP")
ALL_GROUPS = TIER_GROUPS + ("transport",)


class Algorithm(str, Enum):
    P2C_1 = "p2c-1"
    P2C_2 = "p2c-2"
    ILP_1 = "ilp-1"
    ILP_2 = "ilp-2"

    @classmethod
    def parse(cls, name: str) -> "Algorithm":
        key = name.strip().lower().replace("_", "-")
        if key in ("p2c1", "p2c-1"):
            return cls.P2C_1
        if key in ("p2c2", "p2c-2"):
            return cls.P2C_2
        if key in ("ilp1", "ilp-1"):
            return cls.ILP_1
        if key in ("ilp2", "ilp-2"):
            return cls.ILP_2
        raise ValueError(f"unknown algorithm {name!r}")


class SimulationInvariantError(RuntimeError):
    """Raised in validate mode when a checked invariant breaks mid-run."""


_NAMED_MIXES = {
    "BEF": {SliceClass.BEST_EFFORT: 1.0},
    "URLLC": {SliceClass.URLLC: 1.0},
    "eMBB": {SliceClass.EMBB: 1.0},
    "MIX": dict(DEFAULT_MIX),
}


@dataclass(frozen=True)
class Scenario:
    name: str
    mix: Mapping[SliceClass, float]
    target_load: float
    horizon: float = 2000.0
    mean_holding: float = 100.0
    replications: int = 1
    base_seed: int = 1
    warmup: float = 0.0
    include_holding_time: bool = True

    def __post_init__(self) -> None:
        if self.target_load <= 0:
            raise ValueError("target_load must be positive")
        if self.horizon <= 0 or self.mean_holding <= 0:
            raise ValueError("horizon and mean_holding must be positive")
        if not 0 <= self.warmup < self.horizon:
            raise ValueError("warmup must lie in [0, horizon)")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.mix:
            raise ValueError("mix is empty")
        total = sum(self.mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mix sums to {total}, need 1")

    @classmethod
    def named(cls, name: str, target_load: float, **kwargs) -> "Scenario":
        for known, mix in _NAMED_MIXES.items():
            if name.lower() == known.lower():
                return cls(name=known, mix=mix, target_load=target_load, **kwargs)
        raise ValueError(f"unknown scenario name {name!r}; "
                         f"known: {', '.join(_NAMED_MIXES)}")

    def fingerprint(self) -> tuple:
        return (self.name, tuple(sorted((c.value, p) for c, p in self.mix.items())),
                self.target_load, self.horizon, self.mean_holding, self.warmup,
                self.include_holding_time)


def arrival_rates_for_load(psn: PhysicalNetwork, mix: Mapping[SliceClass, float],
                           rho: float, *,
                           catalog: Mapping[SliceClass, ClassSpec] = DEFAULT_CATALOG,
                           mean_holding: float = 100.0,
                           include_holding_time: bool = True) -> dict[SliceClass, float]:
    """Per-class arrival rates so the offered CPU load equals rho.

    Solves sum_k lambda_k * hold * A_k = rho * C for rates proportional to the
    mix, where A_k is one request's total CPU demand and C the substrate's
    CPU capacity. include_holding_time=False drops the hold factor (the raw
    arrival-mass convention)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    if not mix:
        raise ValueError("mix is empty")
    total_cpu = psn.total_cpu_capacity()
    hold = mean_holding if include_holding_time else 1.0
    denom = 0.0
    for cls_, share in mix.items():
        spec = catalog[cls_]
        denom += share * spec.cpu_per_vnf * spec.chain_length * hold
    if denom <= 0:
        raise ValueError("mix carries no CPU demand")
    big_lambda = rho * total_cpu / denom
    return {cls_: big_lambda * share for cls_, share in mix.items()}


@dataclass
class MetricsReport:
    scenario_name: str
    algorithm: str
    seed: int | tuple
    target_load: float
    horizon: float
    mean_holding: float
    warmup: float
    arrivals: int = 0
    accepted: int = 0
    rejected: int = 0
    rejected_budget: int = 0
    departures: int = 0
    validated_accepted: int = 0
    per_class: dict[str, dict[str, float]] = field(default_factory=dict)
    blocking_attribution: dict[int, int] = field(default_factory=dict)
    blocking_ratio: float = 0.0
    acceptance_ratio: float = 0.0
    mean_cost_accepted: float = 0.0
    utilization: dict[str, dict[str, float]] = field(default_factory=dict)
    held_time_avg: dict[str, dict[str, float]] = field(default_factory=dict)
    held_bw_total_time_avg: float = 0.0
    placement_time_ms: dict[str, float] | None = None
    series: list[tuple[float, str, str, float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        obj = {
            "schema": "metrics/1",
            "scenario": self.scenario_name,
            "algorithm": self.algorithm,
            "seed": list(self.seed) if isinstance(self.seed, tuple) else self.seed,
            "target_load": self.target_load,
            "horizon": self.horizon,
            "mean_holding": self.mean_holding,
            "warmup": self.warmup,
            "arrivals": self.arrivals,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "rejected_budget": self.rejected_budget,
            "departures": self.departures,
            "validated_accepted": self.validated_accepted,
            "per_class": self.per_class,
            "blocking_attribution": {str(k): v for k, v in sorted(self.blocking_attribution.items())},
            "blocking_ratio": self.blocking_ratio,
            "acceptance_ratio": self.acceptance_ratio,
            "mean_cost_accepted": self.mean_cost_accepted,
            "utilization": self.utilization,
            "held_time_avg": self.held_time_avg,
            "held_bw_total_time_avg": self.held_bw_total_time_avg,
        }
        if self.placement_time_ms is not None:
            obj["placement_time_ms"] = self.placement_time_ms
        return obj

    def series_to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "dc_tier", "resource", "used", "capacity"])
            for row in self.series:
                writer.writerow(row)


class _Accounting:
    """Tier-grouped capacity bookkeeping plus time-weighted integrals."""

    def __init__(self, net: PhysicalNetwork, warmup: float, horizon: float,
                 series_interval: float | None) -> None:
        self.warmup = warmup
        self.horizon = horizon
        self.server_group: dict[int, str] = {}
        self.link_group: dict[int, str | None] = {}
        self.cap: dict[tuple[str, str], float] = {}
        for g in ALL_GROUPS:
            for res in ("cpu", "ram", "bw"):
                self.cap[(g, res)] = 0.0
        for srv in net.servers():
            g = net.dc_of(srv.id).kind.value
            self.server_group[srv.id] = g
            self.cap[(g, "cpu")] += srv.cpu_capacity
            self.cap[(g, "ram")] += srv.ram_capacity
        for link in net.links:
            if link.kind is LinkKind.TRANSPORT:
                g = "transport"
            elif link.kind is LinkKind.INTRA_DC:
                g = net.data_centers[net.nodes[link.a].dc or net.nodes[link.b].dc].kind.value
            else:
                self.link_group[link.id] = None
                continue
            self.link_group[link.id] = g
            self.cap[(g, "bw")] += link.bw_capacity
        self.held: dict[tuple[str, str], float] = {k: 0.0 for k in self.cap}
        self.integral: dict[tuple[str, str], float] = {k: 0.0 for k in self.cap}
        self.last_t = 0.0
        self.series: list[tuple[float, str, str, float, float]] = []
        self.interval = series_interval
        self.next_sample = 0.0

    def _rows_at(self, t: float) -> None:
        for g in ALL_GROUPS:
            for res in ("cpu", "ram", "bw"):
                capacity = self.cap[(g, res)]
                if capacity == 0.0:
                    continue
                self.series.append((t, g, res, self.held[(g, res)], capacity))

    def advance(self, t: float) -> None:
        t = min(t, self.horizon)
        if self.interval is not None:
            while self.next_sample <= t + 1e-12 and self.next_sample <= self.horizon:
                self._rows_at(self.next_sample)
                self.next_sample += self.interval
        lo = max(self.last_t, self.warmup)
        if t > lo:
            dt = t - lo
            for key, amount in self.held.items():
                if amount:
                    self.integral[key] += amount * dt
        self.last_t = max(self.last_t, t)

    def commit(self, request: SliceRequest, placement: Placement,
               sign: float) -> None:
        for v, s in placement.x.items():
            d = request.vnf(v)
            g = self.server_group[s]
            self.held[(g, "cpu")] += sign * d.cpu
            self.held[(g, "ram")] += sign * d.ram
        for i, path in placement.y.items():
            bw = request.vl(i).bw
            for lid in path:
                g = self.link_group[lid]
                if g is not None:
                    self.held[(g, "bw")] += sign * bw

    def finish(self) -> None:
        self.advance(self.horizon)
        if self.interval is not None and self.next_sample > self.horizon:
            last_rows = [r for r in self.series if r[0] == self.horizon]
            if not last_rows:
                self._rows_at(self.horizon)

    def summaries(self) -> tuple[dict, dict, float]:
        duration = self.horizon - self.warmup
        util: dict[str, dict[str, float]] = {}
        avg: dict[str, dict[str, float]] = {}
        total_bw = 0.0
        for g in ALL_GROUPS:
            for res in ("cpu", "ram", "bw"):
                capacity = self.cap[(g, res)]
                if capacity == 0.0:
                    continue
                mean_held = self.integral[(g, res)] / duration
                avg.setdefault(g, {})[res] = mean_held
                util.setdefault(g, {})[res] = mean_held / capacity
                if res == "bw":
                    total_bw += mean_held
        # whole-substrate roll-up
        for res in ("cpu", "ram", "bw"):
            cap_total = sum(self.cap[(g, res)] for g in ALL_GROUPS)
            if cap_total:
                mean_held = sum(self.integral[(g, res)] for g in ALL_GROUPS) / duration
                avg.setdefault("total", {})[res] = mean_held
                util.setdefault("total", {})[res] = mean_held / cap_total
        return util, avg, total_bw


def _audit_conservation(net: PhysicalNetwork,
                        held: dict[int, tuple[SliceRequest, Placement]]) -> None:
    want_cpu: dict[int, float] = {}
    want_ram: dict[int, float] = {}
    want_bw: dict[int, float] = {}
    for request, placement in held.values():
        for v, s in placement.x.items():
            d = request.vnf(v)
            want_cpu[s] = want_cpu.get(s, 0.0) + d.cpu
            want_ram[s] = want_ram.get(s, 0.0) + d.ram
        for i, path in placement.y.items():
            bw = request.vl(i).bw
            for lid in path:
                want_bw[lid] = want_bw.get(lid, 0.0) + bw
    for srv in net.servers():
        used_cpu = srv.cpu_capacity - srv.cpu_residual
        used_ram = srv.ram_capacity - srv.ram_residual
        if used_cpu != want_cpu.get(srv.id, 0.0) or used_ram != want_ram.get(srv.id, 0.0):
            raise SimulationInvariantError(
                f"server {srv.id}: held {used_cpu}/{used_ram}, "
                f"expected {want_cpu.get(srv.id, 0.0)}/{want_ram.get(srv.id, 0.0)}")
    for link in net.links:
        if link.bw_capacity is None:
            continue
        used = link.bw_capacity - link.bw_residual
        if used != want_bw.get(link.id, 0.0):
            raise SimulationInvariantError(
                f"link {link.id}: held bandwidth {used}, "
                f"expected {want_bw.get(link.id, 0.0)}")


def _place_once(net: PhysicalNetwork, request: SliceRequest, algorithm: Algorithm,
                rng_place: np.random.Generator, max_nodes: int | None
                ) -> tuple[Placement | None, int | None, bool]:
    """Returns (placement or None, blocking VNF on rejection, budget flag).
    Accepted placements are already committed to net."""
    if algorithm in (Algorithm.P2C_1, Algorithm.P2C_2):
        policy = Policy.UNIFORM if algorithm is Algorithm.P2C_1 else Policy.TIER_PREFERRED
        outcome = place(net, request, policy, rng_place)
        if outcome.accepted:
            return outcome.placement, None, False
        return None, outcome.blocking_vnf, False
    solver = solve_ilp1 if algorithm is Algorithm.ILP_1 else solve_ilp2
    result = solver(net, request, max_nodes=max_nodes)
    if result.status is SolveStatus.OPTIMAL:
        apply_placement(net, request, result.placement)
        return result.placement, None, False
    blocking = min(result.deepest_feasible_vnf + 1, request.n_vnfs)
    return None, blocking, result.status is SolveStatus.BUDGET_EXCEEDED


def run(psn: PhysicalNetwork, scenario: Scenario, algorithm: Algorithm | str,
        seed: int | tuple, *,
        catalog: Mapping[SliceClass, ClassSpec] = DEFAULT_CATALOG,
        validate: bool = False, measure_time: bool = False,
        max_nodes: int | None = DEFAULT_NODE_BUDGET,
        series_interval: float | None = None) -> MetricsReport:
    """Simulate one replication and return its metrics.

    The caller's psn is cloned, never mutated. With validate=True every
    acceptance is re-verified by the independent constraint checker against
    the pre-commit state and resource conservation is re-derived from held
    slices after every event (slow; for audits and tests).
    """
    if isinstance(algorithm, str):
        algorithm = Algorithm.parse(algorithm)
    net = psn.clone()
    if not net.uaps:
        raise ValueError("substrate has no UAPs to anchor requests")

    rates = arrival_rates_for_load(
        net, scenario.mix, scenario.target_load, catalog=catalog,
        mean_holding=scenario.mean_holding,
        include_holding_time=scenario.include_holding_time)
    big_lambda = sum(rates.values())

    ss = np.random.SeedSequence(seed)
    rng_arrival, rng_class, rng_uap, rng_hold, rng_place = (
        np.random.default_rng(child) for child in ss.spawn(5))

    interval = scenario.horizon / 100.0 if series_interval is None else series_interval
    acct = _Accounting(net, scenario.warmup, scenario.horizon, interval)

    report = MetricsReport(
        scenario_name=scenario.name, algorithm=algorithm.value, seed=seed,
        target_load=scenario.target_load, horizon=scenario.horizon,
        mean_holding=scenario.mean_holding, warmup=scenario.warmup)
    per_class = {c.value: {"arrivals": 0, "accepted": 0, "rejected": 0}
                 for c in scenario.mix}

    held: dict[int, tuple[SliceRequest, Placement]] = {}
    total_cost = 0.0
    times_ms: list[float] = []

    # heap rows: (time, kind, seq, request id); departures (kind 0) beat
    # arrivals (kind 1) at equal times
    events: list[tuple[float, int, int, int]] = []
    seq = 0
    heapq.heappush(events, (float(rng_arrival.exponential(1.0 / big_lambda)), 1, seq, -1))

    while events:
        t, kind, _, req_id = heapq.heappop(events)
        if t > scenario.horizon:
            break
        acct.advance(t)

        if kind == 0:
            request, placement = held.pop(req_id)
            release_placement(net, request, placement)
            acct.commit(request, placement, -1.0)
            report.departures += 1
        else:
            report.arrivals += 1
            cls_ = sample_class(rng_class, scenario.mix)
            uap = net.uaps[int(rng_uap.integers(len(net.uaps)))]
            holding = float(rng_hold.exponential(scenario.mean_holding))
            request = make_request(cls_, uap, request_id=report.arrivals,
                                   arrival_time=t, holding_time=holding,
                                   catalog=catalog)
            per_class[cls_.value]["arrivals"] += 1

            pre_snap = net.snapshot() if validate else None
            t0 = time.perf_counter() if measure_time else 0.0
            placement, blocking_vnf, budget_hit = _place_once(
                net, request, algorithm, rng_place, max_nodes)
            if measure_time:
                times_ms.append((time.perf_counter() - t0) * 1e3)

            if placement is not None:
                if validate:
                    post_snap = net.snapshot()
                    net.restore(pre_snap)
                    verdict = check_placement(net, request, placement)
                    if not verdict.ok:
                        raise SimulationInvariantError(
                            f"accepted placement violates constraints: "
                            f"{verdict.violations}")
                    net.restore(post_snap)
                    report.validated_accepted += 1
                report.accepted += 1
                per_class[cls_.value]["accepted"] += 1
                total_cost += placement.cost
                held[request.id] = (request, placement)
                acct.commit(request, placement, +1.0)
                seq += 1
                heapq.heappush(events, (t + holding, 0, seq, request.id))
            else:
                report.rejected += 1
                per_class[cls_.value]["rejected"] += 1
                if budget_hit:
                    report.rejected_budget += 1
                report.blocking_attribution[blocking_vnf] = (
                    report.blocking_attribution.get(blocking_vnf, 0) + 1)

            seq += 1
            heapq.heappush(events, (t + float(rng_arrival.exponential(1.0 / big_lambda)),
                                    1, seq, -1))

        if validate:
            _audit_conservation(net, held)

    acct.finish()

    if report.arrivals:
        report.blocking_ratio = report.rejected / report.arrivals
        report.acceptance_ratio = report.accepted / report.arrivals
    for cls_name, row in per_class.items():
        row["blocking_ratio"] = (row["rejected"] / row["arrivals"]
                                 if row["arrivals"] else 0.0)
    report.per_class = per_class
    report.mean_cost_accepted = total_cost / report.accepted if report.accepted else 0.0
    report.utilization, report.held_time_avg, report.held_bw_total_time_avg = (
        acct.summaries())
    report.series = acct.series
    if measure_time and times_ms:
        arr = np.asarray(times_ms)
        report.placement_time_ms = {
            "count": int(arr.size),
            "mean": float(arr.mean()),
            "p50": float(np.median(arr)),
            "max": float(arr.max()),
            "total": float(arr.sum()),
        }
    elif measure_time:
        report.placement_time_ms = {"count": 0, "mean": 0.0, "p50": 0.0,
                                    "max": 0.0, "total": 0.0}
    return report


@dataclass
class AggregateReport:
    scenario_name: str
    algorithm: str
    n: int
    confidence: float
    metrics: dict[str, dict[str, float]]

    def to_json(self) -> dict:
        return {
            "schema": "metrics-aggregate/1",
            "scenario": self.scenario_name,
            "algorithm": self.algorithm,
            "replications": self.n,
            "confidence": self.confidence,
            "metrics": self.metrics,
        }


def _scalar_metrics(report: MetricsReport) -> dict[str, float]:
    out = {
        "arrivals": float(report.arrivals),
        "accepted": float(report.accepted),
        "rejected": float(report.rejected),
        "rejected_budget": float(report.rejected_budget),
        "blocking_ratio": report.blocking_ratio,
        "acceptance_ratio": report.acceptance_ratio,
        "mean_cost_accepted": report.mean_cost_accepted,
        "held_bw_total_time_avg": report.held_bw_total_time_avg,
    }
    for cls_name, row in report.per_class.items():
        out[f"blocking_ratio[{cls_name}]"] = row["blocking_ratio"]
    n_vnfs = max(report.blocking_attribution, default=0)
    for v in range(1, n_vnfs + 1):
        share = (report.blocking_attribution.get(v, 0) / report.rejected
                 if report.rejected else 0.0)
        out[f"blocking_share[vnf{v}]"] = share
    for g, row in report.utilization.items():
        for res, value in row.items():
            out[f"utilization[{g}.{res}]"] = value
    for g, row in report.held_time_avg.items():
        for res, value in row.items():
            out[f"held_time_avg[{g}.{res}]"] = value
    return out


def aggregate(reports: Sequence[MetricsReport], *,
              confidence: float = 0.95) -> AggregateReport:
    """Mean and normal-approximation confidence half-width per scalar metric.

    All reports must come from the same scenario and algorithm. Metrics
    absent from some replications (a tier nobody used, a VNF index never
    blocked) count as 0 there."""
    if not reports:
        raise ValueError("need at least one report")
    head = reports[0]
    key = (head.scenario_name, head.algorithm, head.target_load, head.horizon,
           head.mean_holding, head.warmup)
    for r in reports[1:]:
        if (r.scenario_name, r.algorithm, r.target_load, r.horizon,
                r.mean_holding, r.warmup) != key:
            raise ValueError("reports mix scenarios or algorithms")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")

    rows = [_scalar_metrics(r) for r in reports]
    names = sorted(set().union(*rows))
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    n = len(rows)
    metrics = {}
    for name in names:
        values = np.array([row.get(name, 0.0) for row in rows])
        mean = float(values.mean())
        if n > 1:
            half = float(z * values.std(ddof=1) / np.sqrt(n))
        else:
            half = 0.0
        metrics[name] = {"mean": mean, "half_width": half}
    return AggregateReport(scenario_name=head.scenario_name,
                           algorithm=head.algorithm, n=n,
                           confidence=confidence, metrics=metrics)
