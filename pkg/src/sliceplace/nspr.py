"""Slice request model: service classes, demand catalog, request factory.

A slice request is a linear chain of VNFs joined by virtual links. Each class
carries per-VNF CPU/RAM demands, a per-VL bandwidth demand, an access-latency
bound for the first VNF, per-VL latency budgets and an end-to-end budget.
Chain length is the number of VL budgets plus one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np


class SliceClass(str, Enum):
    BEST_EFFORT = "best_effort"
    URLLC = "urllc"
    EMBB = "embb"


@dataclass(frozen=True)
class ClassSpec:
    """Per-class demand and latency profile.

    `e2e_budget_ms` of None means the access bound plus the sum of VL budgets.
    """

    cpu_per_vnf: float
    ram_per_vnf: float
    bw_per_vl: float
    alpha_max_ms: float
    vl_budgets_ms: tuple[float, ...]
    e2e_budget_ms: float | None = None

    def __post_init__(self) -> None:
        if self.cpu_per_vnf <= 0 or self.ram_per_vnf <= 0 or self.bw_per_vl <= 0:
            raise ValueError("demands must be positive")
        if self.alpha_max_ms <= 0:
            raise ValueError("alpha_max_ms must be positive")
        if not self.vl_budgets_ms:
            raise ValueError("need at least one virtual link budget")
        if any(b <= 0 for b in self.vl_budgets_ms):
            raise ValueError("virtual link budgets must be positive")
        if self.e2e_budget_ms is not None and self.e2e_budget_ms < self.alpha_max_ms:
            raise ValueError("e2e budget cannot undercut the access bound")

    @property
    def chain_length(self) -> int:
        return len(self.vl_budgets_ms) + 1

    def effective_e2e_ms(self) -> float:
        if self.e2e_budget_ms is not None:
            return self.e2e_budget_ms
        return self.alpha_max_ms + sum(self.vl_budgets_ms)


DEFAULT_CATALOG: Mapping[SliceClass, ClassSpec] = {
    SliceClass.BEST_EFFORT: ClassSpec(
        cpu_per_vnf=10.0, ram_per_vnf=60.0, bw_per_vl=1.0,
        alpha_max_ms=0.07, vl_budgets_ms=(0.67, 1.0, 1.33, 1.33)),
    SliceClass.URLLC: ClassSpec(
        cpu_per_vnf=15.0, ram_per_vnf=90.0, bw_per_vl=1.0,
        alpha_max_ms=0.03, vl_budgets_ms=(0.33, 0.33, 0.33, 0.33)),
    SliceClass.EMBB: ClassSpec(
        cpu_per_vnf=25.0, ram_per_vnf=150.0, bw_per_vl=2.0,
        alpha_max_ms=0.07, vl_budgets_ms=(0.33, 1.0, 1.0, 1.0)),
}

# Default traffic mix by request share.
DEFAULT_MIX: Mapping[SliceClass, float] = {
    SliceClass.BEST_EFFORT: 0.67,
    SliceClass.EMBB: 0.22,
    SliceClass.URLLC: 0.11,
}


@dataclass(frozen=True)
class VnfDemand:
    cpu: float
    ram: float


@dataclass(frozen=True)
class VlDemand:
    bw: float
    budget_ms: float


@dataclass(frozen=True)
class SliceRequest:
    """One placement episode: a demand chain anchored at a UAP.

    VNFs are indexed 1..n and VLs 1..n-1; VL i joins VNF i to VNF i+1.
    """

    id: int
    cls: SliceClass
    uap: int
    vnfs: tuple[VnfDemand, ...]
    vls: tuple[VlDemand, ...]
    alpha_max_ms: float
    e2e_budget_ms: float
    arrival_time: float = 0.0
    holding_time: float = 0.0

    def __post_init__(self) -> None:
        if len(self.vnfs) != len(self.vls) + 1:
            raise ValueError("chain must have one more VNF than VLs")
        if len(self.vnfs) < 1:
            raise ValueError("chain must hold at least one VNF")

    @property
    def n_vnfs(self) -> int:
        return len(self.vnfs)

    def vnf(self, v: int) -> VnfDemand:
        """Demand of VNF v, 1-indexed."""
        if not 1 <= v <= len(self.vnfs):
            raise IndexError(f"VNF index {v} outside 1..{len(self.vnfs)}")
        return self.vnfs[v - 1]

    def vl(self, i: int) -> VlDemand:
        """Demand of VL i (joins VNF i and i+1), 1-indexed."""
        if not 1 <= i <= len(self.vls):
            raise IndexError(f"VL index {i} outside 1..{len(self.vls)}")
        return self.vls[i - 1]


def make_request(cls: SliceClass, uap: int, *, request_id: int = 0,
                 arrival_time: float = 0.0, holding_time: float = 0.0,
                 catalog: Mapping[SliceClass, ClassSpec] = DEFAULT_CATALOG) -> SliceRequest:
    spec = catalog[cls]
    vnfs = tuple(VnfDemand(spec.cpu_per_vnf, spec.ram_per_vnf)
                 for _ in range(spec.chain_length))
    vls = tuple(VlDemand(spec.bw_per_vl, b) for b in spec.vl_budgets_ms)
    return SliceRequest(id=request_id, cls=cls, uap=uap, vnfs=vnfs, vls=vls,
                        alpha_max_ms=spec.alpha_max_ms,
                        e2e_budget_ms=spec.effective_e2e_ms(),
                        arrival_time=arrival_time, holding_time=holding_time)


def sample_class(rng: np.random.Generator, mix: Mapping[SliceClass, float]) -> SliceClass:
    """Draw a class from a probability mix. Iteration order is fixed by enum
    declaration order so identical seeds give identical draws."""
    classes = [c for c in SliceClass if c in mix]
    if len(classes) != len(mix):
        raise ValueError("mix contains unknown classes")
    probs = [mix[c] for c in classes]
    if any(p < 0 for p in probs):
        raise ValueError("mix probabilities must be non-negative")
    if abs(sum(probs) - 1.0) > 1e-9:
        raise ValueError(f"mix probabilities sum to {sum(probs)}, need 1")
    u = rng.random()
    acc = 0.0
    for c, p in zip(classes, probs):
        acc += p
        if u < acc:
            return c
    return classes[-1]


def catalog_to_json(catalog: Mapping[SliceClass, ClassSpec]) -> dict:
    return {
        cls.value: {
            "cpu_per_vnf": spec.cpu_per_vnf,
            "ram_per_vnf": spec.ram_per_vnf,
            "bw_per_vl": spec.bw_per_vl,
            "alpha_max_ms": spec.alpha_max_ms,
            "vl_budgets_ms": list(spec.vl_budgets_ms),
            "e2e_budget_ms": spec.e2e_budget_ms,
        }
        for cls, spec in catalog.items()
    }


def catalog_from_json(obj: Mapping) -> dict[SliceClass, ClassSpec]:
    catalog = {}
    for key, fields in obj.items():
        spec = ClassSpec(
            cpu_per_vnf=float(fields["cpu_per_vnf"]),
            ram_per_vnf=float(fields["ram_per_vnf"]),
            bw_per_vl=float(fields["bw_per_vl"]),
            alpha_max_ms=float(fields["alpha_max_ms"]),
            vl_budgets_ms=tuple(float(b) for b in fields["vl_budgets_ms"]),
            e2e_budget_ms=(None if fields.get("e2e_budget_ms") is None
                           else float(fields["e2e_budget_ms"])))
        catalog[SliceClass(key)] = spec
    return catalog
