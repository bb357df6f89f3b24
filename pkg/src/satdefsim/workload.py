"""Task model, arrival generation, admission control and idle capacity.

Tasks are classified along three dimensions: nature (mission/security),
priority (high/low) and arrival pattern (periodic/aperiodic).  Resource
demand is a normalized usage vector over the scenario's resource types
(default: CPU, FPGA).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


ResourceVector = np.ndarray  # usage fraction per resource type


def resource_vector(values) -> ResourceVector:
    """Validated usage vector: every component in [0,1]."""
    v = np.asarray(values, dtype=float)
    if np.any(v < 0) or np.any(v > 1):
        raise ValueError("resource usage fractions must lie in [0,1]")
    return v


class Nature(str, Enum):
    MISSION = "mission"
    SECURITY = "security"


class Priority(str, Enum):
    HIGH = "high"
    LOW = "low"


class InstanceState(str, Enum):
    QUEUED = "queued"
    ADMITTED = "admitted"
    RUNNING = "running"
    PREEMPTED = "preempted"
    COMPLETED = "completed"
    DROPPED = "dropped"
    MISSED = "missed"


@dataclass(frozen=True)
class Arrival:
    """Arrival pattern: ``periodic`` with an interval or ``aperiodic`` with a rate."""

    kind: str  # "periodic" | "aperiodic"
    interval: int = 0  # slots, periodic only
    rate: float = 0.0  # tasks/slot, aperiodic only

    def __post_init__(self):
        if self.kind == "periodic":
            if self.interval < 1:
                raise ValueError("periodic interval must be >= 1 slot")
        elif self.kind == "aperiodic":
            if self.rate < 0:
                raise ValueError("aperiodic rate must be >= 0")
        else:
            raise ValueError(f"unknown arrival kind {self.kind!r}")


@dataclass(frozen=True)
class TaskSpec:
    """Schedulable unit type.

    ``demand`` is the per-resource usage fraction while active,
    ``power_weight`` the normalized power draw, ``processing`` the total
    service slots required and ``relative_deadline`` the slots allowed
    between earliest start and completion.  ``mean_demand`` is the
    activation-requirement factor used by the stability constraint
    (defaults to ``processing``, so rate x mean_demand is the required
    time-average service fraction).
    """

    id: str
    nature: Nature
    priority: Priority
    arrival: Arrival
    demand: np.ndarray
    power_weight: float
    processing: int
    relative_deadline: int
    firm_deadline: bool = False
    mean_demand: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))
        if np.any(self.demand < 0) or np.any(self.demand > 1):
            raise ValueError(f"task {self.id}: demand components must lie in [0,1]")
        if self.processing < 1:
            raise ValueError(f"task {self.id}: processing must be >= 1 slot")
        if self.relative_deadline < self.processing:
            raise ValueError(
                f"task {self.id}: relative_deadline {self.relative_deadline} < "
                f"processing {self.processing} is permanently unschedulable"
            )
        if self.power_weight < 0:
            raise ValueError(f"task {self.id}: power_weight must be >= 0")
        if self.mean_demand is None:
            object.__setattr__(self, "mean_demand", float(self.processing))

    @property
    def stability_fraction(self) -> float:
        """Required time-average service fraction (0 for periodic specs)."""
        if self.arrival.kind != "aperiodic" or self.nature != Nature.MISSION:
            return 0.0
        return self.arrival.rate * float(self.mean_demand)


@dataclass
class TaskInstance:
    """One released job of a spec.

    ``req`` is the request slot, ``start_after`` the earliest feasible
    start and ``deadline`` the absolute deadline slot (work finishing in
    slot t is on time iff t <= deadline).
    """

    uid: int
    spec: TaskSpec
    req: int
    start_after: int
    deadline: int = field(init=False)
    remaining: int = field(init=False)
    state: InstanceState = InstanceState.QUEUED
    service: int = 0  # slots of service received
    completed_at: int | None = None
    late: bool = False

    def __post_init__(self):
        if self.start_after < self.req:
            raise ValueError("earliest start precedes request slot")
        self.deadline = self.start_after + self.spec.relative_deadline
        self.remaining = self.spec.processing

    @property
    def active(self) -> bool:
        return self.state in (
            InstanceState.QUEUED,
            InstanceState.ADMITTED,
            InstanceState.RUNNING,
            InstanceState.PREEMPTED,
        )

    def run_one_slot(self, t: int) -> None:
        if self.remaining <= 0:
            raise RuntimeError(f"instance {self.uid} ran with no remaining work")
        self.remaining -= 1
        self.service += 1
        if self.remaining == 0:
            self.state = InstanceState.COMPLETED
            self.completed_at = t
            self.late = t > self.deadline
        else:
            self.state = InstanceState.RUNNING


def generate_arrivals(specs: list[TaskSpec], horizon: int, seed) -> list[TaskInstance]:
    """Release instances for every spec over ``horizon`` slots.

    Periodic specs release at 0, interval, 2*interval, ...; aperiodic
    specs release a Poisson count per slot with the spec's mean rate.
    The stream is sorted by request slot, ties broken high-priority
    first then by spec id; it is reproducible given (specs, horizon,
    seed).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    releases: list[tuple[int, int, str, TaskSpec]] = []
    # Per-spec draws keep the stream stable under spec-list reordering.
    for spec in sorted(specs, key=lambda s: s.id):
        if spec.arrival.kind == "periodic":
            for t in range(0, horizon, spec.arrival.interval):
                releases.append((t, 0 if spec.priority == Priority.HIGH else 1, spec.id, spec))
        else:
            if spec.arrival.rate <= 0:
                continue
            counts = rng.poisson(spec.arrival.rate, size=horizon)
            for t in np.flatnonzero(counts):
                for _ in range(int(counts[t])):
                    releases.append((int(t), 0 if spec.priority == Priority.HIGH else 1, spec.id, spec))
    releases.sort(key=lambda r: (r[0], r[1], r[2]))
    return [
        TaskInstance(uid=i, spec=spec, req=t, start_after=t)
        for i, (t, _, _, spec) in enumerate(releases)
    ]


def admit(inst: TaskInstance, t: int) -> InstanceState:
    """Admission check: the instance must be able to finish by its deadline.

    Admitted iff deadline - t >= remaining; otherwise dropped.  Calling
    this on a non-queued instance is a contract violation.
    """
    if inst.state != InstanceState.QUEUED:
        raise ValueError(f"admit() called on instance in state {inst.state}")
    if inst.deadline - t >= inst.remaining:
        inst.state = InstanceState.ADMITTED
    else:
        inst.state = InstanceState.DROPPED
    return inst.state


def idle_capacity(
    active_demands: list[np.ndarray] | np.ndarray,
    scan_active: bool = False,
    scan_demand: np.ndarray | None = None,
) -> float:
    """Minimum unallocated capacity fraction across resource types.

    Negative values indicate an over-committed slot; schedules passing
    the per-slot capacity constraint never produce one.
    """
    demands = [np.asarray(d, dtype=float) for d in active_demands]
    if scan_active:
        if scan_demand is None:
            raise ValueError("scan_active requires scan_demand")
        demands = demands + [np.asarray(scan_demand, dtype=float)]
    if not demands:
        return 1.0
    dims = {d.shape for d in demands}
    if len(dims) != 1:
        raise ValueError(f"demand vectors disagree on dimensionality: {sorted(dims)}")
    used = np.sum(demands, axis=0)
    return float(np.min(1.0 - used))
