"""Task-set model: trusted/untrusted tasks, schedulability, spec enumeration.

All timing quantities are integer multiples of the unit slot; ``delta``
(real seconds per slot) is carried as metadata and only matters when the
schedule drives a plant simulation.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA_VERSION = 1

# Guard against pathological period menus blowing up the hyper-period.
DEFAULT_LCM_BOUND = 10**9


class ConfigError(ValueError):
    """Task-set configuration violates the schema or an invariant."""


class Unschedulable(Exception):
    """A task cannot meet its deadline at the maximum execution rates."""

    def __init__(self, task_id):
        super().__init__(f"task {task_id} misses its deadline at minimum periods")
        self.task_id = task_id


@dataclass(frozen=True)
class TrustedTask:
    """Safety-critical control task with a menu of candidate periods.

    ``id`` doubles as the priority index (1 = highest). ``aew`` is the
    post-completion window (in slots) during which the task's output buffer
    can be tampered with. ``tap`` is the maximum attack probability the
    associated control loop tolerates.
    """

    id: int
    period_menu: tuple[int, ...]
    wcet: int
    aew: int
    criticality: float
    tap: float
    plant: str | None = None

    def __post_init__(self):
        menu = tuple(sorted(self.period_menu))
        object.__setattr__(self, "period_menu", menu)
        if not menu:
            raise ConfigError(f"task {self.id}: empty period menu")
        if len(set(menu)) != len(menu):
            raise ConfigError(f"task {self.id}: duplicate periods in menu")
        if self.wcet <= 0:
            raise ConfigError(f"task {self.id}: wcet must be positive")
        if menu[0] <= self.wcet:
            raise ConfigError(f"task {self.id}: min period must exceed wcet")
        if self.aew < 0:
            raise ConfigError(f"task {self.id}: aew must be non-negative")
        if self.aew >= menu[0]:
            raise ConfigError(f"task {self.id}: aew must be below min period")
        if self.criticality <= 0:
            raise ConfigError(f"task {self.id}: criticality must be positive")
        if not 0.0 <= self.tap <= 1.0:
            raise ConfigError(f"task {self.id}: tap must be in [0,1]")

    @property
    def min_period(self) -> int:
        return self.period_menu[0]


@dataclass(frozen=True)
class UntrustedTask:
    """Lower-priority task that may be compromised by a schedule attacker."""

    id: int
    period: int
    wcet: int

    def __post_init__(self):
        if self.wcet <= 0 or self.period <= self.wcet:
            raise ConfigError(f"task {self.id}: need period > wcet > 0")


@dataclass(frozen=True)
class TaskSet:
    """Priority-ordered task set: trusted block strictly above untrusted."""

    trusted: tuple[TrustedTask, ...]
    untrusted: tuple[UntrustedTask, ...]
    delta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "trusted", tuple(self.trusted))
        object.__setattr__(self, "untrusted", tuple(self.untrusted))
        ids = [t.id for t in self.trusted] + [u.id for u in self.untrusted]
        if ids != list(range(1, len(ids) + 1)):
            raise ConfigError(
                "priority indices must be contiguous 1..N with trusted tasks first"
            )
        if self.delta <= 0:
            raise ConfigError("delta must be positive")

    @property
    def n_tasks(self) -> int:
        return len(self.trusted) + len(self.untrusted)

    def task(self, task_id: int) -> TrustedTask | UntrustedTask:
        q = len(self.trusted)
        if 1 <= task_id <= q:
            return self.trusted[task_id - 1]
        if q < task_id <= self.n_tasks:
            return self.untrusted[task_id - q - 1]
        raise KeyError(task_id)

    def trusted_ids(self) -> list[int]:
        return [t.id for t in self.trusted]

    def untrusted_ids(self) -> list[int]:
        return [u.id for u in self.untrusted]

    def min_period_spec(self) -> "TaskSpec":
        return TaskSpec(
            periods=tuple(t.min_period for t in self.trusted),
            untrusted_periods=tuple(u.period for u in self.untrusted),
        )

    def content_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(taskset_to_dict(self), sort_keys=True).encode()
        ).hexdigest()[:16]


@dataclass(frozen=True)
class TaskSpec:
    """One concrete period assignment: a menu choice per trusted task."""

    periods: tuple[int, ...]
    untrusted_periods: tuple[int, ...] = ()

    def all_periods(self) -> tuple[int, ...]:
        return self.periods + self.untrusted_periods

    def period_of(self, task_id: int) -> int:
        return self.all_periods()[task_id - 1]


# ---------------------------------------------------------------------------
# operations


def wcrt(taskset: TaskSet, task_id: int) -> int:
    """Worst-case response time of ``task_id`` in slots.

    Evaluated at the minimum menu period of every trusted task (the maximum
    execution rates), via the standard fixed-point recurrence. Raises
    Unschedulable when the fixed point exceeds the implicit deadline.
    """
    params = [
        (t.min_period, t.wcet) for t in taskset.trusted
    ] + [(u.period, u.wcet) for u in taskset.untrusted]
    period, wcet_i = params[task_id - 1]
    hp = params[: task_id - 1]
    r = wcet_i
    while True:
        r_next = wcet_i + sum(math.ceil(r / p_j) * e_j for p_j, e_j in hp)
        if r_next > period:
            raise Unschedulable(task_id)
        if r_next == r:
            return r
        r = r_next


def is_schedulable(taskset: TaskSet) -> bool:
    try:
        for i in range(1, taskset.n_tasks + 1):
            wcrt(taskset, i)
    except Unschedulable:
        return False
    return True


def hyper_period(spec: TaskSpec, lcm_bound: int = DEFAULT_LCM_BOUND) -> int:
    """LCM over all periods in the spec (trusted choices + untrusted)."""
    result = math.lcm(*spec.all_periods())
    if result > lcm_bound:
        raise OverflowError(f"hyper-period {result} exceeds bound {lcm_bound}")
    return result


def enumerate_specs(taskset: TaskSet) -> list[TaskSpec]:
    """Cartesian product of the trusted-task period menus."""
    untrusted = tuple(u.period for u in taskset.untrusted)
    return [
        TaskSpec(periods=combo, untrusted_periods=untrusted)
        for combo in itertools.product(*(t.period_menu for t in taskset.trusted))
    ]


# ---------------------------------------------------------------------------
# config file I/O (versioned JSON schema)


def taskset_to_dict(taskset: TaskSet) -> dict:
    return {
        "version": SCHEMA_VERSION,
        "delta": taskset.delta,
        "trusted": [
            {
                "id": t.id,
                "periods": list(t.period_menu),
                "wcet": t.wcet,
                "aew": t.aew,
                "criticality": t.criticality,
                "tap": t.tap,
                **({"plant": t.plant} if t.plant else {}),
            }
            for t in taskset.trusted
        ],
        "untrusted": [
            {"id": u.id, "period": u.period, "wcet": u.wcet}
            for u in taskset.untrusted
        ],
    }


def taskset_from_dict(data: dict) -> TaskSet:
    if data.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported taskset schema version {data.get('version')}")
    try:
        trusted = tuple(
            TrustedTask(
                id=t["id"],
                period_menu=tuple(t["periods"]),
                wcet=t["wcet"],
                aew=t["aew"],
                criticality=t["criticality"],
                tap=t["tap"],
                plant=t.get("plant"),
            )
            for t in data["trusted"]
        )
        untrusted = tuple(
            UntrustedTask(id=u["id"], period=u["period"], wcet=u["wcet"])
            for u in data["untrusted"]
        )
        return TaskSet(trusted=trusted, untrusted=untrusted, delta=data.get("delta", 1.0))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed taskset config: {exc}") from exc


def load_taskset(path: str | Path) -> TaskSet:
    with open(path) as fh:
        return taskset_from_dict(json.load(fh))


def save_taskset(taskset: TaskSet, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(taskset_to_dict(taskset), fh, indent=2)
        fh.write("\n")
