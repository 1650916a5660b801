"""Schedule generation: deterministic fixed-priority simulation, randomized
shuffling with exact feasibility lookahead, and exhaustive enumeration for
desk-scale verification. Thin wrappers around the kernel backends plus an
independent validity checker.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import kernel
from .kernel import BudgetExceeded, DeadlineMiss
from .taskmodel import TaskSet, TaskSpec, hyper_period

DEFAULT_ENUM_BUDGET = 200_000


@dataclass(frozen=True)
class Schedule:
    """Slot array over one hyper-period plus the spec that produced it.

    slots[j] is the 1-based priority index of the task running in slot j,
    0 for idle. Schedules from different specs are distinct objects even if
    their slot arrays coincide.
    """

    spec: TaskSpec
    slots: tuple[int, ...]
    provenance: str  # "fixed-priority" | "randomized" | "exhaustive"
    seed: int | None = None

    @property
    def length(self) -> int:
        return len(self.slots)

    def job_index(self, slot: int) -> int:
        """Arrival index of the job occupying ``slot`` (jobs never execute
        outside their own period window, so this is slot // period)."""
        task_id = self.slots[slot]
        if task_id == 0:
            raise ValueError(f"slot {slot} is idle")
        return slot // self.spec.period_of(task_id)

    def task_slots(self, task_id: int) -> list[int]:
        return [j for j, s in enumerate(self.slots) if s == task_id]

    def completion_slots(self, task_id: int, wcet: int) -> list[int]:
        """Slots where a job of ``task_id`` receives its final execution unit."""
        period = self.spec.period_of(task_id)
        per_job: dict[int, int] = {}
        result = []
        for j in self.task_slots(task_id):
            job = j // period
            per_job[job] = per_job.get(job, 0) + 1
            if per_job[job] == wcet:
                result.append(j)
        return result

    def content_hash(self) -> str:
        payload = (tuple(self.spec.all_periods()), self.slots)
        return hashlib.sha256(repr(payload).encode()).hexdigest()[:16]


def _spec_arrays(taskset: TaskSet, spec: TaskSpec) -> tuple[list[int], list[int]]:
    wcets = [t.wcet for t in taskset.trusted] + [u.wcet for u in taskset.untrusted]
    return list(spec.all_periods()), wcets


def simulate_fixed_priority(taskset: TaskSet, spec: TaskSpec) -> Schedule:
    periods, wcets = _spec_arrays(taskset, spec)
    l = hyper_period(spec)
    slots = kernel.simulate_fp(periods, wcets, l)
    return Schedule(spec=spec, slots=tuple(slots), provenance="fixed-priority")


def shuffle_schedule(taskset: TaskSet, spec: TaskSpec, seed: int) -> Schedule:
    periods, wcets = _spec_arrays(taskset, spec)
    l = hyper_period(spec)
    slots = kernel.shuffle(periods, wcets, l, seed)
    return Schedule(spec=spec, slots=tuple(slots), provenance="randomized", seed=seed)


def aware_shuffle_schedule(taskset: TaskSet, spec: TaskSpec, seed: int) -> Schedule:
    """Randomized schedule biased against placing untrusted executions
    inside any trusted task's open post-completion window."""
    periods, wcets = _spec_arrays(taskset, spec)
    aews = [t.aew for t in taskset.trusted]
    l = hyper_period(spec)
    slots = kernel.aware_shuffle(periods, wcets, aews, len(taskset.trusted), l, seed)
    return Schedule(spec=spec, slots=tuple(slots), provenance="attack-aware", seed=seed)


def enumerate_all(
    taskset: TaskSet, spec: TaskSpec, budget: int = DEFAULT_ENUM_BUDGET
) -> list[Schedule]:
    periods, wcets = _spec_arrays(taskset, spec)
    l = hyper_period(spec)
    arrays = kernel.enumerate_all(periods, wcets, l, budget)
    return [
        Schedule(spec=spec, slots=tuple(a), provenance="exhaustive") for a in arrays
    ]


def generate_pool(
    taskset: TaskSet,
    specs: list[TaskSpec],
    seeds_per_spec: int = 0,
    exhaustive: bool = False,
    budget: int = DEFAULT_ENUM_BUDGET,
    seed_base: int = 0,
    attack_aware: bool = False,
) -> list[Schedule]:
    """Deduplicated schedule pool over the given specs.

    exhaustive=True enumerates every spec within ``budget``; otherwise
    ``seeds_per_spec`` shuffled schedules per spec (the deterministic
    fixed-priority schedule when seeds_per_spec == 0), drawn attack-aware
    when requested. Merge order is deterministic: specs in input order,
    first occurrence kept.
    """
    pool: list[Schedule] = []
    seen: set[tuple] = set()

    def add(s: Schedule):
        key = (s.spec.all_periods(), s.slots)
        if key not in seen:
            seen.add(key)
            pool.append(s)

    draw = aware_shuffle_schedule if attack_aware else shuffle_schedule
    for spec_idx, spec in enumerate(specs):
        if exhaustive:
            for s in enumerate_all(taskset, spec, budget):
                add(s)
        elif seeds_per_spec <= 0:
            add(simulate_fixed_priority(taskset, spec))
        else:
            for k in range(seeds_per_spec):
                add(draw(taskset, spec, seed_base + spec_idx * 1_000_003 + k))
    return pool


# ---------------------------------------------------------------------------
# independent validity checker (never uses kernel internals)


def validate_schedule(taskset: TaskSet, sched: Schedule) -> list[str]:
    """Check job slot counts, deadline containment and work-conservation.

    Returns a list of violation descriptions; empty means valid.
    """
    periods, wcets = _spec_arrays(taskset, sched.spec)
    n = len(periods)
    l = sched.length
    errors = []
    for i in range(n):
        p, e = periods[i], wcets[i]
        if l % p != 0:
            errors.append(f"task {i+1}: hyper-period {l} not divisible by period {p}")
            continue
        for job in range(l // p):
            window = sched.slots[job * p : (job + 1) * p]
            got = sum(1 for s in window if s == i + 1)
            if got != e:
                errors.append(
                    f"task {i+1} job {job}: {got} slots in deadline window, expected {e}"
                )
    # work-conservation: replay demand and flag idle slots with pending work
    rem = [0] * n
    for t in range(l):
        for i in range(n):
            if t % periods[i] == 0:
                rem[i] = wcets[i]
        s = sched.slots[t]
        if s == 0:
            if any(r > 0 for r in rem):
                errors.append(f"slot {t}: idle while jobs are ready")
        else:
            if rem[s - 1] <= 0:
                errors.append(f"slot {t}: task {s} runs with no pending job")
            else:
                rem[s - 1] -= 1
    return errors


# ---------------------------------------------------------------------------
# pool serialization


def pool_to_dict(taskset: TaskSet, pool: list[Schedule]) -> dict:
    return {
        "taskset_hash": taskset.content_hash(),
        "schedules": [
            {
                "periods": list(s.spec.periods),
                "untrusted_periods": list(s.spec.untrusted_periods),
                "slots": list(s.slots),
                "provenance": s.provenance,
                "seed": s.seed,
            }
            for s in pool
        ],
    }


def pool_from_dict(data: dict) -> list[Schedule]:
    return [
        Schedule(
            spec=TaskSpec(
                periods=tuple(rec["periods"]),
                untrusted_periods=tuple(rec["untrusted_periods"]),
            ),
            slots=tuple(rec["slots"]),
            provenance=rec["provenance"],
            seed=rec.get("seed"),
        )
        for rec in data["schedules"]
    ]


def save_pool(taskset: TaskSet, pool: list[Schedule], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(pool_to_dict(taskset, pool), fh)
        fh.write("\n")


def load_pool(path: str | Path) -> list[Schedule]:
    with open(path) as fh:
        return pool_from_dict(json.load(fh))
