"""Posterior-attack vulnerability analysis of schedules.

Counts how often an untrusted task lands inside a victim task's
post-completion window (AEW), converts the counts to per-task attack
probabilities, weighs them by normalized criticality into a schedule
vulnerability index (SVI), and builds the sorted store + per-victim lookup
table the runtime selector draws from.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .schedgen import Schedule, pool_from_dict, pool_to_dict
from .taskmodel import TaskSet, TaskSpec, TrustedTask

log = logging.getLogger(__name__)


def attack_count(sched: Schedule, victim: TrustedTask, untrusted_ids: set[int]) -> int:
    """Number of victim jobs whose AEW contains an untrusted execution.

    The AEW opens at the slot where a job receives its final execution unit
    and spans the next ``victim.aew`` slots, truncated at the job's deadline:
    the transmission task consumes the output buffer by the end of the
    period, so slots past it are not attackable. At most one hit is counted
    per victim job.
    """
    if victim.aew == 0:
        return 0
    period = sched.spec.period_of(victim.id)
    count = 0
    for j in sched.completion_slots(victim.id, victim.wcet):
        deadline = (j // period + 1) * period
        if any(
            sched.slots[j + k] in untrusted_ids
            for k in range(1, victim.aew + 1)
            if j + k < deadline
        ):
            count += 1
    return count


def attack_probability(
    sched: Schedule, victim: TrustedTask, untrusted_ids: set[int]
) -> Fraction:
    """Fraction of the victim's jobs per hyper-period that are attackable:
    C_p * p_victim / hyper-period, exact rational."""
    c = attack_count(sched, victim, untrusted_ids)
    return Fraction(c * sched.spec.period_of(victim.id), sched.length)


def criticality_levels(taskset: TaskSet) -> dict[int, Fraction]:
    """Criticality values normalized to sum 1, keyed by task id."""
    total = sum(Fraction(t.criticality).limit_denominator(10**6) for t in taskset.trusted)
    return {
        t.id: Fraction(t.criticality).limit_denominator(10**6) / total
        for t in taskset.trusted
    }


def svi(sched: Schedule, taskset: TaskSet) -> Fraction:
    levels = criticality_levels(taskset)
    uids = set(taskset.untrusted_ids())
    return sum(
        (attack_probability(sched, t, uids) * levels[t.id] for t in taskset.trusted),
        Fraction(0),
    )


def svt(taskset: TaskSet) -> Fraction:
    levels = criticality_levels(taskset)
    return sum(
        (Fraction(t.tap).limit_denominator(10**6) * levels[t.id] for t in taskset.trusted),
        Fraction(0),
    )


@dataclass(frozen=True)
class VulnReport:
    schedule: Schedule
    counts: dict[int, int]  # trusted id -> C_p
    aps: dict[int, Fraction]  # trusted id -> AP
    svi: Fraction


def analyze(sched: Schedule, taskset: TaskSet) -> VulnReport:
    uids = set(taskset.untrusted_ids())
    levels = criticality_levels(taskset)
    counts = {t.id: attack_count(sched, t, uids) for t in taskset.trusted}
    aps = {
        t.id: Fraction(counts[t.id] * sched.spec.period_of(t.id), sched.length)
        for t in taskset.trusted
    }
    total = sum((aps[t.id] * levels[t.id] for t in taskset.trusted), Fraction(0))
    return VulnReport(schedule=sched, counts=counts, aps=aps, svi=total)


def _try_swap(slots: list[int], a: int, b: int, periods: tuple[int, ...]) -> bool:
    """Exchange two busy slots when both occupants' job windows contain both
    slots. Per-job slot counts, deadlines and the busy/idle pattern are all
    unchanged, so validity and work-conservation are preserved."""
    x, y = slots[a], slots[b]
    if x == y or x == 0 or y == 0:
        return False
    px, py = periods[x - 1], periods[y - 1]
    if a // px != b // px or a // py != b // py:
        return False
    slots[a], slots[b] = y, x
    return True


class _Hardener:
    """Mutable swap-search state scoring candidate swaps incrementally.

    A victim job's completion slot and its deadline-truncated window both lie
    inside the job's own frame, so a swap of slots a and b can only change the
    hit status of jobs whose frame contains a or b — at most two per victim.
    Scores are integer-weighted hit counts (weight = criticality level times
    period, over a common denominator), so comparisons stay exact.
    """

    def __init__(self, sched: Schedule, taskset: TaskSet):
        self.spec = sched.spec
        self.slots = list(sched.slots)
        self.l = len(self.slots)
        self.periods = sched.spec.all_periods()
        self.uids = set(taskset.untrusted_ids())
        levels = criticality_levels(taskset)
        denom = 1
        for v in levels.values():
            denom = denom * v.denominator // math.gcd(denom, v.denominator)
        self.victims = [t for t in taskset.trusted if t.aew > 0]
        self.weights = {
            t.id: int(levels[t.id] * denom) * self.periods[t.id - 1]
            for t in self.victims
        }

    def _completion(self, victim: TrustedTask, job: int) -> int:
        p = self.periods[victim.id - 1]
        seen = 0
        for j in range(job * p, (job + 1) * p):
            if self.slots[j] == victim.id:
                seen += 1
                if seen == victim.wcet:
                    return j
        raise AssertionError(f"task {victim.id} job {job} incomplete")

    def _job_hit(self, victim: TrustedTask, job: int) -> bool:
        p = self.periods[victim.id - 1]
        c = self._completion(victim, job)
        deadline = (job + 1) * p
        return any(
            self.slots[c + k] in self.uids
            for k in range(1, victim.aew + 1)
            if c + k < deadline
        )

    def _local_score(self, a: int, b: int) -> int:
        total = 0
        for victim in self.victims:
            p = self.periods[victim.id - 1]
            jobs = {a // p, b // p}
            total += self.weights[victim.id] * sum(
                self._job_hit(victim, jb) for jb in jobs
            )
        return total

    def try_improving_swap(self, a: int, b: int) -> bool:
        """Apply the swap iff it is valid and strictly lowers the weighted
        hit score of the affected jobs (equivalently, the schedule's SVI)."""
        before = self._local_score(a, b)
        if not _try_swap(self.slots, a, b, self.periods):
            return False
        if self._local_score(a, b) < before:
            return True
        _try_swap(self.slots, b, a, self.periods)
        return False


def harden_schedule(sched: Schedule, taskset: TaskSet, max_passes: int = 10) -> Schedule:
    """Greedy SVI descent by execution-unit swaps.

    Two move classes per attacked victim job: push the victim's completion
    later in its own frame (shrinking the deadline-truncated window), or
    pull the offending untrusted unit elsewhere inside its own frame. A
    swap is kept only when the schedule's SVI strictly decreases; the result
    is deterministic and valid whenever the input is.
    """
    h = _Hardener(sched, taskset)
    for _ in range(max_passes):
        improved = False
        for victim in h.victims:
            p = h.periods[victim.id - 1]
            for job in range(h.l // p):
                if not h._job_hit(victim, job):
                    continue
                c = h._completion(victim, job)
                deadline = (job + 1) * p
                done = False
                for c2 in range(deadline - 1, c, -1):
                    if h.try_improving_swap(c, c2):
                        improved = done = True
                        break
                if done:
                    continue
                window = [c + k for k in range(1, victim.aew + 1) if c + k < deadline]
                for w in [j for j in window if h.slots[j] in h.uids]:
                    pu = h.periods[h.slots[w] - 1]
                    lo, hi = (w // pu) * pu, (w // pu + 1) * pu
                    for w2 in list(range(hi - 1, w, -1)) + list(range(lo, w)):
                        if h.try_improving_swap(w, w2):
                            improved = done = True
                            break
                    if done:
                        break
        if not improved:
            break
    return Schedule(
        spec=sched.spec, slots=tuple(h.slots), provenance=sched.provenance, seed=sched.seed
    )


@dataclass
class ScheduleStore:
    """SVI-sorted schedule array with threshold index K and per-victim LUT.

    ``order`` is ascending by SVI with ties broken by schedule hash; K is the
    first index with SVI >= SVT, so indices [0, K) are deployable in normal
    mode. LUT[i] lists store indices with AP < TAP_i, ascending by AP.
    """

    taskset: TaskSet
    schedules: list[Schedule]
    reports: list[VulnReport]
    svt: Fraction
    k_threshold: int
    lut: dict[int, list[int]]

    def svi_of(self, index: int) -> Fraction:
        return self.reports[index].svi

    def ap_of(self, index: int, task_id: int) -> Fraction:
        return self.reports[index].aps[task_id]


def build_store(pool: list[Schedule], taskset: TaskSet) -> ScheduleStore:
    if not pool:
        raise ValueError("empty schedule pool")
    reports = [analyze(s, taskset) for s in pool]
    order = sorted(
        range(len(pool)), key=lambda i: (reports[i].svi, pool[i].content_hash())
    )
    schedules = [pool[i] for i in order]
    reports = [reports[i] for i in order]
    threshold = svt(taskset)
    svis = [r.svi for r in reports]
    k = bisect_left(svis, threshold)
    if k == 0:
        log.warning("no schedule below SVT=%s: normal mode has no candidates", threshold)
    lut: dict[int, list[int]] = {}
    for t in taskset.trusted:
        tap = Fraction(t.tap).limit_denominator(10**6)
        row = [i for i in range(len(schedules)) if reports[i].aps[t.id] < tap]
        row.sort(key=lambda i: (reports[i].aps[t.id], i))
        if not row:
            log.warning("LUT row for task %d is empty: alert mode unavailable", t.id)
        lut[t.id] = row
    return ScheduleStore(
        taskset=taskset,
        schedules=schedules,
        reports=reports,
        svt=threshold,
        k_threshold=k,
        lut=lut,
    )


def store_memory_cost(store: ScheduleStore, bytes_per_element: int = 1) -> dict:
    """Model cost q*M*b + (sum of hyper-period lengths)*b, next to the actual
    serialized size for comparison."""
    q = len(store.taskset.trusted)
    m = len(store.schedules)
    slots_total = sum(s.length for s in store.schedules)
    model = (q * m + slots_total) * bytes_per_element
    actual = len(json.dumps(store_to_dict(store)).encode())
    return {
        "lut_elements": q * m,
        "slot_elements": slots_total,
        "model_bytes": model,
        "serialized_bytes": actual,
    }


# ---------------------------------------------------------------------------
# serialization


def store_to_dict(store: ScheduleStore) -> dict:
    return {
        "taskset_hash": store.taskset.content_hash(),
        "svt": str(store.svt),
        "k_threshold": store.k_threshold,
        "pool": pool_to_dict(store.taskset, store.schedules),
        "records": [
            {
                "svi": str(r.svi),
                "counts": {str(k): v for k, v in r.counts.items()},
                "aps": {str(k): str(v) for k, v in r.aps.items()},
            }
            for r in store.reports
        ],
        "lut": {str(k): v for k, v in store.lut.items()},
    }


def store_from_dict(data: dict, taskset: TaskSet) -> ScheduleStore:
    if data["taskset_hash"] != taskset.content_hash():
        raise ValueError("store was built for a different task set")
    schedules = pool_from_dict(data["pool"])
    reports = [
        VulnReport(
            schedule=s,
            counts={int(k): v for k, v in rec["counts"].items()},
            aps={int(k): Fraction(v) for k, v in rec["aps"].items()},
            svi=Fraction(rec["svi"]),
        )
        for s, rec in zip(schedules, data["records"])
    ]
    return ScheduleStore(
        taskset=taskset,
        schedules=schedules,
        reports=reports,
        svt=Fraction(data["svt"]),
        k_threshold=data["k_threshold"],
        lut={int(k): list(v) for k, v in data["lut"].items()},
    )


def save_store(store: ScheduleStore, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(store_to_dict(store), fh)
        fh.write("\n")


def load_store(path: str | Path, taskset: TaskSet) -> ScheduleStore:
    with open(path) as fh:
        return store_from_dict(json.load(fh), taskset)


def export_reports_csv(store: ScheduleStore, path: str | Path) -> None:
    trusted_ids = store.taskset.trusted_ids()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "svi", "periods", "provenance", "seed"]
            + [f"cp_task{i}" for i in trusted_ids]
            + [f"ap_task{i}" for i in trusted_ids]
        )
        for idx, (s, r) in enumerate(zip(store.schedules, store.reports)):
            writer.writerow(
                [idx, float(r.svi), " ".join(map(str, s.spec.periods)), s.provenance, s.seed]
                + [r.counts[i] for i in trusted_ids]
                + [float(r.aps[i]) for i in trusted_ids]
            )
