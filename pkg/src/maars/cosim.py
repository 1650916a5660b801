"""Closed-loop co-simulation.

Executes a deployed schedule slot by slot: each trusted task with an
assigned plant samples its output at job completion, runs its estimator and
chi-square detector, and writes the next control input into an actuation
buffer. A compromised untrusted task executing inside the victim's
post-completion window (before the output is transmitted at the period
boundary) overwrites that buffer. Plant states advance at period
boundaries with the buffer contents, so tampering lands exactly one sample
later, matching the discrete closed-loop model.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .control import DiscretizedLoop, PlantModel, calibrate_threshold, design_loop
from .runtime import SelectorState, run_epoch
from .schedgen import Schedule, simulate_fixed_priority
from .taskmodel import TaskSet, TrustedTask
from .vulnerability import ScheduleStore, attack_count

log = logging.getLogger(__name__)

DIVERGENCE_BOUND = 1e6


@dataclass(frozen=True)
class AttackScenario:
    compromised_task_id: int
    victim_id: int
    injection: str = "replace"  # "replace" | "bias"
    value: float = 10.0
    start_epoch: int = 0
    duration_epochs: int | None = None  # None = until the run ends

    def active(self, epoch: int) -> bool:
        if epoch < self.start_epoch:
            return False
        if self.duration_epochs is None:
            return True
        return epoch < self.start_epoch + self.duration_epochs


@dataclass
class RunMetrics:
    settling_time: float | None
    decay_rate: float | None
    alarm_epochs: list[int]
    deployed_ap: list[float]  # per-epoch AP of the deployed schedule (victim)
    diverged: bool
    victim_hits: int
    victim_jobs: int

    @property
    def attack_success_rate(self) -> Fraction:
        if self.victim_jobs == 0:
            return Fraction(0)
        return Fraction(self.victim_hits, self.victim_jobs)


class ControlLoopSim:
    """Runtime state of one trusted control loop across period switches."""

    def __init__(
        self,
        task: TrustedTask,
        plant: PlantModel,
        delta: float,
        rng: np.random.Generator,
        noise_scale: float = 1.0,
        x0: np.ndarray | None = None,
    ):
        self.task = task
        self.plant = plant
        self.rng = rng
        self.noise_scale = noise_scale
        self.loops: dict[int, DiscretizedLoop] = {
            p: design_loop(plant, p, delta) for p in task.period_menu
        }
        n = plant.n_states
        self.x = np.ones(n) if x0 is None else np.asarray(x0, dtype=float)
        self.xhat = np.zeros(n)
        p_in = plant.B.shape[1]
        self.u_cmd = np.zeros(p_in)  # controller's believed input
        self.buffer = np.zeros(p_in)  # actuation buffer (attackable)
        self.period = task.min_period
        base = self.loops[self.period]
        if plant.detector_threshold is not None:
            self.threshold = float(plant.detector_threshold)
        else:
            self.threshold = calibrate_threshold(
                base.innovation_cov, plant.detector_window, plant.far_target
            )
        self.window: list[float] = []
        self.g = 0.0
        self.alarmed = False
        self.norm_trace: list[tuple[float, float]] = []  # (time s, ||x||)

    def set_period(self, period: int):
        self.period = period

    def _noise(self, cov: np.ndarray) -> np.ndarray:
        if self.noise_scale == 0.0:
            return np.zeros(cov.shape[0])
        return self.rng.multivariate_normal(np.zeros(cov.shape[0]), cov) * self.noise_scale

    def advance_plant(self, time_s: float):
        """Period boundary: actuate with the (possibly tampered) buffer."""
        loop = self.loops[self.period]
        self.x = loop.A @ self.x + loop.B @ self.buffer + self._noise(self.plant.W)
        self.norm_trace.append((time_s, float(np.linalg.norm(self.x))))

    def job_complete(self):
        """Sample, estimate, detect, and compute the next control input."""
        loop = self.loops[self.period]
        y = self.plant.C @ self.x + self._noise(self.plant.V)
        res = y - self.plant.C @ self.xhat
        sigma_inv = np.linalg.inv(loop.innovation_cov)
        z = float(res @ sigma_inv @ res)
        self.window.append(z)
        if len(self.window) > self.plant.detector_window:
            self.window.pop(0)
        self.g = sum(self.window) / len(self.window)
        if self.g > self.threshold:
            self.alarmed = True
        self.xhat = (
            (loop.A - loop.L @ self.plant.C) @ self.xhat
            + loop.B @ self.u_cmd
            + loop.L @ y
        )
        self.u_cmd = -loop.K @ self.xhat
        self.buffer = self.u_cmd.copy()

    def tamper(self, injection: str, value: float):
        if injection == "replace":
            self.buffer = np.full_like(self.buffer, value)
        elif injection == "bias":
            self.buffer = self.buffer + value
        else:
            raise ValueError(f"unknown injection model {injection!r}")


class CoSimWorld:
    """Slot-level world; exposes run_hyper_period() for the runtime selector."""

    def __init__(
        self,
        taskset: TaskSet,
        plants: dict[str, PlantModel],
        scenario: AttackScenario | None,
        seed: int,
        noise_scale: float = 1.0,
        divergence_bound: float = DIVERGENCE_BOUND,
    ):
        self.taskset = taskset
        self.scenario = scenario
        self.rng = np.random.default_rng(seed)
        self.divergence_bound = divergence_bound
        self.loops: dict[int, ControlLoopSim] = {}
        for t in taskset.trusted:
            if t.plant is not None:
                if t.plant not in plants:
                    raise KeyError(f"task {t.id}: no plant named {t.plant!r}")
                self.loops[t.id] = ControlLoopSim(
                    t, plants[t.plant], taskset.delta, self.rng, noise_scale
                )
        self.epoch = 0
        self.time_slots = 0
        self.diverged = False
        self.victim_hits = 0
        self.victim_jobs = 0
        self.trace: list[tuple] = []
        self.trace_enabled = False

    def run_hyper_period(self, sched: Schedule) -> int:
        """Execute one hyper-period of ``sched``; returns the attack flag
        (0 or the highest-criticality alarmed trusted task id)."""
        ts = self.taskset
        delta = ts.delta
        l = sched.length
        attack_on = self.scenario is not None and self.scenario.active(self.epoch)
        for task_id, sim in self.loops.items():
            sim.set_period(sched.spec.period_of(task_id))
            sim.alarmed = False

        # completion slot and deadline of every trusted job, plus the AEW
        # ownership map for the attack predicate
        completions: dict[int, list[int]] = {
            t.id: sched.completion_slots(t.id, t.wcet) for t in ts.trusted
        }
        aew_owner: dict[int, tuple[int, int]] = {}  # slot -> (victim id, completion)
        if self.scenario is not None:
            victim = ts.task(self.scenario.victim_id)
            period = sched.spec.period_of(victim.id)
            for c in completions[victim.id]:
                deadline = (c // period + 1) * period
                for k in range(1, victim.aew + 1):
                    if c + k < deadline:
                        aew_owner[c + k] = (victim.id, c)

        completion_lookup = {
            (tid, slot) for tid, slots in completions.items() for slot in slots
        }
        hit_jobs: set[int] = set()
        for t_slot in range(l):
            running = sched.slots[t_slot]
            # period boundaries: actuate every plant whose sampling instant
            # starts at this slot (skip the synchronous release at t=0 of
            # the very first epoch: no input computed yet)
            for task_id, sim in self.loops.items():
                p = sched.spec.period_of(task_id)
                if t_slot % p == 0 and self.time_slots > 0:
                    sim.advance_plant((self.time_slots) * delta)
                    if np.linalg.norm(sim.x) > self.divergence_bound:
                        self.diverged = True
            if self.diverged:
                break
            if running in self.loops and (running, t_slot) in completion_lookup:
                self.loops[running].job_complete()
            if (
                attack_on
                and self.scenario is not None
                and running == self.scenario.compromised_task_id
                and t_slot in aew_owner
            ):
                victim_id, c = aew_owner[t_slot]
                if victim_id in self.loops:
                    self.loops[victim_id].tamper(self.scenario.injection, self.scenario.value)
                hit_jobs.add(c)
            if self.trace_enabled:
                self._record(t_slot, running)
            self.time_slots += 1

        if self.scenario is not None:
            victim = ts.task(self.scenario.victim_id)
            self.victim_jobs += l // sched.spec.period_of(victim.id)
            self.victim_hits += len(hit_jobs)
        self.epoch += 1
        alarmed = [tid for tid, sim in self.loops.items() if sim.alarmed]
        if not alarmed:
            return 0
        trusted = {t.id: t for t in ts.trusted}
        return max(alarmed, key=lambda i: (trusted[i].criticality, -i))

    def _record(self, t_slot: int, running: int):
        row: list = [self.time_slots * self.taskset.delta, running]
        if self.scenario is not None and self.scenario.victim_id in self.loops:
            sim = self.loops[self.scenario.victim_id]
            row += [float(np.linalg.norm(sim.x)), float(sim.buffer[0]), sim.g, int(sim.alarmed)]
        self.trace.append(tuple(row))


def _fit_metrics(
    norm_trace: list[tuple[float, float]],
    settle_band: float,
) -> tuple[float | None, float | None]:
    """Settling time (first time after which ||x|| stays inside the band)
    and exponential decay rate fitted to log ||x||."""
    if not norm_trace:
        return None, None
    times = np.array([t for t, _ in norm_trace])
    norms = np.array([v for _, v in norm_trace])
    settled = None
    outside = norms > settle_band
    if not outside.any():
        settled = float(times[0])
    else:
        last_out = int(np.max(np.nonzero(outside)))
        if last_out + 1 < len(times):
            settled = float(times[last_out + 1])
    positive = norms > 1e-12
    rate = None
    if positive.sum() >= 2:
        t_fit, y_fit = times[positive], np.log(norms[positive])
        rate = float(np.polyfit(t_fit, y_fit, 1)[0])
    return settled, rate


def run_scenario(
    taskset: TaskSet,
    plants: dict[str, PlantModel],
    scenario: AttackScenario | None,
    policy: str,
    seed: int,
    epochs: int,
    store: ScheduleStore | None = None,
    selector: SelectorState | None = None,
    noise_scale: float = 1.0,
    settle_band: float = 0.1,
    divergence_bound: float = DIVERGENCE_BOUND,
    trace: bool = False,
) -> tuple[RunMetrics, CoSimWorld]:
    """Drive ``epochs`` hyper-periods under the given deployment policy.

    policy="static": the deterministic fixed-priority schedule at minimum
    periods every epoch (alarms logged only). policy="maars": the runtime
    selector draws from ``store``. Deterministic for a fixed seed.
    """
    world = CoSimWorld(
        taskset, plants, scenario, seed,
        noise_scale=noise_scale, divergence_bound=divergence_bound,
    )
    world.trace_enabled = trace
    alarm_epochs: list[int] = []
    deployed_ap: list[float] = []
    victim_id = scenario.victim_id if scenario is not None else None

    def record_ap(sched: Schedule):
        if victim_id is None:
            deployed_ap.append(0.0)
            return
        victim = taskset.task(victim_id)
        ap = attack_count(sched, victim, set(taskset.untrusted_ids()))
        deployed_ap.append(
            float(Fraction(ap * sched.spec.period_of(victim_id), sched.length))
        )

    if policy == "static":
        sched = simulate_fixed_priority(taskset, taskset.min_period_spec())
        for epoch in range(epochs):
            record_ap(sched)
            flag = world.run_hyper_period(sched)
            if flag:
                alarm_epochs.append(epoch)
            if world.diverged:
                break
    elif policy == "maars":
        if store is None or selector is None:
            raise ValueError("maars policy needs a schedule store and selector")

        class _Bridge:
            def run_hyper_period(self, sched):
                record_ap(sched)
                flag = world.run_hyper_period(sched)
                if flag:
                    alarm_epochs.append(world.epoch - 1)
                if world.diverged:
                    raise _Diverged
                return flag

        class _Diverged(Exception):
            pass

        try:
            run_epoch(selector, _Bridge(), epochs)
        except _Diverged:
            pass
    else:
        raise ValueError(f"unknown policy {policy!r}")

    settle, rate = None, None
    if victim_id is not None and victim_id in world.loops:
        settle, rate = _fit_metrics(world.loops[victim_id].norm_trace, settle_band)
    metrics = RunMetrics(
        settling_time=settle,
        decay_rate=rate,
        alarm_epochs=alarm_epochs,
        deployed_ap=deployed_ap,
        diverged=world.diverged,
        victim_hits=world.victim_hits,
        victim_jobs=world.victim_jobs,
    )
    return metrics, world


def attack_success_rate(metrics: RunMetrics) -> Fraction:
    """Fraction of victim jobs whose AEW actually contained an execution of
    the compromised task during the run."""
    return metrics.attack_success_rate


def save_trace_csv(world: CoSimWorld, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "running_task", "victim_norm", "victim_u", "g", "alarm"])
        for row in world.trace:
            writer.writerow(row)
