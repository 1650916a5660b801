"""Attacker-side schedule-ladder inference.

Folds an observed timeline into rows of the victim's minimum period so all
victim arrivals align in one column, then derives the columns where a
compromised lower-priority task arrives (AAI) and actually executes (AEI).
Columns in AAI but never in AEI are preemption shadows: candidate victim
arrival columns. Columns are 0-indexed internally; renderers show 1-indexed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .schedgen import Schedule
from .taskmodel import TrustedTask, UntrustedTask


@dataclass(frozen=True)
class LadderView:
    row_length: int
    attacker_id: int
    aai: frozenset[int]
    aei: frozenset[int]
    observation_slots: int
    conclusive: bool

    @property
    def inferred_columns(self) -> frozenset[int]:
        return self.aai - self.aei


def tile_timeline(sched: Schedule, observation_slots: int) -> list[int]:
    """Repeat the schedule's hyper-period to cover the observation window."""
    reps = -(-observation_slots // sched.length)
    return (list(sched.slots) * reps)[:observation_slots]


def default_observation(row_length: int, attacker_period: int) -> int:
    # 2x the repetition length of the arrival/execution pattern
    return 2 * math.lcm(row_length, attacker_period)


def build_ladder(
    timeline: list[int],
    victim: TrustedTask,
    attacker: UntrustedTask,
    observation_slots: int | None = None,
) -> LadderView:
    """Fold ``timeline`` against the victim's minimum period.

    The attacker knows its own arrival times (periodic from slot 0) and
    observes only its own executed slots; both are reduced modulo the row
    length. Flagged inconclusive when the window is shorter than one full
    repetition lcm(row, attacker period).
    """
    row = victim.min_period
    if observation_slots is None:
        observation_slots = min(len(timeline), default_observation(row, attacker.period))
    if observation_slots > len(timeline):
        raise ValueError("observation window exceeds available timeline")
    aai = {
        (a * attacker.period) % row
        for a in range(-(-observation_slots // attacker.period))
        if a * attacker.period < observation_slots
    }
    aei = {
        t % row for t in range(observation_slots) if timeline[t] == attacker.id
    }
    conclusive = observation_slots >= math.lcm(row, attacker.period)
    return LadderView(
        row_length=row,
        attacker_id=attacker.id,
        aai=frozenset(aai),
        aei=frozenset(aei),
        observation_slots=observation_slots,
        conclusive=conclusive,
    )


def inferability_ratio(lv: LadderView) -> Fraction:
    """(|AEI| mod |AAI|) / |AAI|; the modulo resets the ratio to zero when
    the attacker executes in every column it arrives in (no preemptions, so
    nothing is revealed)."""
    n_aai = len(lv.aai)
    if n_aai < 1:
        raise ValueError("attacker never arrives in the observation window")
    return Fraction(len(lv.aei) % n_aai, n_aai)


def render_ladder(timeline: list[int], lv: LadderView, sep: str = " ") -> str:
    """Plain-text grid of the folded timeline (1-indexed column header)."""
    row = lv.row_length
    lines = [sep.join(f"c{c+1:>2}" for c in range(row))]
    for start in range(0, lv.observation_slots, row):
        chunk = timeline[start : start + row]
        lines.append(sep.join(f"{s:>3}" for s in chunk))
    marks = [
        "AAI" if c in lv.aai else "   " for c in range(row)
    ]
    lines.append(sep.join(f"{m:>3}" for m in marks))
    marks = [
        "AEI" if c in lv.aei else "   " for c in range(row)
    ]
    lines.append(sep.join(f"{m:>3}" for m in marks))
    return "\n".join(lines)


def render_ladder_csv(timeline: list[int], lv: LadderView) -> str:
    row = lv.row_length
    lines = [",".join(str(c + 1) for c in range(row))]
    for start in range(0, lv.observation_slots, row):
        lines.append(",".join(str(s) for s in timeline[start : start + row]))
    return "\n".join(lines) + "\n"
