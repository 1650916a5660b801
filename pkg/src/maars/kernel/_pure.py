"""Pure-Python slot-level scheduling kernel.

Reference implementation of the hot loops: fixed-priority simulation,
feasibility-safe randomized shuffling, and exhaustive enumeration. The
compiled kernel in ``_fast.pyx`` mirrors this module exactly (including the
RNG), so either backend produces byte-identical schedules for a given seed.

Tasks are passed as parallel period/wcet lists in priority order (index 0 =
highest priority = task id 1). Slot values are 1-based task ids, 0 = idle.
"""

from __future__ import annotations

import sys

MASK64 = (1 << 64) - 1


class DeadlineMiss(Exception):
    def __init__(self, task_id: int, slot: int):
        super().__init__(f"task {task_id} missed a deadline at slot {slot}")
        self.task_id = task_id
        self.slot = slot


class BudgetExceeded(Exception):
    def __init__(self, partial_count: int):
        super().__init__(f"enumeration budget exhausted after {partial_count} schedules")
        self.partial_count = partial_count


def splitmix64(state: int) -> tuple[int, int]:
    """One step of SplitMix64; returns (new_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _edf_feasible(periods, wcets, rem, dl, t, l, can_early_exit):
    """Check that the backlog at slot t can finish with no deadline miss.

    Simulates earliest-deadline-first over the remaining slots. With total
    utilization <= 1 the remainder is always completable once the backlog
    drains, so the scan stops at the first idle instant with empty backlog.
    """
    n = len(periods)
    rem = list(rem)
    dl = list(dl)
    backlog = sum(rem)
    while t < l:
        if backlog == 0 and can_early_exit:
            return True
        for i in range(n):
            if t % periods[i] == 0:
                if rem[i] > 0:
                    return False
                rem[i] = wcets[i]
                dl[i] = t + periods[i]
                backlog += wcets[i]
        best = -1
        best_dl = 0
        for i in range(n):
            if rem[i] > 0 and (best < 0 or dl[i] < best_dl):
                best = i
                best_dl = dl[i]
        if best >= 0:
            rem[best] -= 1
            backlog -= 1
        t += 1
    return backlog == 0


def simulate_fp(periods, wcets, l):
    """Deterministic fixed-priority preemptive schedule, synchronous release.

    Returns the slot array over [0, l). Raises DeadlineMiss if the spec is
    infeasible.
    """
    n = len(periods)
    rem = [0] * n
    slots = [0] * l
    for t in range(l):
        for i in range(n):
            if t % periods[i] == 0:
                if rem[i] > 0:
                    raise DeadlineMiss(i + 1, t)
                rem[i] = wcets[i]
        for i in range(n):
            if rem[i] > 0:
                rem[i] -= 1
                slots[t] = i + 1
                break
    for i in range(n):
        if rem[i] > 0:
            raise DeadlineMiss(i + 1, l)
    return slots


def shuffle(periods, wcets, l, seed):
    """Randomized feasible schedule: per slot, a uniform choice among ready
    jobs whose selection keeps the remainder completable.

    Uniformity comes from testing candidates in Fisher-Yates order and taking
    the first feasible one. Work-conserving: idles only with no job ready.
    """
    n = len(periods)
    util_ok = sum(wcets[i] / periods[i] for i in range(n)) <= 1.0
    rem = [0] * n
    dl = [0] * n
    slots = [0] * l
    state = (seed ^ 0xD6E8FEB86659FD93) & MASK64
    for t in range(l):
        for i in range(n):
            if t % periods[i] == 0:
                if rem[i] > 0:
                    raise DeadlineMiss(i + 1, t)
                rem[i] = wcets[i]
                dl[i] = t + periods[i]
        ready = [i for i in range(n) if rem[i] > 0]
        if not ready:
            continue
        # Fisher-Yates over the ready list
        for j in range(len(ready) - 1, 0, -1):
            state, z = splitmix64(state)
            k = z % (j + 1)
            ready[j], ready[k] = ready[k], ready[j]
        chosen = -1
        for i in ready:
            rem[i] -= 1
            if _edf_feasible(periods, wcets, rem, dl, t + 1, l, util_ok):
                chosen = i
                break
            rem[i] += 1
        if chosen < 0:
            # cannot happen when the spec is schedulable: the EDF check
            # accepts at least the earliest-deadline candidate
            raise DeadlineMiss(ready[0] + 1, t)
        slots[t] = chosen + 1
    return slots


def aware_shuffle(periods, wcets, aews, n_trusted, l, seed):
    """Attack-aware randomized schedule.

    Like ``shuffle`` but with a class bias over the Fisher-Yates order:
    while any trusted task's post-completion window (truncated at its
    deadline) is open, trusted candidates are tried before untrusted ones;
    outside every window the order is reversed so untrusted backlog drains
    early. Within a class the order stays random. Work-conserving and
    deadline-feasible exactly like ``shuffle``.
    """
    n = len(periods)
    util_ok = sum(wcets[i] / periods[i] for i in range(n)) <= 1.0
    rem = [0] * n
    dl = [0] * n
    slots = [0] * l
    aew_end = [0] * n_trusted
    state = (seed ^ 0xA3C59AC2ED1097E5) & MASK64
    for t in range(l):
        for i in range(n):
            if t % periods[i] == 0:
                if rem[i] > 0:
                    raise DeadlineMiss(i + 1, t)
                rem[i] = wcets[i]
                dl[i] = t + periods[i]
        ready = [i for i in range(n) if rem[i] > 0]
        if not ready:
            continue
        for j in range(len(ready) - 1, 0, -1):
            state, z = splitmix64(state)
            k = z % (j + 1)
            ready[j], ready[k] = ready[k], ready[j]
        if any(t < e for e in aew_end):
            ready = [i for i in ready if i < n_trusted] + [
                i for i in ready if i >= n_trusted
            ]
        else:
            ready = [i for i in ready if i >= n_trusted] + [
                i for i in ready if i < n_trusted
            ]
        chosen = -1
        for i in ready:
            rem[i] -= 1
            if _edf_feasible(periods, wcets, rem, dl, t + 1, l, util_ok):
                chosen = i
                break
            rem[i] += 1
        if chosen < 0:
            raise DeadlineMiss(ready[0] + 1, t)
        slots[t] = chosen + 1
        if chosen < n_trusted and rem[chosen] == 0:
            aew_end[chosen] = min(t + aews[chosen] + 1, dl[chosen])
    return slots


def enumerate_all(periods, wcets, l, budget):
    """Exhaustive DFS over per-slot ready-job choices.

    Returns the list of all feasible work-conserving slot arrays. ``budget``
    caps the number of completed schedules; raises BudgetExceeded beyond it.
    Distinct choice sequences yield distinct slot arrays, so no dedup pass
    is needed.
    """
    n = len(periods)
    util_ok = sum(wcets[i] / periods[i] for i in range(n)) <= 1.0
    results = []
    rem = [0] * n
    dl = [0] * n
    slots = [0] * l
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, l + 200))

    def step(t):
        if t == l:
            if sum(rem) == 0:
                if len(results) >= budget:
                    raise BudgetExceeded(len(results))
                results.append(tuple(slots))
            return
        released = []
        for i in range(n):
            if t % periods[i] == 0 and rem[i] > 0:
                return  # deadline miss on this branch
        for i in range(n):
            if t % periods[i] == 0:
                rem[i] = wcets[i]
                dl[i] = t + periods[i]
                released.append(i)
        ready = [i for i in range(n) if rem[i] > 0]
        if not ready:
            slots[t] = 0
            step(t + 1)
        else:
            for i in ready:
                rem[i] -= 1
                if _edf_feasible(periods, wcets, rem, dl, t + 1, l, util_ok):
                    slots[t] = i + 1
                    step(t + 1)
                rem[i] += 1
        for i in released:
            rem[i] = 0

    try:
        step(0)
    finally:
        sys.setrecursionlimit(old_limit)
    return results
