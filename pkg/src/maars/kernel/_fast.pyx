# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled slot-level scheduling kernel.

Mirrors ``_pure.py`` exactly — same algorithms, same SplitMix64 RNG, same
Fisher-Yates candidate order — so both backends produce byte-identical
schedules for a given seed.
"""

from libc.stdlib cimport free, malloc

from ._pure import BudgetExceeded, DeadlineMiss

ctypedef unsigned long long u64

cdef u64 GOLDEN = 0x9E3779B97F4A7C15ULL
cdef u64 MIX1 = 0xBF58476D1CE4E5B9ULL
cdef u64 MIX2 = 0x94D049BB133111EBULL
cdef u64 SEED_XOR = 0xD6E8FEB86659FD93ULL


cdef inline u64 _mix(u64 state, u64 *out) nogil:
    cdef u64 z
    state = state + GOLDEN
    z = state
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    out[0] = z ^ (z >> 31)
    return state


def splitmix64(state):
    """One step of SplitMix64; returns (new_state, output)."""
    cdef u64 s = <u64> state
    cdef u64 z
    s = _mix(s, &z)
    return s, z


cdef bint _edf_feasible(int n, int *periods, int *wcets, int *rem, int *dl,
                        int t, int l, bint can_early_exit,
                        int *s_rem, int *s_dl) nogil:
    cdef int i, backlog = 0, best, best_dl
    for i in range(n):
        s_rem[i] = rem[i]
        s_dl[i] = dl[i]
        backlog += rem[i]
    while t < l:
        if backlog == 0 and can_early_exit:
            return True
        for i in range(n):
            if t % periods[i] == 0:
                if s_rem[i] > 0:
                    return False
                s_rem[i] = wcets[i]
                s_dl[i] = t + periods[i]
                backlog += wcets[i]
        best = -1
        best_dl = 0
        for i in range(n):
            if s_rem[i] > 0 and (best < 0 or s_dl[i] < best_dl):
                best = i
                best_dl = s_dl[i]
        if best >= 0:
            s_rem[best] -= 1
            backlog -= 1
        t += 1
    return backlog == 0


cdef struct Arrays:
    int *periods
    int *wcets
    int *rem
    int *dl
    int *slots
    int *scratch_rem
    int *scratch_dl
    int *ready


cdef bint _alloc(Arrays *a, int n, int l):
    a.periods = <int *> malloc(n * sizeof(int))
    a.wcets = <int *> malloc(n * sizeof(int))
    a.rem = <int *> malloc(n * sizeof(int))
    a.dl = <int *> malloc(n * sizeof(int))
    a.scratch_rem = <int *> malloc(n * sizeof(int))
    a.scratch_dl = <int *> malloc(n * sizeof(int))
    a.ready = <int *> malloc(n * sizeof(int))
    a.slots = <int *> malloc(l * sizeof(int))
    return (a.periods != NULL and a.wcets != NULL and a.rem != NULL
            and a.dl != NULL and a.scratch_rem != NULL and a.scratch_dl != NULL
            and a.ready != NULL and a.slots != NULL)


cdef void _free(Arrays *a):
    free(a.periods); free(a.wcets); free(a.rem); free(a.dl)
    free(a.scratch_rem); free(a.scratch_dl); free(a.ready); free(a.slots)


cdef void _load(Arrays *a, object periods, object wcets, int n, int l):
    cdef int i
    for i in range(n):
        a.periods[i] = periods[i]
        a.wcets[i] = wcets[i]
        a.rem[i] = 0
        a.dl[i] = 0
    for i in range(l):
        a.slots[i] = 0


cdef bint _util_ok(object periods, object wcets):
    cdef double u = 0.0
    cdef int i
    for i in range(len(periods)):
        u += (<double> wcets[i]) / (<double> periods[i])
    return u <= 1.0


def simulate_fp(periods, wcets, int l):
    """Deterministic fixed-priority preemptive schedule, synchronous release."""
    cdef int n = len(periods)
    cdef Arrays a
    cdef int t, i
    if not _alloc(&a, n, l):
        raise MemoryError
    try:
        _load(&a, periods, wcets, n, l)
        for t in range(l):
            for i in range(n):
                if t % a.periods[i] == 0:
                    if a.rem[i] > 0:
                        raise DeadlineMiss(i + 1, t)
                    a.rem[i] = a.wcets[i]
            for i in range(n):
                if a.rem[i] > 0:
                    a.rem[i] -= 1
                    a.slots[t] = i + 1
                    break
        for i in range(n):
            if a.rem[i] > 0:
                raise DeadlineMiss(i + 1, l)
        return [a.slots[t] for t in range(l)]
    finally:
        _free(&a)


def shuffle(periods, wcets, int l, seed):
    """Randomized feasible schedule; uniform over feasible ready choices."""
    cdef int n = len(periods)
    cdef bint util_ok = _util_ok(periods, wcets)
    cdef Arrays a
    cdef u64 state = (<u64> seed) ^ SEED_XOR
    cdef u64 z
    cdef int t, i, j, k, nready, chosen, tmp
    if not _alloc(&a, n, l):
        raise MemoryError
    try:
        _load(&a, periods, wcets, n, l)
        for t in range(l):
            for i in range(n):
                if t % a.periods[i] == 0:
                    if a.rem[i] > 0:
                        raise DeadlineMiss(i + 1, t)
                    a.rem[i] = a.wcets[i]
                    a.dl[i] = t + a.periods[i]
            nready = 0
            for i in range(n):
                if a.rem[i] > 0:
                    a.ready[nready] = i
                    nready += 1
            if nready == 0:
                continue
            for j in range(nready - 1, 0, -1):
                state = _mix(state, &z)
                k = <int> (z % <u64> (j + 1))
                tmp = a.ready[j]
                a.ready[j] = a.ready[k]
                a.ready[k] = tmp
            chosen = -1
            for j in range(nready):
                i = a.ready[j]
                a.rem[i] -= 1
                if _edf_feasible(n, a.periods, a.wcets, a.rem, a.dl,
                                 t + 1, l, util_ok, a.scratch_rem, a.scratch_dl):
                    chosen = i
                    break
                a.rem[i] += 1
            if chosen < 0:
                raise DeadlineMiss(a.ready[0] + 1, t)
            a.slots[t] = chosen + 1
        return [a.slots[t] for t in range(l)]
    finally:
        _free(&a)


def aware_shuffle(periods, wcets, aews, int n_trusted, int l, seed):
    """Attack-aware randomized schedule; see the pure kernel for semantics."""
    cdef int n = len(periods)
    cdef bint util_ok = _util_ok(periods, wcets)
    cdef Arrays a
    cdef u64 state = (<u64> seed) ^ 0xA3C59AC2ED1097E5ULL
    cdef u64 z
    cdef int t, i, j, k, nready, chosen, tmp, pos
    cdef int *aew_end = <int *> malloc(max(n_trusted, 1) * sizeof(int))
    cdef int *order = <int *> malloc(max(n, 1) * sizeof(int))
    cdef bint in_aew
    if aew_end == NULL or order == NULL:
        free(aew_end); free(order)
        raise MemoryError
    if not _alloc(&a, n, l):
        free(aew_end); free(order)
        raise MemoryError
    try:
        _load(&a, periods, wcets, n, l)
        for i in range(n_trusted):
            aew_end[i] = 0
        for t in range(l):
            for i in range(n):
                if t % a.periods[i] == 0:
                    if a.rem[i] > 0:
                        raise DeadlineMiss(i + 1, t)
                    a.rem[i] = a.wcets[i]
                    a.dl[i] = t + a.periods[i]
            nready = 0
            for i in range(n):
                if a.rem[i] > 0:
                    a.ready[nready] = i
                    nready += 1
            if nready == 0:
                continue
            for j in range(nready - 1, 0, -1):
                state = _mix(state, &z)
                k = <int> (z % <u64> (j + 1))
                tmp = a.ready[j]
                a.ready[j] = a.ready[k]
                a.ready[k] = tmp
            in_aew = False
            for i in range(n_trusted):
                if t < aew_end[i]:
                    in_aew = True
                    break
            # stable partition of the shuffled order by trust class
            pos = 0
            if in_aew:
                for j in range(nready):
                    if a.ready[j] < n_trusted:
                        order[pos] = a.ready[j]; pos += 1
                for j in range(nready):
                    if a.ready[j] >= n_trusted:
                        order[pos] = a.ready[j]; pos += 1
            else:
                for j in range(nready):
                    if a.ready[j] >= n_trusted:
                        order[pos] = a.ready[j]; pos += 1
                for j in range(nready):
                    if a.ready[j] < n_trusted:
                        order[pos] = a.ready[j]; pos += 1
            chosen = -1
            for j in range(nready):
                i = order[j]
                a.rem[i] -= 1
                if _edf_feasible(n, a.periods, a.wcets, a.rem, a.dl,
                                 t + 1, l, util_ok, a.scratch_rem, a.scratch_dl):
                    chosen = i
                    break
                a.rem[i] += 1
            if chosen < 0:
                raise DeadlineMiss(order[0] + 1, t)
            a.slots[t] = chosen + 1
            if chosen < n_trusted and a.rem[chosen] == 0:
                aew_end[chosen] = a.dl[chosen]
                if t + aews[chosen] + 1 < aew_end[chosen]:
                    aew_end[chosen] = t + aews[chosen] + 1
        return [a.slots[t] for t in range(l)]
    finally:
        free(aew_end)
        free(order)
        _free(&a)


cdef int _enum_step(Arrays *a, int n, int l, int t, bint util_ok,
                    int budget, list results) except -1:
    cdef int i, j, nready, total
    cdef int released[64]
    cdef int nreleased = 0
    if t == l:
        total = 0
        for i in range(n):
            total += a.rem[i]
        if total == 0:
            if len(results) >= budget:
                raise BudgetExceeded(len(results))
            results.append(tuple([a.slots[j] for j in range(l)]))
        return 0
    for i in range(n):
        if t % a.periods[i] == 0 and a.rem[i] > 0:
            return 0  # deadline miss on this branch
    for i in range(n):
        if t % a.periods[i] == 0:
            a.rem[i] = a.wcets[i]
            a.dl[i] = t + a.periods[i]
            released[nreleased] = i
            nreleased += 1
    nready = 0
    for i in range(n):
        if a.rem[i] > 0:
            nready += 1
    if nready == 0:
        a.slots[t] = 0
        _enum_step(a, n, l, t + 1, util_ok, budget, results)
    else:
        for i in range(n):
            if a.rem[i] <= 0:
                continue
            a.rem[i] -= 1
            if _edf_feasible(n, a.periods, a.wcets, a.rem, a.dl,
                             t + 1, l, util_ok, a.scratch_rem, a.scratch_dl):
                a.slots[t] = i + 1
                _enum_step(a, n, l, t + 1, util_ok, budget, results)
            a.rem[i] += 1
    for j in range(nreleased):
        a.rem[released[j]] = 0
    return 0


def enumerate_all(periods, wcets, int l, int budget):
    """Exhaustive DFS over per-slot ready-job choices."""
    cdef int n = len(periods)
    if n > 64:
        raise ValueError("compiled kernel supports at most 64 tasks")
    cdef bint util_ok = _util_ok(periods, wcets)
    cdef Arrays a
    cdef list results = []
    if not _alloc(&a, n, l):
        raise MemoryError
    try:
        _load(&a, periods, wcets, n, l)
        _enum_step(&a, n, l, 0, util_ok, budget, results)
        return results
    finally:
        _free(&a)
