"""Vulnerability analysis: AP/SVI against a brute-force oracle, store/LUT
ordering, hardening, and serialization."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maars.schedgen import (
    aware_shuffle_schedule,
    enumerate_all,
    shuffle_schedule,
    validate_schedule,
)
from maars.taskmodel import TaskSpec, enumerate_specs
from maars.vulnerability import (
    analyze,
    attack_count,
    attack_probability,
    build_store,
    criticality_levels,
    harden_schedule,
    load_store,
    save_store,
    store_from_dict,
    store_memory_cost,
    store_to_dict,
    svi,
    svt,
)


def oracle_attack_count(sched, victim, untrusted_ids):
    """Independent pair-scan oracle: walk every (victim job, window slot)
    pair explicitly, reconstructing completions from raw slot counts."""
    period = sched.spec.period_of(victim.id)
    hits = 0
    for job in range(sched.length // period):
        lo, hi = job * period, (job + 1) * period
        seen = 0
        completion = None
        for j in range(lo, hi):
            if sched.slots[j] == victim.id:
                seen += 1
                if seen == victim.wcet:
                    completion = j
                    break
        assert completion is not None
        attacked = False
        for k in range(1, victim.aew + 1):
            slot = completion + k
            if slot >= hi:  # window truncated at the job's deadline
                break
            if sched.slots[slot] in untrusted_ids:
                attacked = True
        hits += attacked
    return hits


class TestAttackCount:
    def test_matches_oracle_on_enumerated_minimal(self, minimal_ts):
        uids = set(minimal_ts.untrusted_ids())
        for spec in enumerate_specs(minimal_ts):
            for sched in enumerate_all(minimal_ts, spec):
                for victim in minimal_ts.trusted:
                    assert attack_count(sched, victim, uids) == oracle_attack_count(
                        sched, victim, uids
                    )

    @given(seed=st.integers(min_value=0, max_value=2**62))
    @settings(max_examples=15, deadline=None)
    def test_matches_oracle_on_lu_shuffles(self, lu_ts, seed):
        uids = set(lu_ts.untrusted_ids())
        sched = shuffle_schedule(lu_ts, lu_ts.min_period_spec(), seed)
        for victim in lu_ts.trusted:
            assert attack_count(sched, victim, uids) == oracle_attack_count(
                sched, victim, uids
            )

    def test_zero_window_never_attackable(self, lu_ts):
        sched = shuffle_schedule(lu_ts, lu_ts.min_period_spec(), 3)
        victim = lu_ts.trusted[0]
        zero = type(victim)(
            id=victim.id, period_menu=victim.period_menu, wcet=victim.wcet,
            aew=0, criticality=victim.criticality, tap=victim.tap,
        )
        assert attack_count(sched, zero, set(lu_ts.untrusted_ids())) == 0


class TestApSvi:
    def test_ap_is_exact_fraction(self, minimal_ts):
        spec = TaskSpec(periods=(2, 4), untrusted_periods=(4,))
        sched = enumerate_all(minimal_ts, spec)[0]
        ap = attack_probability(sched, minimal_ts.trusted[0], {3})
        c = attack_count(sched, minimal_ts.trusted[0], {3})
        assert ap == Fraction(c * 2, 4)

    def test_criticality_levels_normalized(self, lu_ts):
        levels = criticality_levels(lu_ts)
        assert sum(levels.values()) == 1
        assert levels[1] == Fraction(2, 5)

    def test_svt_lu(self, lu_ts):
        assert svt(lu_ts) == Fraction(7, 50)

    def test_svi_zero_without_untrusted(self, minimal_ts):
        from maars.taskmodel import TaskSet

        clean = TaskSet(trusted=minimal_ts.trusted, untrusted=(), delta=1.0)
        spec = TaskSpec(periods=(2, 4), untrusted_periods=())
        for sched in enumerate_all(clean, spec):
            assert svi(sched, clean) == 0

    def test_analyze_consistent_with_parts(self, lu_ts):
        sched = shuffle_schedule(lu_ts, lu_ts.min_period_spec(), 11)
        report = analyze(sched, lu_ts)
        uids = set(lu_ts.untrusted_ids())
        levels = criticality_levels(lu_ts)
        assert report.svi == sum(
            (attack_probability(sched, t, uids) * levels[t.id] for t in lu_ts.trusted),
            Fraction(0),
        )


class TestHarden:
    @given(seed=st.integers(min_value=0, max_value=2**62))
    @settings(max_examples=15, deadline=None)
    def test_never_raises_svi_and_stays_valid(self, lu_ts, seed):
        spec = lu_ts.min_period_spec()
        sched = aware_shuffle_schedule(lu_ts, spec, seed)
        hard = harden_schedule(sched, lu_ts)
        assert validate_schedule(lu_ts, hard) == []
        assert svi(hard, lu_ts) <= svi(sched, lu_ts)
        assert hard.seed == sched.seed
        assert hard.provenance == sched.provenance

    def test_deterministic(self, lu_ts):
        sched = aware_shuffle_schedule(lu_ts, lu_ts.min_period_spec(), 21)
        assert harden_schedule(sched, lu_ts).slots == harden_schedule(sched, lu_ts).slots

    def test_fixed_point(self, lu_ts):
        """Hardening an already-hardened schedule changes nothing."""
        sched = aware_shuffle_schedule(lu_ts, lu_ts.min_period_spec(), 4)
        once = harden_schedule(sched, lu_ts)
        assert harden_schedule(once, lu_ts).slots == once.slots


class TestStore:
    def test_sorted_by_svi(self, minimal_store):
        svis = [r.svi for r in minimal_store.reports]
        assert svis == sorted(svis)

    def test_k_threshold_splits_at_svt(self, minimal_store):
        k = minimal_store.k_threshold
        assert all(r.svi < minimal_store.svt for r in minimal_store.reports[:k])
        assert all(r.svi >= minimal_store.svt for r in minimal_store.reports[k:])

    def test_lut_rows_sorted_and_below_tap(self, minimal_store):
        for t in minimal_store.taskset.trusted:
            row = minimal_store.lut[t.id]
            aps = [minimal_store.ap_of(i, t.id) for i in row]
            assert aps == sorted(aps)
            assert all(ap < Fraction(t.tap).limit_denominator(10**6) for ap in aps)

    def test_tie_break_is_deterministic(self, minimal_ts):
        pool = []
        for spec in enumerate_specs(minimal_ts):
            pool.extend(enumerate_all(minimal_ts, spec))
        a = build_store(pool, minimal_ts)
        b = build_store(list(reversed(pool)), minimal_ts)
        assert [s.slots for s in a.schedules] == [s.slots for s in b.schedules]

    def test_empty_pool_rejected(self, minimal_ts):
        with pytest.raises(ValueError):
            build_store([], minimal_ts)

    def test_round_trip(self, tmp_path, minimal_store):
        path = tmp_path / "store.json"
        save_store(minimal_store, path)
        again = load_store(path, minimal_store.taskset)
        assert again.k_threshold == minimal_store.k_threshold
        assert again.svt == minimal_store.svt
        assert [s.slots for s in again.schedules] == [
            s.slots for s in minimal_store.schedules
        ]
        assert [r.svi for r in again.reports] == [r.svi for r in minimal_store.reports]
        assert again.lut == minimal_store.lut

    def test_rejects_wrong_taskset(self, minimal_store, lu_ts):
        data = store_to_dict(minimal_store)
        with pytest.raises(ValueError):
            store_from_dict(data, lu_ts)

    def test_memory_model(self, minimal_store):
        cost = store_memory_cost(minimal_store)
        q = len(minimal_store.taskset.trusted)
        m = len(minimal_store.schedules)
        assert cost["lut_elements"] == q * m
        assert cost["model_bytes"] == q * m + sum(
            s.length for s in minimal_store.schedules
        )
        assert cost["serialized_bytes"] > 0
