"""Schedule generation: validity, determinism, enumeration counts, pools."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maars.schedgen import (
    Schedule,
    aware_shuffle_schedule,
    enumerate_all,
    generate_pool,
    load_pool,
    save_pool,
    shuffle_schedule,
    simulate_fixed_priority,
    validate_schedule,
)
from maars.taskmodel import TaskSpec, enumerate_specs


@pytest.fixture()
def spec2(minimal_ts):
    return TaskSpec(periods=(2, 4), untrusted_periods=(4,))


class TestFixedPriority:
    def test_minimal_schedule(self, minimal_ts, spec2):
        sched = simulate_fixed_priority(minimal_ts, spec2)
        assert sched.slots == (1, 2, 1, 3)
        assert sched.provenance == "fixed-priority"
        assert validate_schedule(minimal_ts, sched) == []

    def test_job_index_and_completions(self, minimal_ts, spec2):
        sched = simulate_fixed_priority(minimal_ts, spec2)
        assert sched.job_index(0) == 0
        assert sched.job_index(2) == 1
        assert sched.completion_slots(1, 1) == [0, 2]
        with pytest.raises(ValueError):
            simulate_fixed_priority(
                minimal_ts, TaskSpec(periods=(3, 4), untrusted_periods=(4,))
            ).job_index(11)  # idle slot


class TestShuffle:
    def test_valid_and_deterministic(self, minimal_ts):
        spec = TaskSpec(periods=(3, 4), untrusted_periods=(4,))
        a = shuffle_schedule(minimal_ts, spec, seed=5)
        b = shuffle_schedule(minimal_ts, spec, seed=5)
        assert a.slots == b.slots
        assert a.seed == 5
        assert validate_schedule(minimal_ts, a) == []

    def test_seeds_cover_multiple_schedules(self, minimal_ts):
        spec = TaskSpec(periods=(3, 4), untrusted_periods=(4,))
        seen = {shuffle_schedule(minimal_ts, spec, seed=s).slots for s in range(40)}
        assert len(seen) > 5

    @given(seed=st.integers(min_value=0, max_value=2**62))
    @settings(max_examples=20, deadline=None)
    def test_lu_shuffle_always_valid(self, lu_ts, seed):
        spec = lu_ts.min_period_spec()
        sched = shuffle_schedule(lu_ts, spec, seed)
        assert validate_schedule(lu_ts, sched) == []


class TestAwareShuffle:
    @given(seed=st.integers(min_value=0, max_value=2**62))
    @settings(max_examples=20, deadline=None)
    def test_always_valid(self, lu_ts, seed):
        spec = lu_ts.min_period_spec()
        sched = aware_shuffle_schedule(lu_ts, spec, seed)
        assert validate_schedule(lu_ts, sched) == []
        assert sched.provenance == "attack-aware"

    def test_differs_from_uniform_shuffle(self, lu_ts):
        spec = lu_ts.min_period_spec()
        aware = {aware_shuffle_schedule(lu_ts, spec, s).slots for s in range(10)}
        plain = {shuffle_schedule(lu_ts, spec, s).slots for s in range(10)}
        assert aware != plain


class TestEnumeration:
    def test_counts_and_uniqueness(self, minimal_ts, spec2):
        pool = enumerate_all(minimal_ts, spec2)
        assert len(pool) == len({s.slots for s in pool})
        for s in pool:
            assert validate_schedule(minimal_ts, s) == []

    def test_enumeration_contains_fp_and_shuffles(self, minimal_ts, spec2):
        universe = {s.slots for s in enumerate_all(minimal_ts, spec2)}
        assert simulate_fixed_priority(minimal_ts, spec2).slots in universe
        for seed in range(25):
            assert shuffle_schedule(minimal_ts, spec2, seed).slots in universe
            assert aware_shuffle_schedule(minimal_ts, spec2, seed).slots in universe


class TestPool:
    def test_generate_pool_dedupes(self, minimal_ts):
        specs = enumerate_specs(minimal_ts)
        pool = generate_pool(minimal_ts, specs, exhaustive=True)
        keys = {(s.spec.all_periods(), s.slots) for s in pool}
        assert len(keys) == len(pool)

    def test_round_trip(self, tmp_path, minimal_ts):
        specs = enumerate_specs(minimal_ts)
        pool = generate_pool(minimal_ts, specs, seeds_per_spec=3)
        path = tmp_path / "pool.json"
        save_pool(minimal_ts, pool, path)
        again = load_pool(path)
        assert [(s.spec, s.slots, s.provenance, s.seed) for s in again] == [
            (s.spec, s.slots, s.provenance, s.seed) for s in pool
        ]

    def test_content_hash_distinguishes_specs(self, minimal_ts):
        a = simulate_fixed_priority(minimal_ts, TaskSpec((2, 4), (4,)))
        b = simulate_fixed_priority(minimal_ts, TaskSpec((3, 4), (4,)))
        assert a.content_hash() != b.content_hash()


class TestValidator:
    def test_flags_idle_while_ready(self, minimal_ts, spec2):
        sched = Schedule(spec=spec2, slots=(0, 1, 1, 3), provenance="exhaustive")
        errors = validate_schedule(minimal_ts, sched)
        assert any("idle while jobs are ready" in e for e in errors)

    def test_flags_wrong_job_count(self, minimal_ts, spec2):
        sched = Schedule(spec=spec2, slots=(1, 1, 2, 3), provenance="exhaustive")
        errors = validate_schedule(minimal_ts, sched)
        assert errors
