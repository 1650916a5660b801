"""Kernel backends: SplitMix64 reference values, pure/compiled parity."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maars.kernel import BACKEND, _pure
from maars.kernel._pure import DeadlineMiss, splitmix64

try:
    from maars.kernel import _fast
except ImportError:
    _fast = None

needs_fast = pytest.mark.skipif(_fast is None, reason="compiled kernel unavailable")


class TestSplitMix64:
    def test_reference_sequence(self):
        # Published SplitMix64 outputs for seed 1234567.
        state = 1234567
        outputs = []
        for _ in range(3):
            state, z = splitmix64(state)
            outputs.append(z)
        assert outputs == [
            6457827717110365317,
            3203168211198807973,
            9817491932198370423,
        ]

    @needs_fast
    def test_compiled_matches_pure(self):
        sp, zp = _pure.splitmix64(42)
        sf, zf = _fast.splitmix64(42)
        assert (sp, zp) == (sf, zf)


TASK_SETS = [
    # (periods, wcets, l)
    ([2, 4, 4], [1, 1, 1], 4),
    ([3, 4, 4], [1, 1, 1], 12),
    ([4, 4, 5], [1, 1, 2], 20),
    ([10, 10, 10, 20, 10, 30, 20], [1, 1, 1, 1, 1, 1, 1], 60),
]


class TestPureKernel:
    def test_simulate_fp_priority_order(self):
        slots = _pure.simulate_fp([2, 4, 4], [1, 1, 1], 4)
        assert slots == [1, 2, 1, 3]

    def test_simulate_fp_deadline_miss(self):
        with pytest.raises(DeadlineMiss):
            _pure.simulate_fp([2, 3], [1, 2], 6)

    def test_shuffle_is_deterministic_per_seed(self):
        a = _pure.shuffle([3, 4, 4], [1, 1, 1], 12, 7)
        b = _pure.shuffle([3, 4, 4], [1, 1, 1], 12, 7)
        c = _pure.shuffle([3, 4, 4], [1, 1, 1], 12, 8)
        assert a == b
        assert a != c

    def test_enumerate_includes_fp_schedule(self):
        fp = tuple(_pure.simulate_fp([2, 4, 4], [1, 1, 1], 4))
        assert fp in set(_pure.enumerate_all([2, 4, 4], [1, 1, 1], 4, 1000))

    def test_enumerate_budget(self):
        with pytest.raises(_pure.BudgetExceeded):
            _pure.enumerate_all([3, 4, 4], [1, 1, 1], 12, 3)

    @given(seed=st.integers(min_value=0, max_value=2**63))
    @settings(max_examples=20, deadline=None)
    def test_shuffle_work_conserving(self, seed):
        periods, wcets, l = [3, 4, 4], [1, 1, 1], 12
        slots = _pure.shuffle(periods, wcets, l, seed)
        rem = [0] * len(periods)
        for t in range(l):
            for i, p in enumerate(periods):
                if t % p == 0:
                    assert rem[i] == 0  # no deadline miss
                    rem[i] = wcets[i]
            s = slots[t]
            if s == 0:
                assert all(r == 0 for r in rem)
            else:
                rem[s - 1] -= 1
                assert rem[s - 1] >= 0
        assert all(r == 0 for r in rem)


@needs_fast
class TestParity:
    """Both backends must produce byte-identical slot arrays."""

    @pytest.mark.parametrize("periods,wcets,l", TASK_SETS)
    def test_simulate_fp(self, periods, wcets, l):
        assert _pure.simulate_fp(periods, wcets, l) == _fast.simulate_fp(
            periods, wcets, l
        )

    @pytest.mark.parametrize("periods,wcets,l", TASK_SETS)
    @pytest.mark.parametrize("seed", [0, 1, 7, 2**40 + 3])
    def test_shuffle(self, periods, wcets, l, seed):
        assert _pure.shuffle(periods, wcets, l, seed) == _fast.shuffle(
            periods, wcets, l, seed
        )

    @pytest.mark.parametrize("seed", [0, 5, 11, 97])
    def test_aware_shuffle(self, seed):
        periods = [10, 15, 10, 20, 10, 30, 20]
        wcets = [1] * 7
        aews = [3, 4, 1, 8]
        args = (periods, wcets, aews, 4, 60, seed)
        assert _pure.aware_shuffle(*args) == _fast.aware_shuffle(*args)

    @pytest.mark.parametrize("periods,wcets,l", TASK_SETS[:3])
    def test_enumerate_all(self, periods, wcets, l):
        pure = _pure.enumerate_all(periods, wcets, l, 100_000)
        fast = _fast.enumerate_all(periods, wcets, l, 100_000)
        assert [tuple(s) for s in pure] == [tuple(s) for s in fast]


def test_backend_reports_selection():
    assert BACKEND in ("compiled", "pure")
