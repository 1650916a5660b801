"""Security-aware period pruning: admissibility rule and menu filtering."""

import pytest

from maars.secureperiods import Verdict, admissible, classify, prune_security
from maars.taskmodel import TrustedTask, UntrustedTask


def victim(menu):
    return TrustedTask(
        id=1, period_menu=tuple(menu), wcet=1, aew=1, criticality=1.0, tap=0.5
    )


ATTACKER = UntrustedTask(id=2, period=20, wcet=2)


class TestAdmissible:
    def test_strict_when_offset_equals_wcet(self):
        # p' = 12 = 1*10 + 2 with e_j = 2
        assert admissible(12, 10, ATTACKER) is Verdict.STRICT

    def test_relaxed_inside_band(self):
        # k' = 5 in [e_j, p-1] = [2, 9]
        assert admissible(15, 10, ATTACKER) is Verdict.RELAXED
        assert admissible(19, 10, ATTACKER) is Verdict.RELAXED  # k' = 9 = p-1

    def test_inadmissible_below_wcet(self):
        assert admissible(11, 10, ATTACKER) is Verdict.INADMISSIBLE  # k' = 1 < 2
        assert admissible(20, 10, ATTACKER) is Verdict.INADMISSIBLE  # k' = 0

    def test_candidate_must_exceed_base(self):
        with pytest.raises(ValueError):
            admissible(10, 10, ATTACKER)

    def test_multiple_of_base_plus_offset(self):
        # p' = 32 = 3*10 + 2: same verdict as 12
        assert admissible(32, 10, ATTACKER) is Verdict.STRICT


class TestClassify:
    def test_per_attacker_verdicts(self):
        others = [ATTACKER, UntrustedTask(id=3, period=30, wcet=5)]
        result = classify(victim([10, 12]), 12, others)
        assert result.verdicts[2] is Verdict.STRICT
        assert result.verdicts[3] is Verdict.INADMISSIBLE  # k'=2 < e=5
        assert not result.admissible_for_all()


class TestPrune:
    def test_all_attackers_policy(self):
        menus = [10, 12, 15, 20]
        kept = prune_security(victim(menus), menus, [ATTACKER])
        # 12 strict, 15 relaxed, 20 (k'=0) dropped
        assert kept == [10, 12, 15]

    def test_designated_attacker_policy(self):
        menus = [10, 12, 15]
        weak = UntrustedTask(id=9, period=40, wcet=6)
        kept = prune_security(
            victim(menus), menus, [ATTACKER, weak],
            policy="designated-attacker", designated=2,
        )
        assert kept == [10, 12, 15]
        kept_all = prune_security(victim(menus), menus, [ATTACKER, weak])
        assert kept_all == [10]  # k'=2,5 both < 6 for the weak attacker

    def test_base_always_kept(self):
        kept = prune_security(victim([10, 11]), [10, 11], [ATTACKER])
        assert kept == [10]

    def test_base_must_be_candidate(self):
        with pytest.raises(ValueError):
            prune_security(victim([10, 12]), [12], [ATTACKER])

    def test_no_untrusted_keeps_everything(self):
        menus = [10, 11, 13]
        assert prune_security(victim(menus), menus, []) == menus

    def test_lu_menus_survive_pruning(self, lu_ts):
        """Bundled automotive menus were chosen to pass the untrusted set."""
        for t in lu_ts.trusted:
            kept = prune_security(t, list(t.period_menu), list(lu_ts.untrusted))
            assert kept == sorted(t.period_menu)
