import random

import pytest
from hypothesis import given, settings, strategies as st

from rlmdsim.compliance import (
    ComplianceParamError, ParticipationSets, aware_set, check_scenario, check_tau_pi_compliance,
    check_tau_sleepiness, participation_from_schedule, participation_sets,
)
from rlmdsim.core import vote_round
from rlmdsim.forkchoice import INFINITY
from rlmdsim.netsim import run
from rlmdsim.scenario import Scenario

import oracles


def sets_from(H, A, n=None):
    horizon = len(H)
    n = n or 1 + max((max(h) for h in H + A if h), default=0)
    H = tuple(frozenset(h) for h in H)
    A = tuple(frozenset(a) for a in A)
    return ParticipationSets(n, 1, horizon, H, A, H, tuple(H[r // 3] for r in range(3 * horizon)))


def random_sets(rng, n=None, horizon=None):
    n = n or rng.randint(2, 8)
    horizon = horizon or rng.randint(3, 14)
    H, A, corrupted = [], [], set()
    for _ in range(horizon):
        if rng.random() < 0.2:
            corrupted.add(rng.randrange(n))
        H.append({v for v in range(n) if v not in corrupted and rng.random() < 0.75})
        A.append(set(corrupted))
    return sets_from(H, A, n), H, A


def test_eq1_matches_oracle():
    rng = random.Random(2)
    for _ in range(300):
        sets, H, A = random_sets(rng)
        for tau in (1, 2, 3, INFINITY):
            rep = check_tau_sleepiness(sets, tau)
            want = [oracles.h_sets_compliant(H, A, t, None if tau is INFINITY else tau)
                    for t in range(1, len(H))]
            assert [r["pass"] for r in rep.rows] == want


def test_report_shape():
    sets = sets_from([{0, 1, 2, 3}, {0}, {0}], [set(), set(), {1}])
    rep = check_tau_sleepiness(sets, 2)
    assert rep.row(1)["lhs"] == 4 and rep.row(1)["pass"]
    assert rep.row(2) == {"slot": 2, "condition": "sleepiness", "lhs": 1, "rhs": 3, "pass": False}
    assert rep.first_violation == 2 and not rep.compliant
    assert rep.to_json()["overall"] == {"compliant": False, "first_violation": 2}


def test_tau_pi_parameter_error():
    sets = sets_from([{0, 1}] * 4, [set()] * 4)
    with pytest.raises(ComplianceParamError):
        check_tau_pi_compliance(sets, 2, 2, (0, 2))
    with pytest.raises(ComplianceParamError):
        check_tau_pi_compliance(sets, 3, INFINITY, (0, 2))


def test_tpa_rows():
    H = [{0, 1, 2}, {0, 1, 2}, {1}, {0, 1, 2}, {0, 1, 2}, {0, 1, 2}]
    A = [set()] * 6
    sets = sets_from(H, A, 3)
    rep = check_tau_pi_compliance(sets, INFINITY, 3, (1, 3))
    conds = {(r["slot"], r["condition"]) for r in rep.rows}
    assert (1, "tpa_length") in conds and (1, "awake_at_merge") in conds
    assert {(s, "tpa_majority") for s in (2, 3, 4)} <= conds
    assert (2, "sleepiness") not in conds and (4, "sleepiness") in conds
    assert rep.compliant
    long_tpa = check_tau_pi_compliance(sets, INFINITY, 2, (1, 4))
    assert not long_tpa.row(1, "tpa_length")["pass"]


def test_pi_at_most_one_reduces_to_sleepiness():
    sets = sets_from([{0, 1}] * 5, [set()] * 5)
    rep = check_tau_pi_compliance(sets, 3, 1, (1, 3))
    assert {r["condition"] for r in rep.rows} == {"sleepiness"}


def test_aware_set_during_tpa():
    H = [{0, 1}, {0, 1}, {1, 2}, {1, 2}]
    sets = sets_from(H, [set()] * 4, 3)
    assert aware_set(sets, (1, 3), vote_round(2, 1)) == {1}
    assert aware_set(sets, (1, 3), vote_round(0, 1)) == {0, 1}
    assert aware_set(sets, None, vote_round(2, 1)) == {1, 2}


def test_schedule_sets_match_trace_sets():
    sc = Scenario(n=6, seed=4, horizon=9, sleep=[(1, 3, 10), (2, 5, None), (3, 0, 7)], corruptions={5: 8})
    assert participation_from_schedule(sc) == participation_sets(run(sc).trace)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_hierarchy_tau(seed):
    sets, _, _ = random_sets(random.Random(seed))
    verdicts = {tau: check_tau_sleepiness(sets, tau).compliant for tau in (1, 2, 3, 5, INFINITY)}
    order = [INFINITY, 5, 3, 2, 1]
    for i, hi in enumerate(order):
        for lo in order[i + 1:]:
            assert not verdicts[hi] or verdicts[lo]


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_hierarchy_pi(seed):
    rng = random.Random(seed)
    sets, H, _ = random_sets(rng, horizon=12)
    t1 = rng.randint(0, 5)
    for tpa_len in (2, 3):
        tpa = (t1, t1 + tpa_len)
        ok = {pi: check_tau_pi_compliance(sets, INFINITY, pi, tpa).compliant for pi in (2, 3, 4, INFINITY)}
        pis = [2, 3, 4, INFINITY]
        for i, small in enumerate(pis):
            for big in pis[i + 1:]:
                assert not ok[small] or ok[big]


def test_check_scenario_defaults_tau_to_eta():
    sc = Scenario(n=3, seed=0, eta=2, horizon=4)
    assert check_scenario(sc).params["tau"] == 2
