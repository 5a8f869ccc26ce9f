"""Acceptance criteria, one test (or group) per criterion.

Each criterion records its outcome in ``conftest.ACCEPTANCE``; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import math
import random
import time
from collections import Counter

import pytest

import oracles
from conftest import ACCEPTANCE, materialize
from rlmdsim.adversary import build_attack_scenario, build_random_compliant
from rlmdsim.compliance import (
    check_scenario, check_tau_pi_compliance, check_tau_sleepiness, participation_from_schedule,
    participation_sets,
)
from rlmdsim.core import GENESIS, Block, merge_round, slot_of, vote_round
from rlmdsim.forkchoice import (
    GHOST, GHOST_EPH, INFINITY, LMD_GHOST, ForkChoiceKind, filtered_view, fork_choice, fork_choice_composed,
    subtree_weight,
)
from rlmdsim.netsim import run
from rlmdsim.properties import FAIL, PASS, check_all, check_fast_confirm_properties, check_view_merge
from rlmdsim.scenario import Scenario
from rlmdsim.validator import fast_quorum


def record(num, ok, detail=""):
    prev = ACCEPTANCE.get(num)
    if prev is not None:
        ok = ok and prev[0]
        detail = "; ".join(x for x in (prev[1], detail) if x)
    ACCEPTANCE[num] = (ok, detail)


def violations(results):
    return {k: v for k, v in results.items() if v}


# ---------------------------------------------------------------- 1, 2: fork choice

KINDS = [GHOST, LMD_GHOST, GHOST_EPH] + [ForkChoiceKind.rlmd(e) for e in (1, 2, 3, 5, INFINITY)]


def test_criterion_01_oracle_equivalence():
    rng = random.Random(20240101)
    start = time.perf_counter()
    mismatches = 0
    count = 10_000
    for _ in range(count):
        blocks, votes, n, t = oracles.random_view(rng, max_blocks=8, max_votes=12, max_n=6)
        view, ob, ov = materialize(blocks, votes)
        pins = [rng.choice(sorted(ob))] if rng.random() < 0.3 else ()
        for kind in KINDS:
            eta = None if kind.eta is INFINITY else kind.eta
            want = oracles.fork_choice(kind.name, eta, ob, ov, t, GENESIS.id, pins)
            if fork_choice(kind, view, t, pins) != want or fork_choice_composed(kind, view, t, pins) != want:
                mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 30
    record(1, ok, f"{count} views x {len(KINDS)} kinds, {mismatches} mismatches, {elapsed:.1f}s")
    assert mismatches == 0
    assert elapsed < 30


def test_criterion_02_reduction_identities():
    rng = random.Random(7)
    start = time.perf_counter()
    bad = 0
    for _ in range(2000):
        blocks, votes, n, t = oracles.random_view(rng, max_blocks=10, max_votes=20, max_n=8)
        view, _, _ = materialize(blocks, votes)
        if fork_choice(ForkChoiceKind.rlmd(1), view, t) != fork_choice(GHOST_EPH, view, t):
            bad += 1
        if fork_choice(ForkChoiceKind.rlmd(INFINITY), view, t) != fork_choice(LMD_GHOST, view, t):
            bad += 1
        # the filtered views coincide too, not just the heads
        if filtered_view(ForkChoiceKind.rlmd(1), view, t).votes != filtered_view(GHOST_EPH, view, t).votes:
            bad += 1
        if filtered_view(ForkChoiceKind.rlmd(INFINITY), view, t).votes != filtered_view(LMD_GHOST, view, t).votes:
            bad += 1
    elapsed = time.perf_counter() - start
    record(2, bad == 0 and elapsed < 10, f"2000 inputs, {bad} mismatches, {elapsed:.1f}s")
    assert bad == 0 and elapsed < 10


# ---------------------------------------------------------------- 3, 4, 5: randomized positive results

def _trial_n(seed):
    return random.Random(f"n:{seed}").randint(4, 10)


def test_criterion_03_view_merge():
    start = time.perf_counter()
    failures, pivots = [], 0
    for seed in range(200):
        sc = build_random_compliant(n=_trial_n(seed), eta=2, seed=seed, horizon=50, kappa=5)
        assert check_scenario(sc).compliant
        v = check_view_merge(run(sc).trace)
        pivots += v.detail.get("pivot_slots", 0)
        if v.status == FAIL:
            failures.append((seed, v.witness))
    elapsed = time.perf_counter() - start
    ok = not failures and pivots > 0 and elapsed < 60
    record(3, ok, f"200 runs, {pivots} pivot slots checked, {len(failures)} failures, {elapsed:.1f}s")
    assert not failures, failures[:3]
    assert pivots > 0 and elapsed < 60


def _positive_suite(eta, runs, **kw):
    bad = Counter()
    first = {}
    checked = Counter()
    for seed in range(runs):
        sc = build_random_compliant(n=_trial_n(seed), eta=eta, seed=seed, **kw)
        assert check_scenario(sc).compliant
        res = check_all(run(sc).trace, t_conf=2 * sc.kappa)
        for name, v in res.items():
            if v.status == PASS:
                checked[name] += 1
            if v.status == FAIL:
                bad[name] += 1
                first.setdefault(name, (seed, v.witness))
    return bad, first, checked


def test_criterion_04_reorg_resilience_and_security():
    start = time.perf_counter()
    details, ok = [], True
    for eta in (1, 2, 4):
        bad, first, checked = _positive_suite(eta, 200, horizon=60, kappa=5)
        wanted = ("reorg_resilience", "safety", "liveness")
        n_bad = {k: bad[k] for k in wanted}
        ok = ok and not any(n_bad.values()) and all(checked[k] == 200 for k in wanted)
        details.append(f"eta={eta}: " + ",".join(f"{k}={v}" for k, v in n_bad.items()))
        assert not any(n_bad.values()), (eta, first)
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 300
    record(4, ok, "; ".join(details) + f" violations, {elapsed:.1f}s")
    assert elapsed < 300


def test_criterion_05_asynchrony_resilience():
    start = time.perf_counter()
    details, ok = [], True
    for eta in (3, 4):
        bad, first, checked = _positive_suite(eta, 200, horizon=40, kappa=5, tau=eta, pi=eta - 1,
                                              tpa_len=eta - 1)
        ok = ok and bad["asynchrony_resilience"] == 0 and checked["asynchrony_resilience"] > 0
        details.append(f"eta={eta}: {bad['asynchrony_resilience']} violations "
                       f"({checked['asynchrony_resilience']} substantive)")
        assert bad["asynchrony_resilience"] == 0, first.get("asynchrony_resilience")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 300
    record(5, ok, "; ".join(details) + f", {elapsed:.1f}s")
    assert elapsed < 300


# ---------------------------------------------------------------- 6: LMD-GHOST bait and switch

@pytest.fixture(scope="module")
def bait():
    sc = build_attack_scenario("lmd_bait_and_switch", m=2, tau=3, kappa=3)
    ex = run(sc)
    return sc, ex, check_scenario(sc, participation_sets(ex.trace))


def test_criterion_06_bait_and_switch_safety(bait):
    sc, ex, rep = bait
    p = sc.strategy_params
    t, tau, m = p["t"], 3, p["m"]
    assert sc.n == 5 and p["N"] == 4 * tau
    for s in range(t + 2, t + tau + 1):
        row = rep.row(s, "sleepiness")
        assert (row["lhs"], row["rhs"], row["pass"]) == (m + 1, m, True)
    for s in range(1, t + 2):
        assert rep.row(s, "sleepiness")["lhs"] == 2 * m
    safety = check_all(ex.trace)["safety"]
    assert safety.status == FAIL
    a = Block.create(p["parent"], t - 1, 0, b"A").id
    b = Block.create(p["parent"], t, 0, b"B").id
    blocks = ex.blocks
    first, second = safety.witness["first"], safety.witness["second"]

    def on_branch(bid, root):
        while bid is not None:
            if bid == root:
                return True
            bid = blocks[bid].parent
        return False

    assert on_branch(first["confirmed"], a) and on_branch(second["confirmed"], b)
    assert first["round"] < second["round"]
    record(6, True, "safety: A-branch confirmed then B-branch; |H|=3 > 2 on [t+2, t+tau]")


@pytest.mark.xfail(strict=True, reason="with m = 2 the post-corruption slots give |H_{s-1}| = 2 = |A_s|")
def test_criterion_06_bait_and_switch_compliant_every_slot(bait):
    _, _, rep = bait
    first = rep.first_violation
    if first is not None:
        row = next(r for r in rep.rows if not r["pass"])
        record(6, False, f"not tau-compliant from slot {first}: lhs {row['lhs']} vs rhs {row['rhs']}")
    assert rep.compliant


def test_criterion_06_compliant_with_larger_m():
    sc = build_attack_scenario("lmd_bait_and_switch", m=3, tau=3, kappa=3)
    ex = run(sc)
    assert check_scenario(sc, participation_sets(ex.trace)).compliant
    assert check_all(ex.trace)["safety"].status == FAIL


# ---------------------------------------------------------------- 7: stale votes reorg

def test_criterion_07_stale_votes_reorg():
    sc = build_attack_scenario("rlmd_stale_votes", m=3, eta=3, tau=2)
    ex = run(sc)
    rep = check_scenario(sc, participation_sets(ex.trace))
    assert sc.n == 7 and rep.compliant
    v = check_all(ex.trace)["reorg_resilience"]
    assert v.status == FAIL and v.witness["block"] == sc.strategy_params["witness"]
    p = sc.strategy_params
    t, eta, m = p["t"], p["eta"], p["m"]
    a = Block.create(p["parent"], t - 1, 0, b"A").id
    b = Block.create(p["parent"], t, 0, b"B").id
    s = t + eta
    honest_v2 = [u for u in p["V2"] if u not in p["late"]]
    weights = set()
    for u in honest_v2:
        view = ex.states[u].view
        weights.add((subtree_weight(sc.fc_kind, view, s, b), subtree_weight(sc.fc_kind, view, s, a)))
    assert weights == {(m, m - 1)}
    record(7, True, f"compliant; reorg witness C; weights B={m} vs A-branch={m - 1}")


def test_criterion_07_longer_horizon_needs_more_validators():
    short = build_attack_scenario("rlmd_stale_votes", m=3, extra_slots=1)
    assert not check_scenario(short).compliant
    big = build_attack_scenario("rlmd_stale_votes", m=5, extra_slots=2)
    assert check_scenario(big).compliant
    assert check_all(run(big).trace)["reorg_resilience"].status == FAIL


# ---------------------------------------------------------------- 8: reorg cycles

@pytest.mark.parametrize("kappa", [1, 2])
def test_criterion_08_da_cycle(kappa):
    sc = build_attack_scenario("rlmd_da_cycle", n=9, eta=3, tau=2, kappa=kappa)
    p = sc.strategy_params
    assert p["k"] == 1 and p["tconf_bound"] == 3 and kappa < 3
    ex = run(sc)
    assert check_scenario(sc, participation_sets(ex.trace), tau=2).compliant
    res = check_all(ex.trace, t_conf=kappa)
    assert res["safety_or_liveness"].status == FAIL
    reorg = p["cycles"][0]["reorg_slot"]
    if res["safety"].status == FAIL:
        when = slot_of(res["safety"].witness["second"]["round"], sc.delta)
    else:
        when = slot_of(res["liveness"].witness["round"], sc.delta)
    assert when <= reorg + p["tconf_bound"]
    record(8, True, f"kappa={kappa}: safety={res['safety'].status} liveness={res['liveness'].status} "
                    f"at slot {when} (first reorg {reorg})")


# ---------------------------------------------------------------- 9, 10: asynchrony attacks

def test_criterion_09_async_wakeup():
    sc = build_attack_scenario("rlmd_async_wakeup", eta=2)
    ex = run(sc)
    t1, t2 = sc.tpa
    assert sc.n == 3 and t2 - t1 == 2 and sc.pins
    rep = check_tau_pi_compliance(participation_sets(ex.trace), INFINITY, 2, sc.tpa)
    assert rep.compliant
    v = check_all(ex.trace)["asynchrony_resilience"]
    assert v.status == FAIL
    b = sc.strategy_params["witness"]
    assert ex.blocks[b].parent == GENESIS.id
    for u, st in ex.states.items():
        assert b in st.view.tree.ancestors(st.canonical), u
    record(9, True, "(inf, eta)-compliant; B on genesis canonical for all three validators")


def test_criterion_10_goldfish_one_slot():
    sc = build_attack_scenario("goldfish_one_slot_async")
    ex = run(sc)
    assert sc.fc_kind == GHOST_EPH and len(ex.corrupted) == 1
    sets = participation_sets(ex.trace)
    assert all(sets.h(s) == frozenset(range(1, sc.n)) for s in range(sc.horizon))
    t1, t2 = sc.tpa
    assert t2 - t1 - 1 == 1                          # one asynchronous slot
    assert check_tau_pi_compliance(sets, INFINITY, 2, sc.tpa).compliant
    res = check_all(ex.trace)
    assert res["asynchrony_resilience"].status == FAIL
    # every non-genesis confirmation made before the asynchronous slot is off the final chains
    before = vote_round(t1 + 1, sc.delta)
    confirmed = {r["confirmed"] for r in ex.trace.of_kind("state_snapshot")
                 if r["round"] < before and r["confirmed"] != GENESIS.id}
    assert confirmed
    for st in ex.states.values():
        if st.id in ex.corrupted:
            continue
        chain = set(st.view.tree.ancestors(st.canonical))
        assert not confirmed & chain
    record(10, True, f"(inf, 2)-compliant; {len(confirmed)} prior confirmations reorged")


# ---------------------------------------------------------------- 11: fast confirmations

def test_criterion_11a_fast_confirm_same_slot():
    sc = Scenario(n=6, seed=1, delta=2, latency=1, horizon=12, kappa=3, variant="fast_confirm")
    ex = run(sc)
    fast = {(r["round"], r["actor"]): r["block"] for r in ex.trace.of_kind("fast_confirm")}
    for p in ex.trace.of_kind("propose"):
        s = p["slot"]
        for v in range(sc.n):
            assert fast.get((vote_round(s, sc.delta), v)) == p["block"]["id"], (s, v)
    assert check_fast_confirm_properties(ex.trace).detail["sub"]["c"] == PASS
    record(11, True, "(a) every proposal fast-confirmed by all at its vote round")


def test_criterion_11b_fast_confirm_reorg_resilience():
    start = time.perf_counter()
    failures, substantive, equivocating = [], 0, 0
    for seed in range(100):
        n = _trial_n(seed)
        sc = build_random_compliant(n=n, eta=2, seed=seed, horizon=30, kappa=4, variant="fast_confirm",
                                    max_equivocators=math.ceil(n / 3) - 1)
        assert check_scenario(sc).compliant
        v = check_fast_confirm_properties(run(sc).trace)
        assert 3 * len(v.detail["equivocators"]) < n
        equivocating += bool(v.detail["equivocators"])
        if v.detail["sub"]["a"] == FAIL or v.detail["sub"]["b"] == FAIL:
            failures.append((seed, v.witness))
        substantive += v.detail["sub"]["a"] == PASS
    elapsed = time.perf_counter() - start
    ok = not failures and substantive > 0 and elapsed < 180
    record(11, ok, f"(b) 100 runs ({equivocating} with equivocators), {len(failures)} failures, {elapsed:.1f}s")
    assert not failures, failures[:3]
    assert elapsed < 180


def test_criterion_11c_quorum_boundary():
    fired = 0
    for n in (3, 4, 6, 7, 9):
        active = fast_quorum(n) - 1
        sleepers = [(v, 0, None) for v in range(active, n)]
        sc = Scenario(n=n, seed=n, delta=2, latency=1, horizon=8, kappa=2, variant="fast_confirm",
                      sleep=sleepers, proposers={s: s % active for s in range(8)})
        fired += len(run(sc).trace.of_kind("fast_confirm"))
    record(11, fired == 0, f"(c) {fired} fast confirmations at ceil(2n/3)-1 participants")
    assert fired == 0


# ---------------------------------------------------------------- 12: compliance hierarchy

def _random_schedule(rng):
    n = rng.randint(2, 9)
    horizon = rng.randint(4, 16)
    rounds = 3 * horizon
    sleep = []
    for v in range(n):
        for _ in range(rng.randint(0, 2)):
            a = rng.randrange(rounds)
            b = a + rng.randint(1, 12)
            sleep.append((v, a, None if b >= rounds else b))
    corruptions = {v: rng.randrange(rounds) for v in rng.sample(range(n), rng.randint(0, n // 2))}
    return Scenario(n=n, seed=0, horizon=horizon, sleep=sleep, corruptions=corruptions)


def test_criterion_12_compliance_hierarchy():
    rng = random.Random(99)
    start = time.perf_counter()
    bad, nontrivial = 0, 0
    taus = [1, 2, 3, 4, 6, INFINITY]
    pis = [2, 3, 4, 5, INFINITY]
    for _ in range(500):
        sets = participation_from_schedule(_random_schedule(rng))
        ok_tau = {tau: check_tau_sleepiness(sets, tau).compliant for tau in taus}
        nontrivial += len(set(ok_tau.values())) > 1
        for i, hi in enumerate(taus):
            for lo in taus[:i]:
                bad += ok_tau[hi] and not ok_tau[lo]
        t1 = rng.randint(0, max(0, sets.horizon - 4))
        tpa = (t1, min(t1 + rng.randint(2, 4), sets.horizon))
        for tau in (INFINITY, 6):
            allowed = [p for p in pis if tau is INFINITY or (p is not INFINITY and tau > p)]
            ok_pi = {p: check_tau_pi_compliance(sets, tau, p, tpa).compliant for p in allowed}
            for i, p1 in enumerate(allowed):
                for p2 in allowed[i + 1:]:
                    bad += ok_pi[p1] and not ok_pi[p2]
    elapsed = time.perf_counter() - start
    ok = bad == 0 and nontrivial > 0 and elapsed < 60
    record(12, ok, f"500 schedules, {nontrivial} discriminating, {bad} violations, {elapsed:.1f}s")
    assert bad == 0 and nontrivial > 0 and elapsed < 60


# ---------------------------------------------------------------- 13: determinism

def test_criterion_13_determinism(tmp_path):
    from rlmdsim.cli import main

    scenarios = [build_attack_scenario(name) for name in
                 ("lmd_bait_and_switch", "rlmd_stale_votes", "rlmd_da_cycle", "rlmd_async_wakeup",
                  "goldfish_one_slot_async")]
    scenarios += [build_random_compliant(n=7, eta=2, seed=s, horizon=25) for s in range(3)]
    for sc in scenarios:
        assert run(sc).trace.dumps() == run(sc).trace.dumps(), sc.name
    path = tmp_path / "s.json"
    path.write_text(scenarios[-1].dumps())
    for out in ("a", "b"):
        main(["run", str(path), "--out", str(tmp_path / out)])
    same = (tmp_path / "a" / "trace.ndjson").read_bytes() == (tmp_path / "b" / "trace.ndjson").read_bytes()
    record(13, same, f"{len(scenarios)} scenarios in-process plus CLI file output byte-identical")
    assert same
