"""Adversary strategies and the builders that turn attack parameters into scenarios.

Scripted strategies are plain round-indexed scripts: every block, vote and
delivery round they use is a pure function of the scenario's
``strategy_params``, so a scenario file alone reproduces an attack.
"""

from __future__ import annotations

import random
from typing import Optional

from .core import GENESIS, Block, Proposal, View, Vote, merge_round, propose_round, slot_of, vote_round
from .forkchoice import GHOST_EPH, INFINITY, LMD_GHOST, ForkChoiceKind, parse_eta
from .scenario import Scenario, ScenarioError

STRATEGIES = ("null", "lmd_bait_and_switch", "rlmd_stale_votes", "rlmd_da_cycle",
              "rlmd_async_wakeup", "goldfish_one_slot_async", "random_compliant")


class AttackParamError(ScenarioError):
    """Attack parameters violate the hypotheses of the construction."""


def _need(cond: bool, msg: str) -> None:
    if not cond:
        raise AttackParamError(msg)


# ---------------------------------------------------------------- strategy base

class Strategy:
    name = "null"

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.params = dict(scenario.strategy_params)
        self.rng = random.Random(f"adv:{scenario.seed}")

    def setup(self, sim) -> None:
        pass

    def step(self, sim, rnd: int) -> None:
        pass

    def delay(self, sim, msg, sender, recipient, rnd, lo, hi, default) -> Optional[int]:
        """Delivery round for an honest message; None keeps the default."""
        return None

    def on_corrupt(self, sim, v: int) -> None:
        pass

    # helpers
    @staticmethod
    def to_all(sim, rnd: int, exclude=()) -> dict:
        return {u: rnd for u in sim.honest() if u not in exclude}


class NullStrategy(Strategy):
    name = "null"


def honest_prefix(proposers: dict, t: int) -> str:
    """Tip of the chain built by the honest proposers of slots 0 .. t-2."""
    tip = GENESIS.id
    for s in range(t - 1):
        tip = Block.create(tip, s, proposers[s]).id
    return tip


def _split_blocks(t: int, parent: str):
    a = Block.create(parent, t - 1, 0, b"A")
    b = Block.create(parent, t, 0, b"B")
    return a, b


def _split_step(sim, rnd, t, a, b, left, right):
    """Deliver Proposal(A) only to ``left`` and Proposal(B) only to ``right``."""
    d = sim.delta
    if rnd != vote_round(t, d):
        return
    base = list(sim.knowledge.blocks.values())
    sim.inject(Proposal(a, View(base + [a]), t, 0), {u: rnd for u in left})
    sim.inject(Proposal(b, View(base + [b]), t, 0), {u: rnd for u in right})
    sim.inject(b, {u: rnd + 1 for u in left})
    sim.inject(a, {u: rnd + 1 for u in right})


# ---------------------------------------------------------------- LMD-GHOST, not dynamically available

class LmdBaitAndSwitch(Strategy):
    name = "lmd_bait_and_switch"

    def setup(self, sim):
        p = self.params
        self.t, self.N = p["t"], p["N"]
        self.V2, self.V3 = p["V2"], p["V3"]
        self.turncoat = p["turncoat"]
        self.A, self.B = _split_blocks(self.t, p["parent"])

    def step(self, sim, rnd):
        _split_step(sim, rnd, self.t, self.A, self.B, self.V2, self.V3)
        s = slot_of(rnd, sim.delta)
        if s >= self.t + self.N and rnd == vote_round(s, sim.delta):
            for v in (0, self.turncoat):
                sim.inject(Vote(self.B.id, s, v), self.to_all(sim, rnd))


def build_lmd_bait_and_switch(m: int = 2, tau: int = 3, kappa: Optional[int] = None, N: Optional[int] = None,
                              t: int = 2, delta: int = 1, seed: int = 0) -> Scenario:
    tau = parse_eta(tau)
    _need(m >= 2, "m >= 2 is required (n = 2m + 1 with |V3| = m - 1 >= 1)")
    _need(tau is not INFINITY and tau >= 1, "tau must be finite and >= 1")
    kappa = tau if kappa is None else kappa
    N = 4 * tau if N is None else N
    _need(1 <= kappa <= tau, "the construction fixes tau >= T_conf = kappa >= 1")
    _need(N > tau + 1, "N > tau + 1 is required")
    _need(t >= 2, "t >= 2 (slots t-1 and t are adversarial)")
    n = 2 * m + 1
    V2 = list(range(1, m + 2))
    V3 = list(range(m + 2, n))
    turncoat = V2[0]
    loyal = V2[1:]
    horizon = t + N + kappa + 4
    proposers = {s: V2[0] for s in range(t - 1)}
    proposers.update({t - 1: 0, t: 0})
    for i, s in enumerate(range(t + 1, horizon)):
        proposers[s] = loyal[i % len(loyal)]
    return Scenario(
        n=n, seed=seed, delta=delta, eta=INFINITY, tau=tau, kappa=kappa, horizon=horizon,
        fc_kind=LMD_GHOST, proposer_mode="explicit", proposers=proposers,
        sleep=[(v, vote_round(t, delta) + 1, None) for v in V3],
        corruptions={0: 0, turncoat: propose_round(t + N, delta)},
        strategy="lmd_bait_and_switch",
        strategy_params={"m": m, "t": t, "N": N, "V2": V2, "V3": V3, "turncoat": turncoat,
                         "parent": honest_prefix(proposers, t)},
        name=f"lmd_bait_and_switch(m={m}, tau={tau}, N={N})",
        expected={"compliant": True, "properties": {"safety": "fail"}},
    ).validate()


# ---------------------------------------------------------------- RLMD-GHOST, not tau-reorg-resilient for tau < eta

class RlmdStaleVotes(Strategy):
    name = "rlmd_stale_votes"

    def setup(self, sim):
        p = self.params
        self.t, self.eta = p["t"], p["eta"]
        self.V2, self.V3, self.late = p["V2"], p["V3"], p["late"]
        self.A, self.B = _split_blocks(self.t, p["parent"])

    def step(self, sim, rnd):
        d = sim.delta
        _split_step(sim, rnd, self.t, self.A, self.B, self.V2, self.V3)
        s = self.t + self.eta - 1
        if rnd == vote_round(s, d):
            sim.inject(Vote(self.B.id, s, 0), self.to_all(sim, rnd))
        if rnd == merge_round(s, d):
            for v in self.late:
                sim.inject(Vote(self.B.id, s, v), self.to_all(sim, rnd))
        cur = slot_of(rnd, d)
        if cur > s and rnd == vote_round(cur, d):
            for v in [0, *self.late]:
                sim.inject(Vote(self.B.id, cur, v), self.to_all(sim, rnd))


def build_rlmd_stale_votes(m: int = 3, eta: int = 3, tau: int = 2, kappa: int = 1, t: int = 2,
                           delta: int = 1, seed: int = 0, extra_slots: int = 0) -> Scenario:
    eta, tau = parse_eta(eta), parse_eta(tau)
    _need(eta is not INFINITY and eta >= 2, "finite eta >= 2 is required")
    _need(tau is not INFINITY and 1 <= tau < eta, "1 <= tau < eta is required")
    _need(m >= 3, "m >= 3 is required (two corruptions inside V2 plus a remaining proposer)")
    _need(t >= 2, "t >= 2 (slots t-1 and t are adversarial)")
    n = 2 * m + 1
    V2 = list(range(1, m + 2))
    V3 = list(range(m + 2, n))
    late = [2, 3]
    keep = [v for v in V2 if v not in late]
    horizon = t + eta + 1 + extra_slots
    proposers = {s: 1 for s in range(t - 1)}
    proposers.update({t - 1: 0, t: 0, t + 1: 1})
    others = [v for v in keep if v != 1] or [1]
    for i, s in enumerate(range(t + 2, t + eta)):
        proposers[s] = others[i % len(others)]
    for i, s in enumerate(range(t + eta, horizon)):
        proposers[s] = keep[i % len(keep)]
    parent = honest_prefix(proposers, t)
    C = Block.create(_split_blocks(t, parent)[0].id, t + 1, 1)
    return Scenario(
        n=n, seed=seed, delta=delta, eta=eta, tau=tau, kappa=kappa, horizon=horizon,
        proposer_mode="explicit", proposers=proposers,
        sleep=[(v, vote_round(t, delta) + 1, None) for v in V3],
        corruptions={0: 0, **{v: merge_round(t + eta - 1, delta) for v in late}},
        strategy="rlmd_stale_votes",
        strategy_params={"m": m, "t": t, "eta": eta, "V2": V2, "V3": V3, "late": late, "witness": C.id,
                         "parent": parent},
        name=f"rlmd_stale_votes(m={m}, eta={eta}, tau={tau})",
        expected={"compliant": True, "properties": {"reorg_resilience": "fail"}},
    ).validate()


# ---------------------------------------------------------------- RLMD-GHOST, reorg cycles

class RlmdDaCycle(Strategy):
    name = "rlmd_da_cycle"

    def setup(self, sim):
        p = self.params
        self.t, self.eta = p["t"], p["eta"]
        self.cycles = p["cycles"]
        self.A, self.B = _split_blocks(self.t, p["parent"])
        self.branch = {"A": self.A.id, "B": self.B.id}

    def _current(self, s: int) -> Optional[str]:
        """Branch the adversary backs with broadcast votes at slot s."""
        side = None
        for c in self.cycles:
            if s >= c["reorg_slot"]:
                side = c["x"]
        return side

    def step(self, sim, rnd):
        d = sim.delta
        p = self.params
        _split_step(sim, rnd, self.t, self.A, self.B, p["A0"], p["S0"])
        s = slot_of(rnd, d)
        for c in self.cycles:
            if rnd == merge_round(c["reorg_slot"] - 1, d):
                for v in c["voters"]:
                    sim.inject(Vote(self.branch[c["x"]], c["reorg_slot"] - 1, v),
                               {u: rnd for u in c["targets"] if u in sim.honest()})
        side = self._current(s)
        if side is not None and rnd == vote_round(s, d):
            if any(s == c["reorg_slot"] - 1 for c in self.cycles):
                return
            for v in sorted(sim.corrupted):
                sim.inject(Vote(self.branch[side], s, v), self.to_all(sim, rnd))


def build_rlmd_da_cycle(n: int = 9, eta: int = 3, tau: int = 2, kappa: int = 1, k: Optional[int] = None,
                        t: int = 2, delta: int = 1, seed: int = 0, tail: int = 3) -> Scenario:
    eta, tau = parse_eta(eta), parse_eta(tau)
    _need(n % 2 == 1 and n >= 9, "n = 2m + 1 with m >= 4 is required")
    _need(eta is not INFINITY and eta >= 2, "finite eta >= 2 is required")
    _need(tau is not INFINITY and 1 <= tau < eta, "1 <= tau < eta is required")
    m = (n - 1) // 2
    kmax = (m - 2) // 2
    k = kmax if k is None else k
    _need(1 <= k <= kmax, f"k must lie in [1, floor((m-2)/2)] = [1, {kmax}]")
    _need(t >= 2, "t >= 2 (slots t-1 and t are adversarial)")
    A0 = list(range(1, m + 3))
    S0 = list(range(m + 3, n))
    sleep, corruptions = [], {0: 0}
    for v in S0:
        pass
    active = list(A0)
    asleep = list(S0)
    adv = [0]
    cycles = []
    sleep_from = {v: vote_round(t, delta) + 1 for v in S0}
    x = "B"
    for j in range(1, k + 1):
        base = t + (j - 1) * eta
        reorg = base + eta
        fresh = [v for v in active if v not in (1,)][:2]
        for v in fresh:
            corruptions[v] = vote_round(reorg - 2, delta) + 1
        adv = adv + fresh
        remaining = [v for v in active if v not in fresh]
        wake = merge_round(reorg - 1, delta)
        for v in asleep:
            sleep.append((v, sleep_from[v], wake))
        cycles.append({"reorg_slot": reorg, "x": x, "voters": list(adv), "targets": remaining})
        keep, nxt = asleep[:2], asleep[2:]
        for v in nxt:
            sleep_from[v] = vote_round(reorg, delta) + 1
        active = remaining + keep
        asleep = nxt
        x = "A" if x == "B" else "B"
    for v in asleep:
        sleep.append((v, sleep_from[v], None))
    horizon = t + k * eta + 1 + max(tail, kappa + 2)
    # proposers: adversarial at t-1, t and every reorg slot, else the smallest
    # honest validator active at the proposal round
    from .compliance import participation_from_schedule
    probe = Scenario(n=n, seed=seed, delta=delta, eta=eta, horizon=horizon,
                     sleep=sleep, corruptions=corruptions)
    sets = participation_from_schedule(probe)
    adversarial_slots = {t - 1, t} | {c["reorg_slot"] for c in cycles}
    proposers = {}
    for s in range(horizon):
        if s in adversarial_slots:
            proposers[s] = 0
        else:
            act = sorted(sets.active[propose_round(s, delta)])
            proposers[s] = act[0] if act else 0
    return Scenario(
        n=n, seed=seed, delta=delta, eta=eta, tau=tau, kappa=kappa, horizon=horizon,
        proposer_mode="explicit", proposers=proposers, sleep=sleep, corruptions=corruptions,
        strategy="rlmd_da_cycle", t_conf=kappa,
        strategy_params={"m": m, "t": t, "eta": eta, "k": k, "A0": A0, "S0": S0, "cycles": cycles,
                         "parent": honest_prefix(proposers, t), "tconf_bound": ((n - 5) // 4) * eta},
        name=f"rlmd_da_cycle(n={n}, eta={eta}, k={k})",
        expected={"compliant": True, "properties": {"safety_or_liveness": "fail"}},
    ).validate()


# ---------------------------------------------------------------- RLMD-GHOST, waking up during asynchrony

class RlmdAsyncWakeup(Strategy):
    name = "rlmd_async_wakeup"

    def delay(self, sim, msg, sender, recipient, rnd, lo, hi, default):
        # messages queued for the late joiner are held until the end of the TPA
        if recipient == self.params["joiner"] and rnd == self.params["joiner_wake"]:
            return hi
        return None


def build_rlmd_async_wakeup(eta: int = 2, t: int = 2, kappa: int = 1, delta: int = 1, seed: int = 0,
                            tail: int = 2) -> Scenario:
    eta = parse_eta(eta)
    _need(eta is not INFINITY and eta >= 2, "finite eta >= 2 is required (the TPA must be non-empty)")
    _need(t >= 1, "t >= 1")
    t2 = t + eta
    joiner_wake = merge_round(t2 - 1, delta)
    sleep = [(2, 0, joiner_wake), (0, merge_round(t, delta) + 1, merge_round(t2, delta))]
    horizon = t2 + 1 + tail
    proposers = {}
    for s in range(horizon):
        if s == t2:
            proposers[s] = 2
        elif s <= t:
            proposers[s] = s % 2
        else:
            proposers[s] = 1
    B = Block.create(GENESIS.id, t2, 2)
    return Scenario(
        n=3, seed=seed, delta=delta, eta=eta, tau=INFINITY, pi=eta, kappa=kappa, horizon=horizon,
        proposer_mode="explicit", proposers=proposers, sleep=sleep, tpa=(t, t2),
        strategy="rlmd_async_wakeup", pins=(B.id,),
        strategy_params={"t": t, "eta": eta, "joiner": 2, "joiner_wake": joiner_wake, "witness": B.id},
        name=f"rlmd_async_wakeup(eta={eta})",
        expected={"compliant": True, "properties": {"asynchrony_resilience": "fail"}},
    ).validate()


# ---------------------------------------------------------------- Goldfish, one asynchronous slot

class GoldfishOneSlotAsync(Strategy):
    name = "goldfish_one_slot_async"

    def setup(self, sim):
        t = self.params["t"]
        self.t = t
        self.A = Block.create(GENESIS.id, self.params["withheld_slot"], 0, b"A")
        self.B = Block.create(self.A.id, t + 1, 0, b"B")

    def delay(self, sim, msg, sender, recipient, rnd, lo, hi, default):
        if isinstance(msg, Vote) and msg.slot == self.t and rnd == vote_round(self.t, sim.delta):
            return propose_round(self.t + 1, sim.delta)
        return None

    def step(self, sim, rnd):
        if rnd == propose_round(self.t + 1, sim.delta):
            vote = Vote(self.A.id, self.t, 0)
            view = View([GENESIS, self.A, self.B], [vote])
            everyone = self.to_all(sim, rnd)
            sim.inject(Proposal(self.B, view, self.t + 1, 0), everyone)
            sim.inject(self.A, everyone)
            sim.inject(self.B, everyone)
            sim.inject(vote, everyone)


def build_goldfish_one_slot_async(n: int = 4, kappa: int = 2, t: int = 4, pi: int = 2, delta: int = 1,
                                  seed: int = 0, tail: int = 3) -> Scenario:
    pi = parse_eta(pi)
    _need(pi is INFINITY or pi >= 2, "pi >= 2 is required (a 1-TPA is empty)")
    _need(n >= 4, "n >= 4 is required (one adversarial validator, honest majority)")
    _need(t >= 2, "t >= 2 (slot 1 holds the withheld block)")
    horizon = t + 2 + tail
    honest = list(range(1, n))
    proposers = {}
    for s in range(horizon):
        proposers[s] = 0 if s in (1, t + 1) else honest[s % len(honest)]
    A = Block.create(GENESIS.id, 1, 0, b"A")
    return Scenario(
        n=n, seed=seed, delta=delta, eta=1, tau=INFINITY, pi=pi, kappa=kappa, horizon=horizon,
        fc_kind=GHOST_EPH, proposer_mode="explicit", proposers=proposers, corruptions={0: 0},
        tpa=(t - 1, t + 1), strategy="goldfish_one_slot_async", pins=(A.id,),
        strategy_params={"t": t, "withheld_slot": 1, "witness": A.id},
        name=f"goldfish_one_slot_async(n={n})",
        expected={"compliant": True, "properties": {"asynchrony_resilience": "fail"}},
    ).validate()


# ---------------------------------------------------------------- random compliant adversary

class RandomCompliant(Strategy):
    """Random byzantine behaviour on top of a pre-sampled compliant schedule."""

    name = "random_compliant"

    def setup(self, sim):
        p = self.params
        self.vote_prob = p.get("vote_prob", 0.7)
        self.equivocators = set(p.get("equivocators", []))
        self.propose_prob = p.get("propose_prob", 0.8)
        self.delay_mode = p.get("delay_mode", "random")
        self.late_prob = p.get("late_prob", 0.3)
        self.voted = set()

    def _blocks_upto(self, sim, s: int) -> list:
        return sorted(b for b, blk in sim.knowledge.blocks.items() if blk.slot <= s or blk.is_genesis)

    def _deliveries(self, sim, rnd: int, latest: int) -> dict:
        out = {}
        for u in sim.honest():
            if self.rng.random() < 0.15:
                continue
            out[u] = self.rng.randint(rnd, max(rnd, latest))
        return out

    def step(self, sim, rnd):
        d = sim.delta
        s = slot_of(rnd, d)
        adv = sorted(sim.corrupted)
        if not adv:
            return
        if rnd == propose_round(s, d) and sim.proposer_of(s) in sim.corrupted and self.rng.random() < self.propose_prob:
            p = sim.proposer_of(s)
            twice = p in self.equivocators and self.rng.random() < 0.3
            for k in range(1 + twice):
                parent = sim.knowledge.blocks[self.rng.choice(self._blocks_upto(sim, s - 1))]
                blk = Block.create(parent.id, s, p, f"adv{k}".encode())
                view = sim.knowledge.copy()
                view.add_block(blk)
                sim.inject(Proposal(blk, view, s, p), self._deliveries(sim, rnd, vote_round(s, d)))
                sim.inject(blk, self._deliveries(sim, rnd, rnd + 3 * d))
        if rnd == vote_round(s, d) or (rnd == merge_round(s, d) and self.rng.random() < self.late_prob):
            for v in adv:
                if self.rng.random() > self.vote_prob:
                    continue
                targets = self._blocks_upto(sim, s)
                picks = [self.rng.choice(targets)]
                if v in self.equivocators and len(targets) > 1 and self.rng.random() < 0.5:
                    picks.append(self.rng.choice([b for b in targets if b != picks[0]]))
                vs = s if self.rng.random() < 0.8 else max(0, s - self.rng.randint(1, 3))
                if v not in self.equivocators:
                    # one vote per slot keeps the rest of the adversary non-equivocating
                    if (v, vs) in self.voted:
                        continue
                    self.voted.add((v, vs))
                for b in picks:
                    if sim.knowledge.blocks[b].slot > vs:
                        continue
                    sim.inject(Vote(b, vs, v), self._deliveries(sim, rnd, rnd + 2 * d))

    def delay(self, sim, msg, sender, recipient, rnd, lo, hi, default):
        if self.delay_mode == "default":
            return None
        if self.delay_mode == "max":
            return hi
        return self.rng.randint(lo, hi)


def _active_at(sets, rnd):
    return sets.active[rnd]


def build_random_compliant(n: int = 7, eta=2, seed: int = 0, horizon: int = 60, kappa: int = 5,
                           variant: str = "standard", tau=None, pi=None, tpa_len: Optional[int] = None,
                           delta: int = 1, latency: Optional[int] = None, fc_kind: Optional[ForkChoiceKind] = None,
                           max_equivocators: Optional[int] = None, sleep_prob: float = 0.5,
                           delay_mode: str = "random", max_attempts: int = 500,
                           pivot_density: bool = True) -> Scenario:
    """Rejection-sample a schedule that is compliant at (tau, pi) by construction.

    The proposer schedule is then patched so that every window of kappa
    slots holds at least one pivot slot.
    """
    from .compliance import check_scenario, participation_from_schedule

    eta = parse_eta(eta)
    tau = eta if tau is None else parse_eta(tau)
    rng = random.Random(f"gen:{seed}")
    rounds = 3 * delta * horizon
    for attempt in range(max_attempts):
        shrink = 1.0 / (1 + attempt // 50)
        f0 = rng.randint(0, max(0, (n - 1) // 2 - 1))
        bad = rng.sample(range(n), f0)
        corruptions = {v: 0 for v in bad}
        goods = [v for v in range(n) if v not in corruptions]
        if rng.random() < 0.5 * shrink and len(goods) > 2:
            v = rng.choice(goods)
            corruptions[v] = rng.randrange(3 * delta, rounds)
        sleep = []
        for v in goods:
            if rng.random() >= sleep_prob * shrink:
                continue
            for _ in range(rng.randint(1, 2)):
                a = rng.randrange(0, rounds)
                length = rng.randint(1, 3 * delta * rng.choice((1, 2, 4, 8)))
                b = a + length
                sleep.append((v, a, None if b >= rounds else b))
        tpa = None
        if tpa_len is not None:
            t1 = rng.randint(2, max(2, horizon - tpa_len - 4))
            tpa = (t1, t1 + tpa_len)
        sc = Scenario(n=n, seed=seed, delta=delta, eta=eta, tau=tau, pi=pi, kappa=kappa, horizon=horizon,
                      variant=variant, fc_kind=fc_kind, sleep=sleep, corruptions=corruptions, tpa=tpa,
                      strategy="random_compliant", latency=latency)
        sets = participation_from_schedule(sc)
        if not check_scenario(sc, sets).compliant:
            continue
        if any(len(h) == 0 for h in sets.H):
            continue
        proposers = {}
        if pivot_density:
            proposers = _patch_pivots(sc, sets, rng)
            if proposers is None:
                continue
        eqs = sorted(corruptions)
        budget = (n - 1) // 3 if max_equivocators is None else max_equivocators
        params = {"equivocators": eqs[:budget], "delay_mode": delay_mode,
                  "vote_prob": 0.7, "propose_prob": 0.8, "late_prob": 0.3,
                  "generator": {"sleep_prob": sleep_prob, "max_equivocators": max_equivocators,
                                "delay_mode": delay_mode, "pivot_density": pivot_density,
                                "tpa_len": tpa_len}}
        return Scenario(
            n=n, seed=seed, delta=delta, eta=eta, tau=tau, pi=pi, kappa=kappa, horizon=horizon,
            h0=min(len(h) for h in sets.H), variant=variant, fc_kind=sc.fc_kind, proposers=proposers,
            sleep=sleep, corruptions=corruptions, tpa=tpa, strategy="random_compliant",
            strategy_params=params, latency=latency, name=f"random_compliant(seed={seed})",
            expected={"compliant": True},
        ).validate()
    raise AttackParamError("could not sample a compliant schedule; relax the parameters")


def random_compliant_from_template(template: Scenario, seed: int) -> Scenario:
    """Fresh random_compliant scenario for ``seed`` with the template's parameters."""
    _need(template.strategy == "random_compliant", "trial templates must use strategy random_compliant")
    gen = dict(template.strategy_params.get("generator") or {})
    if template.tpa is not None:
        gen["tpa_len"] = template.tpa[1] - template.tpa[0]
    allowed = {"sleep_prob", "max_equivocators", "delay_mode", "pivot_density", "tpa_len", "max_attempts"}
    unknown = sorted(set(gen) - allowed)
    _need(not unknown, f"unknown generator parameters {unknown}")
    sc = build_random_compliant(
        n=template.n, eta=template.eta, seed=seed, horizon=template.horizon, kappa=template.kappa,
        variant=template.variant, tau=template.tau, pi=template.pi, delta=template.delta,
        latency=template.latency, fc_kind=template.fc_kind, **gen)
    if template.expected:
        sc.expected = dict(template.expected)
    sc.t_conf = template.t_conf
    return sc


def _patch_pivots(sc: Scenario, sets, rng) -> Optional[dict]:
    from .netsim import elect_proposer

    d = sc.delta
    proposers = {}

    def pivot(s):
        p = proposers.get(s, elect_proposer(s, {}, sc.seed, sc.n))
        return p in sets.active[propose_round(s, d)]

    w = max(1, sc.kappa)
    for start in range(0, max(1, sc.horizon - w + 1)):
        window = range(start, min(start + w, sc.horizon))
        if any(pivot(s) for s in window):
            continue
        cands = [s for s in window if sets.active[propose_round(s, d)]]
        if not cands:
            return None
        s = rng.choice(cands)
        proposers[s] = rng.choice(sorted(sets.active[propose_round(s, d)]))
    return proposers


# ---------------------------------------------------------------- dispatch

_CLASSES = {c.name: c for c in (NullStrategy, LmdBaitAndSwitch, RlmdStaleVotes, RlmdDaCycle,
                                RlmdAsyncWakeup, GoldfishOneSlotAsync, RandomCompliant)}

BUILDERS = {
    "lmd_bait_and_switch": build_lmd_bait_and_switch,
    "rlmd_stale_votes": build_rlmd_stale_votes,
    "rlmd_da_cycle": build_rlmd_da_cycle,
    "rlmd_async_wakeup": build_rlmd_async_wakeup,
    "goldfish_one_slot_async": build_goldfish_one_slot_async,
    "random_compliant": build_random_compliant,
}


def make_strategy(scenario: Scenario) -> Strategy:
    try:
        cls = _CLASSES[scenario.strategy]
    except KeyError:
        raise ScenarioError(f"unknown strategy {scenario.strategy!r}") from None
    return cls(scenario)


def strategy_step(strategy: Strategy, sim, rnd: int) -> None:
    strategy.step(sim, rnd)


def build_attack_scenario(strategy: str, **params) -> Scenario:
    if strategy not in BUILDERS:
        raise AttackParamError(f"no builder for strategy {strategy!r}")
    return BUILDERS[strategy](**params)
