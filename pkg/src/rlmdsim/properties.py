"""Trace-level checkers for the security properties.

Every checker returns a :class:`PropertyVerdict`.  ``vacuous`` means the
property had nothing to quantify over; ``excluded`` means a precondition
of the property did not hold, so no verdict is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

from .compliance import aware_set, participation_sets
from .core import Block, BlockTree, GENESIS, propose_round, slot_of, vote_round

PASS, FAIL, VACUOUS, EXCLUDED = "pass", "fail", "vacuous", "excluded"


@dataclass
class PropertyVerdict:
    name: str
    status: str
    witness: Optional[dict] = None
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (PASS, VACUOUS, EXCLUDED)

    def to_json(self) -> dict:
        out = {"property": self.name, "status": self.status}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.detail:
            out["detail"] = self.detail
        return out


class TraceIndex:
    """Derived views of a trace that several checkers share."""

    def __init__(self, trace):
        self.records = trace.records if hasattr(trace, "records") else list(trace)
        self.meta = None
        self.tree = BlockTree()
        self.tree.add(GENESIS)
        self.snapshots: dict = {}          # round -> {validator: (status, canonical, confirmed)}
        self.honest_proposals: list = []   # (slot, block id, proposer)
        self.votes: list = []              # (round, voter, block, slot, honest)
        self.fast: list = []               # (round, validator, block)
        self.deliveries: list = []
        for rec in self.records:
            kind = rec["kind"]
            if kind == "round_start" and "meta" in rec:
                self.meta = rec["meta"]
            elif kind == "propose":
                self._add_block(rec["block"])
                if rec.get("honest"):
                    b = rec["block"]
                    self.honest_proposals.append((b["slot"], b["id"], rec["actor"]))
            elif kind == "send":
                msg = rec["msg"]
                for b in msg.get("blocks", ()):
                    self._add_block(b)
                if msg["type"] == "block":
                    self._add_block(msg)
                elif msg["type"] == "proposal":
                    self._add_block(msg["block"])
                elif msg["type"] == "vote":
                    self.votes.append((rec["round"], msg["voter"], msg["block"], msg["slot"], rec.get("honest", False)))
            elif kind == "state_snapshot":
                self.snapshots.setdefault(rec["round"], {})[rec["actor"]] = (
                    rec["status"], rec["canonical"], rec["confirmed"])
            elif kind == "fast_confirm":
                self.fast.append((rec["round"], rec["actor"], rec["block"]))
            elif kind == "deliver":
                self.deliveries.append(rec)
        if self.meta is None:
            raise ValueError("trace has no metadata record")
        self.delta = self.meta["delta"]
        self.n = self.meta["n"]
        self.horizon = self.meta["horizon"]
        self.tpa = tuple(self.meta["tpa"]) if self.meta.get("tpa") else None
        self._anc: dict = {}

    def _add_block(self, d: dict) -> None:
        if d["id"] not in self.tree.blocks:
            self.tree.add(Block.from_json(d))

    @cached_property
    def sets(self):
        return participation_sets(self.records)

    def ancestors(self, bid: str) -> frozenset:
        got = self._anc.get(bid)
        if got is None:
            got = frozenset(self.tree.ancestors(bid))
            self._anc[bid] = got
        return got

    def prefix(self, a: str, b: str) -> bool:
        return a in self.ancestors(b)

    def fork_choice_views(self, rounds_from: int = 0):
        """(round, validator, canonical) at rounds where canonical was just recomputed.

        Vote rounds for every active validator, propose rounds for the proposer.
        """
        d = self.delta
        proposers = self.meta.get("proposers", [])
        for rnd in sorted(self.snapshots):
            if rnd < rounds_from:
                continue
            t = slot_of(rnd, d)
            snap = self.snapshots[rnd]
            if rnd == vote_round(t, d):
                for v, (status, canon, _) in sorted(snap.items()):
                    if status == "active":
                        yield rnd, v, canon
            elif rnd == propose_round(t, d) and t < len(proposers):
                p = proposers[t]
                if p in snap and snap[p][0] == "active" and any(s == t and q == p for s, _, q in self.honest_proposals):
                    yield rnd, p, snap[p][1]


def _index(trace) -> TraceIndex:
    return trace if isinstance(trace, TraceIndex) else TraceIndex(trace)


# ---------------------------------------------------------------- safety / liveness

def check_safety(trace) -> PropertyVerdict:
    ix = _index(trace)
    tip, tip_at = GENESIS.id, None
    compared = 0
    for rnd in sorted(ix.snapshots):
        for v, (status, _, conf) in sorted(ix.snapshots[rnd].items()):
            if status != "active":
                continue
            compared += 1
            if ix.prefix(conf, tip):
                continue
            if ix.prefix(tip, conf):
                tip, tip_at = conf, (rnd, v)
                continue
            return PropertyVerdict("safety", FAIL, {
                "first": {"round": tip_at[0], "validator": tip_at[1], "confirmed": tip},
                "second": {"round": rnd, "validator": v, "confirmed": conf}})
    return PropertyVerdict("safety", PASS if compared else VACUOUS, detail={"snapshots": compared})


def check_liveness(trace, t_conf: Optional[int] = None) -> PropertyVerdict:
    """Evaluated at vote rounds against the last round of the same slot.

    Confirmed chains only move at vote rounds, so a vote-round snapshot
    stands for every round up to the end of its slot.
    """
    ix = _index(trace)
    t_conf = ix.meta.get("t_conf") if t_conf is None else t_conf
    d = ix.delta
    window = 3 * d * t_conf
    last = 3 * d * ix.horizon - 1
    honest_round = {bid: propose_round(s, d) for s, bid, _ in ix.honest_proposals}
    best: dict = {}

    def newest_honest(conf):
        got = best.get(conf)
        if got is None:
            got = max((honest_round[b] for b in ix.ancestors(conf) if b in honest_round), default=-1)
            best[conf] = got
        return got

    checked = 0
    for rnd in sorted(ix.snapshots):
        t = slot_of(rnd, d)
        if rnd != vote_round(t, d):
            continue
        until = min(propose_round(t + 1, d) - 1, last)
        if until < window:
            continue
        for v, (status, _, conf) in sorted(ix.snapshots[rnd].items()):
            if status != "active":
                continue
            checked += 1
            if newest_honest(conf) <= until - window:
                return PropertyVerdict("liveness", FAIL, {
                    "round": rnd, "validator": v, "confirmed": conf, "t_conf": t_conf,
                    "newest_honest_round": newest_honest(conf), "required_after": until - window})
    return PropertyVerdict("liveness", PASS if checked else VACUOUS, detail={"t_conf": t_conf, "checked": checked})


# ---------------------------------------------------------------- reorg / asynchrony resilience

def _resilience(ix: TraceIndex, name: str, proposals: list, allowed) -> PropertyVerdict:
    if not proposals:
        return PropertyVerdict(name, VACUOUS)
    d = ix.delta
    first = min(vote_round(s, d) for s, _, _ in proposals)
    checked = 0
    for rnd, v, canon in ix.fork_choice_views(first):
        if not allowed(rnd, v):
            continue
        anc = ix.ancestors(canon)
        for s, bid, p in proposals:
            if rnd < vote_round(s, d):
                continue
            checked += 1
            if bid not in anc:
                return PropertyVerdict(name, FAIL, {"block": bid, "slot": s, "proposer": p,
                                                    "round": rnd, "validator": v, "canonical": canon})
    return PropertyVerdict(name, PASS if checked else VACUOUS, detail={"checked": checked})


def check_reorg_resilience(trace) -> PropertyVerdict:
    ix = _index(trace)
    return _resilience(ix, "reorg_resilience", ix.honest_proposals, lambda r, v: True)


def check_asynchrony_resilience(trace, tpa=None) -> PropertyVerdict:
    ix = _index(trace)
    tpa = ix.tpa if tpa is None else tuple(tpa)
    if tpa is None:
        return PropertyVerdict("asynchrony_resilience", EXCLUDED, detail={"reason": "no TPA declared"})
    sets = ix.sets
    props = [p for p in ix.honest_proposals if p[0] <= tpa[0]]
    return _resilience(ix, "asynchrony_resilience", props, lambda r, v: v in aware_set(sets, tpa, r))


# ---------------------------------------------------------------- view-merge, pivot density

def check_view_merge(trace) -> PropertyVerdict:
    ix = _index(trace)
    sets = ix.sets
    votes = {}
    for _, voter, block, s, honest in ix.votes:
        if honest:
            votes.setdefault((voter, s), set()).add(block)
    slots = 0
    for s, bid, p in ix.honest_proposals:
        if ix.tpa is not None and ix.tpa[0] < s <= ix.tpa[1]:
            continue
        if s >= len(sets.H):
            continue
        slots += 1
        for v in sorted(sets.H[s]):
            got = votes.get((v, s), set())
            if got != {bid}:
                return PropertyVerdict("view_merge", FAIL, {"slot": s, "proposal": bid, "validator": v,
                                                            "voted": sorted(got)})
    return PropertyVerdict("view_merge", PASS if slots else VACUOUS, detail={"pivot_slots": slots})


def pivot_slots(trace) -> list:
    return sorted({s for s, _, _ in _index(trace).honest_proposals})


def check_pivot_density(trace, kappa: Optional[int] = None) -> PropertyVerdict:
    ix = _index(trace)
    kappa = ix.meta["kappa"] if kappa is None else kappa
    pivots = set(s for s, _, _ in ix.honest_proposals)
    if kappa < 1 or ix.horizon < kappa:
        return PropertyVerdict("pivot_density", VACUOUS)
    for start in range(0, ix.horizon - kappa + 1):
        if not any(s in pivots for s in range(start, start + kappa)):
            return PropertyVerdict("pivot_density", FAIL, {"window": [start, start + kappa - 1]})
    return PropertyVerdict("pivot_density", PASS, detail={"pivot_slots": len(pivots)})


def pivot_failure_bound(n: int, h0: int, kappa: int, horizon: int) -> float:
    """Union bound on some kappa-window lacking a pivot slot."""
    return horizon * ((n - h0) / n) ** kappa


# ---------------------------------------------------------------- fast confirmation

def _equivocators(ix: TraceIndex) -> set:
    seen: dict = {}
    eq = set()
    for _, voter, block, s, _ in ix.votes:
        prev = seen.setdefault((voter, s), block)
        if prev != block:
            eq.add(voter)
    return eq


def check_fast_confirm_properties(trace) -> PropertyVerdict:
    ix = _index(trace)
    if ix.meta.get("variant") != "fast_confirm":
        raise ValueError("fast-confirmation checks need a trace from the fast_confirm variant")
    d = ix.delta
    sets = ix.sets
    subs = {}

    # (a) fast-confirmed blocks stay canonical from 3Δ(t+1)+Δ on
    witness_a = None
    if not ix.fast:
        subs["a"] = VACUOUS
    else:
        confirmed = sorted({(slot_of(r, d), b) for r, _, b in ix.fast})
        for rnd, v, canon in ix.fork_choice_views():
            anc = ix.ancestors(canon)
            for s, b in confirmed:
                if rnd >= vote_round(s + 1, d) and b not in anc:
                    witness_a = {"block": b, "slot": s, "round": rnd, "validator": v, "canonical": canon}
                    break
            if witness_a:
                break
        subs["a"] = FAIL if witness_a else PASS

    # (b) next-slot honest voters vote for descendants of any fast-confirmed block
    witness_b = None
    eqs = _equivocators(ix)
    if len(eqs) * 3 >= ix.n:
        subs["b"] = EXCLUDED
    elif not ix.fast:
        subs["b"] = VACUOUS
    else:
        honest_votes = {(voter, s): block for _, voter, block, s, honest in ix.votes if honest}
        for r, _, b in ix.fast:
            s = slot_of(r, d)
            if ix.tpa is not None and any(ix.tpa[0] < x < ix.tpa[1] for x in (s, s + 1)):
                continue
            if s + 1 >= len(sets.H):
                continue
            for v in sorted(sets.H[s + 1]):
                target = honest_votes.get((v, s + 1))
                if target is None or not ix.prefix(b, target):
                    witness_b = {"block": b, "slot": s, "validator": v, "voted": target}
                    break
            if witness_b:
                break
        subs["b"] = FAIL if witness_b else PASS

    # (c) honest proposals in well-connected, well-attended slots fast-confirm at once
    witness_c = None
    quorum = math.ceil(2 * ix.n / 3)
    fast_by = {(slot_of(r, d), v): b for r, v, b in ix.fast}
    slow = {}
    for rec in ix.deliveries:
        if rec.get("adversarial"):
            continue
        s = slot_of(rec["sent"], d)
        if rec["sent"] <= vote_round(s, d) and 2 * (rec["round"] - rec["sent"]) > d:
            slow[s] = True
    applicable = 0
    for s, bid, _ in ix.honest_proposals:
        if s >= len(sets.H) or len(sets.H[s]) < quorum or slow.get(s):
            continue
        if ix.tpa is not None and ix.tpa[0] < s < ix.tpa[1]:
            continue
        applicable += 1
        for v in sorted(sets.H[s]):
            if fast_by.get((s, v)) != bid:
                witness_c = {"slot": s, "proposal": bid, "validator": v, "fast": fast_by.get((s, v))}
                break
        if witness_c:
            break
    subs["c"] = FAIL if witness_c else (PASS if applicable else VACUOUS)

    status = FAIL if FAIL in subs.values() else PASS
    witness = None
    if status == FAIL:
        witness = {k: w for k, w in (("a", witness_a), ("b", witness_b), ("c", witness_c)) if w}
    return PropertyVerdict("fast_confirm", status, witness,
                           {"sub": subs, "equivocators": sorted(eqs), "fast_confirmations": len(ix.fast)})


# ---------------------------------------------------------------- aggregate

def check_all(trace, t_conf: Optional[int] = None) -> dict:
    ix = _index(trace)
    out = {
        "safety": check_safety(ix),
        "liveness": check_liveness(ix, t_conf),
        "reorg_resilience": check_reorg_resilience(ix),
        "view_merge": check_view_merge(ix),
        "pivot_density": check_pivot_density(ix),
    }
    if ix.tpa is not None:
        out["asynchrony_resilience"] = check_asynchrony_resilience(ix)
    if ix.meta.get("variant") == "fast_confirm":
        out["fast_confirm"] = check_fast_confirm_properties(ix)
    joint = FAIL if FAIL in (out["safety"].status, out["liveness"].status) else PASS
    out["safety_or_liveness"] = PropertyVerdict("safety_or_liveness", joint)
    return out


def summary_stats(trace) -> dict:
    ix = _index(trace)
    last = {}
    reorgs = 0
    for rnd in sorted(ix.snapshots):
        for v, (_, canon, conf) in ix.snapshots[rnd].items():
            prev = last.get(v)
            if prev is not None and prev[0] != canon and not ix.prefix(prev[0], canon):
                reorgs += 1
            last[v] = (canon, conf)
    return {
        "pivot_slots": len({s for s, _, _ in ix.honest_proposals}),
        "confirmed_length": {str(v): ix.tree.height(c) for v, (_, c) in sorted(last.items())},
        "reorgs": reorgs,
    }
