"""Round-driven network simulator.

Each round runs in a fixed order: scheduled corruptions and sleep/wake
transitions, the adversary hook, message deliveries, honest validators,
then routing of whatever they emitted.  Honest receivers relay every new
message (gossip), so anything one awake honest validator sees reaches the
others within the delay bound.
"""

from __future__ import annotations

import json
import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    GENESIS, Block, Proposal, View, Vote, phase_of, propose_round, slot_of, vote_round,
)
from .scenario import Scenario
from .validator import ASLEEP, ACTIVE, ValidatorState, fall_asleep, join, on_round

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- proposer election

def elect_proposer(slot: int, overrides: dict, seed: int, n: int) -> int:
    """Override if present, else a uniform draw keyed on (seed, slot)."""
    if slot in overrides:
        return overrides[slot]
    return random.Random(f"proposer:{seed}:{slot}").randrange(n)


# ---------------------------------------------------------------- messages

def msg_key(msg, seq: Optional[int] = None) -> tuple:
    if isinstance(msg, Block):
        return ("B", msg.id)
    if isinstance(msg, Vote):
        return ("V", msg.block, msg.slot, msg.voter)
    if isinstance(msg, Proposal):
        return ("P", seq)
    raise TypeError(f"not a message: {msg!r}")


def key_str(key: tuple) -> str:
    return ":".join(str(x) for x in key)


def msg_json(msg) -> dict:
    if isinstance(msg, Block):
        return {"type": "block", **msg.to_json()}
    if isinstance(msg, Vote):
        return {"type": "vote", **msg.to_json()}
    return {"type": "proposal", "block": msg.block.to_json(), "slot": msg.slot,
            "proposer": msg.proposer, "view_blocks": len(msg.view.blocks),
            "view_votes": len(msg.view.votes)}


# ---------------------------------------------------------------- trace

class Trace:
    """Ordered list of event records (plain dicts) plus the run's metadata."""

    def __init__(self, records: Optional[list] = None):
        self.records: list = [] if records is None else records

    @property
    def meta(self) -> dict:
        for rec in self.records:
            if rec["kind"] == "round_start" and "meta" in rec:
                return rec["meta"]
        raise ValueError("trace has no metadata record")

    def of_kind(self, *kinds) -> list:
        return [r for r in self.records if r["kind"] in kinds]

    def dumps(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        recs = []
        for i, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {i}: {exc}") from exc
            if not isinstance(rec, dict) or "kind" not in rec or "round" not in rec:
                raise ValueError(f"line {i}: record lacks kind/round")
            recs.append(rec)
        return cls(recs)

    @classmethod
    def read(cls, path) -> "Trace":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())

    def __len__(self):
        return len(self.records)


# ---------------------------------------------------------------- execution

@dataclass
class Execution:
    scenario: Scenario
    trace: Trace
    states: dict
    blocks: dict
    corrupted: dict = field(default_factory=dict)


class Simulation:
    def __init__(self, scenario: Scenario, strategy=None):
        from .adversary import make_strategy

        scenario.validate()
        self.sc = scenario
        self.n = scenario.n
        self.delta = scenario.delta
        self.strategy = strategy if strategy is not None else make_strategy(scenario)
        self.rng = random.Random(f"net:{scenario.seed}")
        self._proposers = [elect_proposer(s, scenario.proposers, scenario.seed, self.n)
                           for s in range(scenario.horizon + 1)]
        self.states = {
            v: ValidatorState(v, self.n, self.delta, scenario.kappa, scenario.fc_kind,
                              scenario.variant, pins=scenario.pins, proposer_of=self.proposer_of)
            for v in range(self.n)
        }
        self.corrupted: dict = {}
        self.pending: dict = defaultdict(list)       # round -> [(recipient, key, msg, sender)]
        self.scheduled: dict = defaultdict(dict)     # key -> recipient -> round
        self.received = {v: set() for v in range(self.n)}
        self.queued = {v: [] for v in range(self.n)}
        self.knowledge = View.genesis()              # every block and vote ever sent
        self.proposals: list = []                    # (seq, Proposal, honest)
        self.blocks = {GENESIS.id: GENESIS}
        self.trace = Trace()
        self._seq = 0
        self._orphan_votes: list = []
        self._recorded_blocks = {GENESIS.id}
        self.round = 0
        self._sleep_at = defaultdict(list)
        self._wake_at = defaultdict(list)
        for v, a, b in scenario.sleep:
            self._sleep_at[a].append(v)
            if b is not None:
                self._wake_at[b].append(v)
        self._corrupt_at = defaultdict(list)
        for v, r in scenario.corruptions.items():
            self._corrupt_at[r].append(v)

    # ------------------------------------------------------------ queries
    def proposer_of(self, slot: int) -> int:
        if slot < len(self._proposers):
            return self._proposers[slot]
        return elect_proposer(slot, self.sc.proposers, self.sc.seed, self.n)

    def is_asleep(self, v: int, rnd: int) -> bool:
        return any(a <= rnd and (b is None or rnd < b) for w, a, b in self.sc.sleep if w == v)

    def honest(self) -> list:
        return [v for v in range(self.n) if v not in self.corrupted]

    def awake_honest(self, rnd: Optional[int] = None) -> list:
        rnd = self.round if rnd is None else rnd
        return [v for v in self.honest() if not self.is_asleep(v, rnd)]

    def synchronous(self, rnd: int) -> bool:
        tpa = self.sc.tpa
        if tpa is None:
            return True
        return not (tpa[0] < slot_of(rnd, self.delta) < tpa[1])

    def delivery_bound(self, rnd: int) -> int:
        if self.synchronous(rnd):
            return rnd + self.delta
        return max(rnd + self.delta, 3 * self.delta * self.sc.tpa[1] + self.delta)

    # ------------------------------------------------------------ recording
    def _record(self, kind: str, actor=None, **extra) -> None:
        rec = {"kind": kind, "round": self.round, "slot": slot_of(self.round, self.delta), "actor": actor}
        rec.update(extra)
        self.trace.records.append(rec)

    def _meta(self) -> dict:
        sc = self.sc
        return {
            "n": sc.n, "delta": sc.delta, "horizon": sc.horizon, "kappa": sc.kappa,
            "eta": sc.to_json()["eta"], "variant": sc.variant, "fc_kind": sc.fc_kind.to_json(),
            "tpa": None if sc.tpa is None else list(sc.tpa), "seed": sc.seed,
            "strategy": sc.strategy, "t_conf": sc.liveness_window, "h0": sc.h0,
            "proposers": self._proposers[: sc.horizon], "genesis": GENESIS.to_json(),
            "pins": list(sc.pins),
        }

    # ------------------------------------------------------------ routing
    def _schedule(self, recipient: int, rnd: int, key: tuple, msg, sender) -> None:
        if recipient in self.corrupted or key in self.received[recipient]:
            return
        prev = self.scheduled[key].get(recipient)
        if prev is not None and prev <= rnd:
            return
        self.scheduled[key][recipient] = rnd
        self.pending[rnd].append((recipient, key, msg, sender, self.round))

    def _honest_delay(self, msg, key, sender, recipient, rnd: int) -> int:
        lo, hi = rnd + 1, self.delivery_bound(rnd)
        default = rnd + self.sc.link_latency
        chosen = self.strategy.delay(self, msg, sender, recipient, rnd, lo, hi, default)
        if chosen is None:
            chosen = default
        return min(max(int(chosen), lo), hi)

    def _learn(self, msg) -> None:
        if isinstance(msg, Block):
            self.knowledge.add_block(msg)
            self.blocks.setdefault(msg.id, msg)
        elif isinstance(msg, Vote):
            if msg.block in self.knowledge.blocks:
                self.knowledge.add_vote(msg)
            else:
                self._orphan_votes.append(msg)
        else:
            self._learn(msg.block)
            for b in msg.view.blocks.values():
                self._learn(b)
            for v in msg.view.votes:
                self._learn(v)
        if isinstance(msg, Block) and self._orphan_votes:
            rest = []
            for v in self._orphan_votes:
                (self.knowledge.add_vote(v) if v.block in self.knowledge.blocks else rest.append(v))
            self._orphan_votes = rest

    def _msg_record(self, msg) -> dict:
        out = msg_json(msg)
        if isinstance(msg, Proposal):
            fresh = [b for b in sorted(msg.view.blocks.values(), key=lambda b: (b.slot, b.id))
                     if b.id not in self._recorded_blocks]
            out["blocks"] = [b.to_json() for b in fresh]
            self._recorded_blocks.update(b.id for b in fresh)
        blk = msg.block if isinstance(msg, Proposal) else msg
        if isinstance(blk, Block):
            self._recorded_blocks.add(blk.id)
        return out

    def _new_proposal_key(self, prop: Proposal, honest: bool) -> tuple:
        key = ("P", self._seq)
        self.proposals.append((self._seq, prop, honest))
        self._seq += 1
        return key

    def send_honest(self, sender: int, msg) -> None:
        rnd = self.round
        key = self._new_proposal_key(msg, True) if isinstance(msg, Proposal) else msg_key(msg)
        self._learn(msg)
        self._record("send", sender, honest=True, key=key_str(key), msg=self._msg_record(msg))
        self.received[sender].add(key)
        for u in range(self.n):
            if u == sender or u in self.corrupted:
                continue
            self._schedule(u, self._honest_delay(msg, key, sender, u, rnd), key, msg, sender)

    def inject(self, msg, deliveries: dict, sender: Optional[int] = None) -> tuple:
        """Adversarial send: ``deliveries`` maps recipient -> delivery round."""
        if isinstance(msg, Proposal):
            key = self._new_proposal_key(msg, False)
        else:
            key = msg_key(msg)
        if sender is None:
            sender = msg.voter if isinstance(msg, Vote) else msg.proposer
        if sender not in self.corrupted:
            raise ValueError(f"adversary cannot send as honest validator {sender}")
        self._learn(msg)
        self._record("send", sender, honest=False, key=key_str(key), msg=self._msg_record(msg),
                     to={str(u): r for u, r in sorted(deliveries.items())})
        for u, r in deliveries.items():
            if r < self.round:
                raise ValueError("cannot deliver in the past")
            self._schedule(u, r, key, msg, sender)
        return key

    def _relay(self, relayer: int, key: tuple, msg, rnd: int) -> None:
        if isinstance(msg, Proposal) and rnd > vote_round(msg.slot, self.delta):
            return
        hi = self.delivery_bound(rnd)
        for u in range(self.n):
            if u == relayer or u in self.corrupted or key in self.received[u]:
                continue
            prev = self.scheduled[key].get(u)
            if prev is not None and prev <= hi:
                continue
            self._schedule(u, self._honest_delay(msg, key, relayer, u, rnd), key, msg, relayer)

    # ------------------------------------------------------------ round steps
    def _apply_schedule(self, rnd: int) -> None:
        for v in sorted(self._corrupt_at.get(rnd, ())):
            if v in self.corrupted:
                continue
            self.corrupted[v] = rnd
            self.queued[v] = []
            self._record("corrupt", v)
            self.strategy.on_corrupt(self, v)
        for v in sorted(self._sleep_at.get(rnd, ())):
            st = self.states[v]
            if v in self.corrupted or st.status == ASLEEP:
                continue
            fall_asleep(st)
            self._record("sleep", v)
        for v in sorted(self._wake_at.get(rnd, ())):
            st = self.states[v]
            if v in self.corrupted or st.status != ASLEEP or self.is_asleep(v, rnd):
                continue
            join(st, rnd)
            self._record("wake", v, active_from=st.joining_until)
            held, self.queued[v] = self.queued[v], []
            sync = self.synchronous(rnd)
            for key, msg, sender in held:
                if isinstance(msg, Proposal):
                    continue
                when = rnd
                if not sync:
                    chosen = self.strategy.delay(self, msg, sender, v, rnd, rnd, self.delivery_bound(rnd), rnd)
                    when = min(max(int(rnd if chosen is None else chosen), rnd), self.delivery_bound(rnd))
                self.scheduled[key].pop(v, None)
                self._schedule(v, when, key, msg, sender)

    def _deliver(self, rnd: int) -> dict:
        inbox = defaultdict(list)
        batch = self.pending.pop(rnd, [])
        for recipient, key, msg, sender, sent in batch:
            if recipient in self.corrupted or key in self.received[recipient]:
                continue
            if self.scheduled[key].get(recipient) != rnd:
                continue
            if isinstance(msg, Proposal):
                s = msg.slot
                if not (propose_round(s, self.delta) <= rnd <= vote_round(s, self.delta)):
                    continue
            if self.states[recipient].status == ASLEEP:
                self.queued[recipient].append((key, msg, sender))
                continue
            self.received[recipient].add(key)
            self._record("deliver", recipient, key=key_str(key), sender=sender, sent=sent,
                         adversarial=sender in self.corrupted)
            inbox[recipient].append(msg)
            self._relay(recipient, key, msg, rnd)
        return inbox

    def _step_validators(self, rnd: int, inbox: dict) -> None:
        t = slot_of(rnd, self.delta)
        is_propose = rnd == propose_round(t, self.delta)
        for v in self.honest():
            st = self.states[v]
            if st.status == ASLEEP:
                continue
            _, act = on_round(st, rnd, inbox.get(v, ()), is_propose and self.proposer_of(t) == v)
            for kind, obj in act.events:
                if kind == "propose":
                    self._record("propose", v, honest=True, block=obj.to_json())
                    self._recorded_blocks.add(obj.id)
                elif kind == "vote":
                    self._record("vote", v, honest=True, block=obj.block, vote_slot=obj.slot)
                elif kind == "fast_confirm":
                    self._record("fast_confirm", v, block=obj)
            for msg in act.outgoing:
                self.send_honest(v, msg)
            for msg in act.learned:
                key = msg_key(msg)
                if key not in self.received[v]:
                    self.received[v].add(key)
                    self._relay(v, key, msg, rnd)

    def _snapshots(self, rnd: int) -> None:
        if phase_of(rnd, self.delta) is None:
            return
        for v in self.honest():
            self.trace.records.append(self.states[v].snapshot(rnd))

    # ------------------------------------------------------------ main loop
    def run(self) -> Execution:
        self.strategy.setup(self)
        for v in range(self.n):
            if self.is_asleep(v, 0):
                self.states[v].status = ASLEEP
        for rnd in range(self.sc.rounds):
            self.round = rnd
            if rnd == 0:
                self._record("round_start", meta=self._meta())
                for v in range(self.n):
                    if self.states[v].status == ASLEEP and v not in self._corrupt_at.get(0, ()):
                        self._record("sleep", v)
            else:
                self._record("round_start")
            self._apply_schedule(rnd)
            self.strategy.step(self, rnd)
            inbox = self._deliver(rnd)
            self._step_validators(rnd, inbox)
            self._snapshots(rnd)
        log.debug("run finished: %d records", len(self.trace))
        return Execution(self.sc, self.trace, self.states, self.blocks, dict(self.corrupted))


def run(scenario: Scenario, strategy=None) -> Execution:
    return Simulation(scenario, strategy).run()
