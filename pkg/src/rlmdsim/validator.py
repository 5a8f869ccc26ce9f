"""Honest validator: propose / vote / merge, joining, and the two confirmation rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .core import (
    GENESIS, Block, BlockTree, Proposal, View, Vote, drain_buffer, is_prefix,
    merge_round, propose_round, slot_of, validate_closure, vote_round,
)
from .forkchoice import ForkChoiceKind, fork_choice

STANDARD = "standard"
FAST_CONFIRM = "fast_confirm"
VARIANTS = (STANDARD, FAST_CONFIRM)

ACTIVE = "active"
ASLEEP = "asleep"
JOINING = "joining"


def confirm_k_deep(canonical: str, tree: BlockTree, t: int, kappa: int) -> str:
    """Deepest ancestor of ``canonical`` proposed at a slot <= t - kappa."""
    return tree.ancestor_at_or_below(canonical, t - kappa)


def join_round(wake_round: int, delta: int) -> int:
    """First merge round 3*delta*t + 2*delta that is >= wake_round."""
    t = -(-(wake_round - 2 * delta) // (3 * delta))
    return merge_round(max(t, 0), delta)


def fast_quorum(n: int) -> int:
    return math.ceil(2 * n / 3)


def _closed(p: Proposal) -> bool:
    cached = p.__dict__.get("_closed")
    if cached is None:
        cached = validate_closure(p.view)
        object.__setattr__(p, "_closed", cached)
    return cached


@dataclass
class PhaseAction:
    outgoing: list = field(default_factory=list)
    events: list = field(default_factory=list)
    learned: list = field(default_factory=list)


@dataclass
class ValidatorState:
    id: int
    n: int
    delta: int
    kappa: int
    fc_kind: ForkChoiceKind
    variant: str = STANDARD
    view: View = field(default_factory=View.genesis)
    buffer: View = field(default_factory=View)
    canonical: str = GENESIS.id
    confirmed: str = GENESIS.id
    status: str = ACTIVE
    joining_until: Optional[int] = None
    sent_vote: bool = False
    pins: tuple = ()
    proposer_of: Optional[Callable[[int], int]] = field(default=None, repr=False)

    def head(self, t: int) -> str:
        return fork_choice(self.fc_kind, self.view, t, self.pins)

    def snapshot(self, rnd: int) -> dict:
        return {"kind": "state_snapshot", "round": rnd, "slot": slot_of(rnd, self.delta),
                "actor": self.id, "status": self.status, "canonical": self.canonical,
                "confirmed": self.confirmed}


def join(state: ValidatorState, wake_round: int) -> ValidatorState:
    state.status = JOINING
    state.joining_until = join_round(wake_round, state.delta)
    return state


def fall_asleep(state: ValidatorState) -> ValidatorState:
    state.status = ASLEEP
    state.joining_until = None
    return state


def _merge_buffer(state: ValidatorState) -> None:
    state.buffer = drain_buffer(state.view, state.buffer)


def _cast_vote(state: ValidatorState, t: int, act: PhaseAction) -> None:
    state.canonical = state.head(t)
    vote = Vote(state.canonical, t, state.id)
    state.buffer.add_vote(vote)
    state.sent_vote = True
    act.outgoing.append(vote)
    act.events.append(("vote", vote))


def fast_confirm(state: ValidatorState, t: int) -> Optional[str]:
    """Confirm step of the fast-confirmation variant.

    Returns the fast candidate if one reached the quorum.  Updates
    ``state.confirmed`` in place.
    """
    tree = state.view.tree
    chain = tree.ancestors(state.canonical)          # head ... genesis
    height = {bid: len(chain) - 1 - i for i, bid in enumerate(chain)}
    support: dict = {}
    for voter, per_slot in state.view.by_voter.items():
        best = -1
        for target in per_slot.get(t, ()):
            cur = target
            while cur not in height:
                cur = tree.blocks[cur].parent
            best = max(best, height[cur])
        if best >= 0:
            support[voter] = best
    q = fast_quorum(state.n)
    fast = GENESIS.id
    found = None
    depths = sorted(support.values(), reverse=True)
    if len(depths) >= q:
        h = depths[q - 1]
        fast = chain[len(chain) - 1 - h]
        found = fast
    kdeep = confirm_k_deep(state.canonical, tree, t, state.kappa)
    conf = state.confirmed
    strictly_below = lambda x: x != conf and conf in tree and is_prefix(x, conf, tree)
    if not (strictly_below(fast) and strictly_below(kdeep)):
        state.confirmed = fast if height[fast] >= height[kdeep] else kdeep
    return found


def _receive(state: ValidatorState, rnd: int, msg, act: PhaseAction) -> None:
    if isinstance(msg, Block):
        state.buffer.add_block(msg)
        return
    if isinstance(msg, Vote):
        state.buffer.add_vote(msg)
        return
    if not isinstance(msg, Proposal):
        raise TypeError(f"unexpected message {msg!r}")
    state.buffer.add_block(msg.block)
    if state.status != ACTIVE:
        return
    t = slot_of(rnd, state.delta)
    if msg.slot != t or not (propose_round(t, state.delta) <= rnd <= vote_round(t, state.delta)):
        return
    if state.proposer_of is not None and state.proposer_of(t) != msg.proposer:
        return
    if state.variant == FAST_CONFIRM and state.sent_vote:
        return
    if not _closed(msg):
        return
    view = state.view
    act.learned.extend(msg.view.blocks[b] for b in msg.view.blocks.keys() - view.blocks.keys())
    act.learned.extend(msg.view.votes - view.votes)
    view.update(msg.view)
    if state.variant == FAST_CONFIRM:
        _cast_vote(state, t, act)


def on_round(state: ValidatorState, rnd: int, delivered: Iterable = (), is_proposer: bool = False,
             variant: Optional[str] = None) -> tuple:
    """Advance one round.  Returns ``(state, PhaseAction)``."""
    if variant is not None:
        state.variant = variant
    act = PhaseAction()
    if state.status == ASLEEP:
        return state, act
    for msg in delivered:
        _receive(state, rnd, msg, act)
    d = state.delta
    t = slot_of(rnd, d)
    if state.status == JOINING:
        if rnd == state.joining_until:
            _merge_buffer(state)
            state.status = ACTIVE
            state.joining_until = None
            state.sent_vote = False
        return state, act
    if rnd == propose_round(t, d) and is_proposer:
        _merge_buffer(state)
        parent = state.head(t)
        blk = Block.create(parent, t, state.id)
        state.view.add_block(blk)
        state.canonical = blk.id
        if state.variant == STANDARD:
            state.confirmed = confirm_k_deep(blk.id, state.view.tree, t, state.kappa)
        prop = Proposal(blk, state.view.copy(), t, state.id)
        act.outgoing.extend([prop, blk])
        act.events.append(("propose", blk))
        if state.variant == FAST_CONFIRM and not state.sent_vote:
            _cast_vote(state, t, act)
    elif rnd == vote_round(t, d):
        if state.variant == STANDARD:
            _cast_vote(state, t, act)
            state.confirmed = confirm_k_deep(state.canonical, state.view.tree, t, state.kappa)
        else:
            if not state.sent_vote:
                _cast_vote(state, t, act)
            _merge_buffer(state)
            found = fast_confirm(state, t)
            if found is not None:
                act.events.append(("fast_confirm", found))
    elif rnd == merge_round(t, d):
        _merge_buffer(state)
        state.sent_vote = False
    return state, act
