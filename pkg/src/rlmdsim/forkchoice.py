"""GHOST and the vote filters that turn it into LMD-GHOST, GHOST-Eph and RLMD-GHOST.

Two evaluation paths are provided.  The filter functions compose literally
(each returns a new view), which is what the reference tests exercise.
``fork_choice`` computes the same result straight from the view's vote
index, which is what validators call on every phase round.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .core import GENESIS, BlockTree, MalformedError, View, Vote, is_prefix


class _Infinity:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (_Infinity, ())


INFINITY = _Infinity()
Eta = Union[int, _Infinity]


def parse_eta(value) -> Eta:
    if value is None or value is INFINITY:
        return INFINITY
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity", "∞"):
            return INFINITY
        value = int(value)
    if int(value) < 1:
        raise ValueError("expiry period must be >= 1")
    return int(value)


def eta_to_json(eta: Eta):
    return "inf" if eta is INFINITY else eta


@dataclass(frozen=True)
class ForkChoiceKind:
    name: str
    eta: Eta = INFINITY

    NAMES = ("GHOST", "LMD_GHOST", "GHOST_EPH", "RLMD_GHOST")

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise ValueError(f"unknown fork-choice kind {self.name!r}")

    @classmethod
    def rlmd(cls, eta) -> "ForkChoiceKind":
        return cls("RLMD_GHOST", parse_eta(eta))

    @classmethod
    def parse(cls, name: str, eta=None) -> "ForkChoiceKind":
        name = name.upper()
        if name in ("RLMD", "RLMD_GHOST"):
            return cls.rlmd(eta)
        if name in ("GOLDFISH", "GHOST_EPH"):
            return cls("GHOST_EPH", 1)
        if name in ("LMD", "LMD_GHOST"):
            return cls("LMD_GHOST")
        return cls(name)

    def to_json(self) -> dict:
        return {"name": self.name, "eta": eta_to_json(self.eta)}


GHOST = ForkChoiceKind("GHOST")
LMD_GHOST = ForkChoiceKind("LMD_GHOST")
GHOST_EPH = ForkChoiceKind("GHOST_EPH", 1)


# ---------------------------------------------------------------- GHOST

def weight(b: str, votes: Iterable[Vote], tree: BlockTree) -> int:
    tree.get(b)
    total = 0
    for v in votes:
        if v.block not in tree:
            raise MalformedError(f"vote targets unknown block {v.block}")
        if is_prefix(b, v.block, tree):
            total += 1
    return total


def _root(tree: BlockTree) -> str:
    if GENESIS.id in tree.blocks:
        return GENESIS.id
    for b in tree.blocks.values():
        if b.parent is None:
            return b.id
    raise MalformedError("view has no root block")


def ghost_from_counts(tree: BlockTree, counts: dict, pins: Iterable[str] = ()) -> str:
    """Greedy heaviest-subtree walk given per-target vote counts.

    Ties go to a pinned block if one is among the tied children, otherwise
    to the smallest block id.
    """
    w: dict = defaultdict(int)
    blocks = tree.blocks
    for target, c in counts.items():
        cur = target
        while cur is not None:
            w[cur] += c
            cur = blocks[cur].parent
    pins = frozenset(pins)
    cur = _root(tree)
    children = tree.children
    while True:
        kids = children.get(cur)
        if not kids:
            return cur
        if len(kids) == 1:
            cur = next(iter(kids))
        else:
            cur = min(kids, key=lambda c: (-w.get(c, 0), c not in pins, c))


def ghost(view: View, slot: int = 0, pins: Iterable[str] = ()) -> str:
    counts: dict = defaultdict(int)
    for v in view.votes:
        if v.block not in view.blocks:
            raise MalformedError(f"vote targets unknown block {v.block}")
        counts[v.block] += 1
    return ghost_from_counts(view.tree, counts, pins)


# ---------------------------------------------------------------- filters

def _equivocators(votes: Iterable[Vote]) -> set:
    seen: dict = {}
    eq = set()
    for v in votes:
        key = (v.voter, v.slot)
        prev = seen.setdefault(key, v.block)
        if prev != v.block:
            eq.add(v.voter)
    return eq


def filter_equivocation(view: View, slot: int) -> View:
    eq = _equivocators(view.votes)
    return view.with_votes(v for v in view.votes if v.voter not in eq)


def in_expiry_window(vote_slot: int, t: int, eta: Eta) -> bool:
    if eta is INFINITY:
        return True
    return t - eta <= vote_slot < t


def filter_expiry(view: View, slot: int, eta: Eta) -> View:
    if eta is INFINITY:
        return view
    return view.with_votes(v for v in view.votes if in_expiry_window(v.slot, slot, eta))


def filter_lmd(view: View, slot: int) -> View:
    latest: dict = {}
    for v in view.votes:
        if v.slot > latest.get(v.voter, -1):
            latest[v.voter] = v.slot
    return view.with_votes(v for v in view.votes if v.slot == latest[v.voter])


def filtered_view(kind: ForkChoiceKind, view: View, slot: int) -> View:
    if kind.name == "GHOST":
        return view
    v = filter_equivocation(view, slot)
    if kind.name == "LMD_GHOST":
        return filter_lmd(v, slot)
    if kind.name == "GHOST_EPH":
        return filter_expiry(v, slot, 1)
    return filter_lmd(filter_expiry(v, slot, kind.eta), slot)


def fork_choice_composed(kind: ForkChoiceKind, view: View, slot: int, pins: Iterable[str] = ()) -> str:
    """Fork choice evaluated by literally composing the filters."""
    return ghost(filtered_view(kind, view, slot), slot, pins)


# ---------------------------------------------------------------- fast path

def counted_votes(kind: ForkChoiceKind, view: View, slot: int) -> dict:
    """Per-target counts of the votes that survive the kind's filters."""
    counts: dict = defaultdict(int)
    if kind.name == "GHOST":
        for v in view.votes:
            counts[v.block] += 1
        return counts
    eqs = view.equivocators
    if kind.name == "GHOST_EPH":
        lo, hi, lmd = slot - 1, slot, False
    elif kind.name == "LMD_GHOST" or kind.eta is INFINITY:
        lo, hi, lmd = None, None, True
    else:
        lo, hi, lmd = slot - kind.eta, slot, True
    for voter, per_slot in view.by_voter.items():
        if voter in eqs:
            continue
        if lo is None:
            s = max(per_slot)
        else:
            window = [s for s in per_slot if lo <= s < hi]
            if not window:
                continue
            if not lmd:
                for s in window:
                    for target in per_slot[s]:
                        counts[target] += 1
                continue
            s = max(window)
        for target in per_slot[s]:
            counts[target] += 1
    return counts


def fork_choice(kind: ForkChoiceKind, view: View, slot: int, pins: Iterable[str] = ()) -> str:
    return ghost_from_counts(view.tree, counted_votes(kind, view, slot), pins)


def subtree_weight(kind: ForkChoiceKind, view: View, slot: int, b: str) -> int:
    """Weight of ``b`` after the kind's filters; convenient for reports."""
    total = 0
    for target, c in counted_votes(kind, view, slot).items():
        if is_prefix(b, target, view.tree):
            total += c
    return total
