"""Message types, views and the block tree shared by the rest of the package."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional


class MalformedError(ValueError):
    """A view or trace references a block that is not present."""


class ClosureError(ValueError):
    """A merged view would not be validity-closed."""


# ---------------------------------------------------------------- time

def slot_of(rnd: int, delta: int) -> int:
    return rnd // (3 * delta)


def propose_round(t: int, delta: int) -> int:
    return 3 * delta * t


def vote_round(t: int, delta: int) -> int:
    return 3 * delta * t + delta


def merge_round(t: int, delta: int) -> int:
    return 3 * delta * t + 2 * delta


def phase_of(rnd: int, delta: int) -> Optional[str]:
    off = rnd % (3 * delta)
    if off == 0:
        return "propose"
    if off == delta:
        return "vote"
    if off == 2 * delta:
        return "merge"
    return None


# ---------------------------------------------------------------- messages

def block_id(parent: Optional[str], slot: int, proposer: Optional[int], body: bytes) -> str:
    payload = json.dumps([parent, slot, proposer, body.hex()], separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Block:
    id: str
    parent: Optional[str]
    slot: int
    proposer: Optional[int]
    body: bytes = b""

    @classmethod
    def create(cls, parent: Optional[str], slot: int, proposer: Optional[int], body: bytes = b"") -> "Block":
        return cls(block_id(parent, slot, proposer, body), parent, slot, proposer, body)

    @property
    def is_genesis(self) -> bool:
        return self.parent is None

    def to_json(self) -> dict:
        return {"id": self.id, "parent": self.parent, "slot": self.slot,
                "proposer": self.proposer, "body": self.body.hex()}

    @classmethod
    def from_json(cls, d: dict) -> "Block":
        return cls(d["id"], d["parent"], d["slot"], d["proposer"], bytes.fromhex(d.get("body", "")))


GENESIS = Block.create(None, 0, None, b"genesis")


@dataclass(frozen=True)
class Vote:
    block: str
    slot: int
    voter: int

    def to_json(self) -> dict:
        return {"block": self.block, "slot": self.slot, "voter": self.voter}

    @classmethod
    def from_json(cls, d: dict) -> "Vote":
        return cls(d["block"], d["slot"], d["voter"])


@dataclass(frozen=True, eq=False)
class Proposal:
    block: Block
    view: "View"
    slot: int
    proposer: int

    def to_json(self) -> dict:
        return {"block": self.block.id, "slot": self.slot, "proposer": self.proposer,
                "view_blocks": len(self.view.blocks), "view_votes": len(self.view.votes)}


# ---------------------------------------------------------------- views

class BlockTree:
    """Blocks keyed by id plus a parent -> children index."""

    __slots__ = ("blocks", "children")

    def __init__(self, blocks: Optional[dict] = None, children: Optional[dict] = None):
        self.blocks: dict[str, Block] = {} if blocks is None else blocks
        if children is None:
            children = {}
            for b in self.blocks.values():
                if b.parent is not None:
                    children.setdefault(b.parent, set()).add(b.id)
        self.children: dict[str, set] = children

    @classmethod
    def from_blocks(cls, blocks: Iterable[Block]) -> "BlockTree":
        return cls({b.id: b for b in blocks})

    def add(self, b: Block) -> None:
        if b.id in self.blocks:
            return
        self.blocks[b.id] = b
        if b.parent is not None:
            self.children.setdefault(b.parent, set()).add(b.id)

    def __contains__(self, bid) -> bool:
        return bid in self.blocks

    def get(self, bid: str) -> Block:
        try:
            return self.blocks[bid]
        except KeyError:
            raise MalformedError(f"unknown block {bid}") from None

    def ancestors(self, bid: str) -> list[str]:
        """Path from ``bid`` up to the root, inclusive on both ends."""
        out = []
        cur: Optional[str] = bid
        while cur is not None:
            out.append(cur)
            cur = self.get(cur).parent
        return out

    def ancestor_at_or_below(self, bid: str, max_slot: int) -> str:
        cur = self.get(bid)
        while cur.slot > max_slot and cur.parent is not None:
            cur = self.get(cur.parent)
        return cur.id

    def height(self, bid: str) -> int:
        return len(self.ancestors(bid)) - 1


def is_prefix(a: str, b: str, tree: BlockTree) -> bool:
    """True iff ``a`` is an ancestor of ``b`` or equal to it."""
    ba = tree.get(a)
    cur = tree.get(b)
    while cur.slot > ba.slot:
        if cur.parent is None:
            return False
        cur = tree.get(cur.parent)
    return cur.id == a


def conflicting(a: str, b: str, tree: BlockTree) -> bool:
    return not (is_prefix(a, b, tree) or is_prefix(b, a, tree))


class View:
    """A set of blocks and votes.

    The vote index (voter -> slot -> targets) and the set of equivocators
    are kept up to date on insertion so that fork-choice does not need to
    rescan the whole vote set.
    """

    __slots__ = ("tree", "votes", "by_voter", "equivocators")

    def __init__(self, blocks: Iterable[Block] = (), votes: Iterable[Vote] = ()):
        self.tree = BlockTree()
        self.votes: set = set()
        self.by_voter: dict[int, dict[int, set]] = {}
        self.equivocators: set = set()
        for b in blocks:
            self.tree.add(b)
        for v in votes:
            self.add_vote(v)

    @classmethod
    def genesis(cls) -> "View":
        return cls([GENESIS])

    @property
    def blocks(self) -> dict:
        return self.tree.blocks

    def add_block(self, b: Block) -> None:
        self.tree.add(b)

    def add_vote(self, v: Vote) -> None:
        if v in self.votes:
            return
        self.votes.add(v)
        per_slot = self.by_voter.setdefault(v.voter, {})
        targets = per_slot.setdefault(v.slot, set())
        targets.add(v.block)
        if len(targets) > 1:
            self.equivocators.add(v.voter)

    def update(self, other: "View") -> None:
        for bid in other.tree.blocks.keys() - self.tree.blocks.keys():
            self.tree.add(other.tree.blocks[bid])
        for v in other.votes - self.votes:
            self.add_vote(v)

    def copy(self) -> "View":
        out = View()
        out.tree = BlockTree(dict(self.tree.blocks), {k: set(s) for k, s in self.tree.children.items()})
        out.votes = set(self.votes)
        out.by_voter = {i: {s: set(t) for s, t in d.items()} for i, d in self.by_voter.items()}
        out.equivocators = set(self.equivocators)
        return out

    def with_votes(self, votes: Iterable[Vote]) -> "View":
        """Same blocks (shared, not copied), different vote set."""
        out = View()
        out.tree = self.tree
        for v in votes:
            out.add_vote(v)
        return out

    def is_empty(self) -> bool:
        return not self.tree.blocks and not self.votes

    def __eq__(self, other) -> bool:
        if not isinstance(other, View):
            return NotImplemented
        return self.tree.blocks.keys() == other.tree.blocks.keys() and self.votes == other.votes

    def __hash__(self):
        return hash((frozenset(self.tree.blocks), frozenset(self.votes)))

    def __repr__(self) -> str:
        return f"View(blocks={len(self.tree.blocks)}, votes={len(self.votes)})"


def validate_closure(v: View) -> bool:
    blocks = v.blocks
    for b in blocks.values():
        if b.parent is not None and b.parent not in blocks:
            return False
    return all(vote.block in blocks for vote in v.votes)


def merge_views(v1: View, v2: View) -> View:
    out = v1.copy()
    out.update(v2)
    if not validate_closure(out):
        raise ClosureError("merged view is not validity-closed")
    return out


def drain_buffer(view: View, buffer: View) -> View:
    """Move every message of ``buffer`` whose dependencies resolve into ``view``.

    Returns the leftover buffer (messages still waiting for a parent or target).
    """
    pending = [b for bid, b in buffer.blocks.items() if bid not in view.blocks]
    progress = True
    while pending and progress:
        progress = False
        rest = []
        for b in sorted(pending, key=lambda x: x.slot):
            if b.parent is None or b.parent in view.blocks:
                view.add_block(b)
                progress = True
            else:
                rest.append(b)
        pending = rest
    left_votes = []
    for vt in buffer.votes:
        if vt.block in view.blocks:
            view.add_vote(vt)
        else:
            left_votes.append(vt)
    return View(pending, left_votes)
