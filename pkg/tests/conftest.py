import random

import pytest

from rlmdsim.core import GENESIS, Block, View, Vote
from oracles import random_view

# criterion number -> (ok, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def materialize(blocks, votes):
    """Turn an oracle view into a package View plus the oracle keyed by real ids."""
    ids = {"g": GENESIS.id}
    real = [GENESIS]
    pending = [k for k in blocks if k != "g"]
    while pending:
        rest = []
        for name in pending:
            parent, slot = blocks[name]
            if parent in ids:
                b = Block.create(ids[parent], slot, 0, name.encode())
                ids[name] = b.id
                real.append(b)
            else:
                rest.append(name)
        pending = rest
    oracle_blocks = {ids[k]: (None if p is None else ids[p], s) for k, (p, s) in blocks.items()}
    oracle_votes = [(ids[b], s, v) for b, s, v in votes]
    view = View(real, [Vote(b, s, v) for b, s, v in oracle_votes])
    return view, oracle_blocks, oracle_votes


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def random_views():
    def make(count, seed=0, **kw):
        r = random.Random(seed)
        for _ in range(count):
            blocks, votes, n, t = random_view(r, **kw)
            view, ob, ov = materialize(blocks, votes)
            yield view, ob, ov, n, t
    return make


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
