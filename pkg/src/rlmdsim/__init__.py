"""Propose-vote-merge consensus: fork-choice rules, a round simulator and trace checkers."""

from .core import GENESIS, Block, BlockTree, Proposal, View, Vote, is_prefix, merge_views, validate_closure
from .forkchoice import GHOST, GHOST_EPH, INFINITY, LMD_GHOST, ForkChoiceKind, fork_choice, ghost
from .netsim import Execution, Trace, elect_proposer, run
from .scenario import Scenario, ScenarioError

__all__ = [
    "GENESIS", "Block", "BlockTree", "Proposal", "View", "Vote", "is_prefix", "merge_views",
    "validate_closure", "GHOST", "GHOST_EPH", "INFINITY", "LMD_GHOST", "ForkChoiceKind",
    "fork_choice", "ghost", "Execution", "Trace", "elect_proposer", "run", "Scenario", "ScenarioError",
]
