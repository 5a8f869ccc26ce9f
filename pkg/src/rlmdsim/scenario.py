"""Scenario description, JSON round-tripping and load-time validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

from .forkchoice import INFINITY, ForkChoiceKind, eta_to_json, parse_eta
from .validator import VARIANTS

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    """Scenario fails validation; the message names the offending field."""


def _inf_or_int(value):
    if value is None:
        return None
    return parse_eta(value)


@dataclass
class Scenario:
    n: int
    seed: int
    delta: int = 1
    eta: object = 1
    tau: object = None
    pi: object = None
    kappa: int = 5
    horizon: int = 20
    h0: Optional[int] = None
    variant: str = "standard"
    fc_kind: Optional[ForkChoiceKind] = None
    proposer_mode: str = "uniform"
    proposers: dict = field(default_factory=dict)          # slot -> validator
    sleep: list = field(default_factory=list)              # (validator, from_round, to_round|None)
    corruptions: dict = field(default_factory=dict)        # validator -> round
    tpa: Optional[tuple] = None                            # (t1, t2)
    strategy: str = "null"
    strategy_params: dict = field(default_factory=dict)
    pins: tuple = ()
    latency: Optional[int] = None
    t_conf: Optional[int] = None
    expected: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        self.eta = parse_eta(self.eta)
        self.tau = _inf_or_int(self.tau)
        self.pi = _inf_or_int(self.pi) if self.pi is not None else None
        if self.fc_kind is None:
            self.fc_kind = ForkChoiceKind.rlmd(self.eta)
        self.proposers = {int(k): int(v) for k, v in self.proposers.items()}
        self.corruptions = {int(k): int(v) for k, v in self.corruptions.items()}
        self.sleep = [(int(v), int(a), None if b is None else int(b)) for v, a, b in self.sleep]
        if self.tpa is not None:
            self.tpa = (int(self.tpa[0]), int(self.tpa[1]))
        self.pins = tuple(self.pins)

    # ------------------------------------------------------------ derived
    @property
    def rounds(self) -> int:
        return 3 * self.delta * self.horizon

    @property
    def link_latency(self) -> int:
        return self.delta if self.latency is None else self.latency

    @property
    def liveness_window(self) -> int:
        return 2 * self.kappa if self.t_conf is None else self.t_conf

    def asleep_intervals(self, v: int) -> list:
        return [(a, b) for w, a, b in self.sleep if w == v]

    # ------------------------------------------------------------ validation
    def validate(self) -> "Scenario":
        def need(cond, msg):
            if not cond:
                raise ScenarioError(msg)

        need(isinstance(self.n, int) and self.n >= 1, "n must be a positive integer")
        need(isinstance(self.seed, int), "seed must be an integer")
        need(self.delta >= 1, "delta must be >= 1")
        need(self.horizon >= 1, "horizon must be >= 1")
        need(self.kappa >= 0, "kappa must be >= 0")
        need(self.variant in VARIANTS, f"variant must be one of {VARIANTS}")
        need(1 <= self.link_latency <= self.delta, "latency must lie in [1, delta]")
        need(self.proposer_mode in ("uniform", "explicit"), "proposer_mode must be uniform or explicit")
        for s, v in self.proposers.items():
            need(0 <= s < self.horizon, f"proposer override for slot {s} outside horizon")
            need(0 <= v < self.n, f"proposer {v} is not a validator")
        if self.proposer_mode == "explicit":
            need(all(s in self.proposers for s in range(self.horizon)),
                 "explicit proposer schedule must cover every slot")
        for v, a, b in self.sleep:
            need(0 <= v < self.n, f"sleep schedule names nonexistent validator {v}")
            need(0 <= a < self.rounds, f"sleep interval start {a} outside horizon")
            need(b is None or a < b, f"empty sleep interval [{a}, {b})")
        for v, r in self.corruptions.items():
            need(0 <= v < self.n, f"corruption names nonexistent validator {v}")
            need(0 <= r < self.rounds, f"corruption round {r} outside horizon")
        if self.tpa is not None:
            t1, t2 = self.tpa
            need(0 <= t1 < t2, "tpa must satisfy 0 <= t1 < t2")
        if self.pi is not None:
            tau = self.tau if self.tau is not None else self.eta
            both_inf = tau is INFINITY and self.pi is INFINITY
            need(both_inf or tau is INFINITY or (self.pi is not INFINITY and tau > self.pi),
                 "tau > pi is required (or tau = pi = infinity)")
        if self.h0 is not None:
            need(0 < self.h0 <= self.n, "h0 must lie in (0, n]")
        return self

    # ------------------------------------------------------------ json
    def to_json(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "n": self.n,
            "seed": self.seed,
            "delta": self.delta,
            "eta": eta_to_json(self.eta),
            "tau": None if self.tau is None else eta_to_json(self.tau),
            "pi": None if self.pi is None else eta_to_json(self.pi),
            "kappa": self.kappa,
            "horizon": self.horizon,
            "h0": self.h0,
            "variant": self.variant,
            "fc_kind": self.fc_kind.to_json(),
            "proposer_schedule": {"mode": self.proposer_mode,
                                  "overrides": {str(s): v for s, v in sorted(self.proposers.items())}},
            "sleep_schedule": [{"validator": v, "from_round": a, "to_round": b, "state": "asleep"}
                               for v, a, b in self.sleep],
            "corruption_schedule": [{"validator": v, "round": r} for v, r in sorted(self.corruptions.items())],
            "tpa": None if self.tpa is None else list(self.tpa),
            "strategy": self.strategy,
            "strategy_params": self.strategy_params,
            "tiebreak_pin": list(self.pins),
            "latency": self.latency,
            "t_conf": self.t_conf,
            "expected": self.expected,
        }
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported schema_version {version!r}")
        for key in ("n", "seed"):
            if key not in d or d[key] is None:
                raise ScenarioError(f"missing required field {key!r}")
        try:
            fk = d.get("fc_kind")
            kind = ForkChoiceKind.parse(fk["name"], fk.get("eta")) if fk else None
            ps = d.get("proposer_schedule") or {}
            sleep = []
            for row in d.get("sleep_schedule") or []:
                if row.get("state", "asleep") != "asleep":
                    continue
                sleep.append((row["validator"], row["from_round"], row.get("to_round")))
            sc = cls(
                n=d["n"], seed=d["seed"], delta=d.get("delta", 1), eta=d.get("eta", 1),
                tau=d.get("tau"), pi=d.get("pi"), kappa=d.get("kappa", 5),
                horizon=d.get("horizon", 20), h0=d.get("h0"), variant=d.get("variant", "standard"),
                fc_kind=kind, proposer_mode=ps.get("mode", "uniform"),
                proposers=ps.get("overrides") or {}, sleep=sleep,
                corruptions={r["validator"]: r["round"] for r in d.get("corruption_schedule") or []},
                tpa=d.get("tpa"), strategy=d.get("strategy", "null"),
                strategy_params=d.get("strategy_params") or {},
                pins=d.get("tiebreak_pin") or (), latency=d.get("latency"),
                t_conf=d.get("t_conf"), expected=d.get("expected") or {}, name=d.get("name", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc
        return sc.validate()

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from exc
        return cls.from_json(data)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)
