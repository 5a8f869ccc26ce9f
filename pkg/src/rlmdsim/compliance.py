"""Participation sets and the sleepiness / compliance checks over them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import merge_round, slot_of, vote_round
from .forkchoice import INFINITY, parse_eta
from .validator import join_round


class ComplianceParamError(ValueError):
    pass


@dataclass(frozen=True)
class ParticipationSets:
    n: int
    delta: int
    horizon: int
    H: tuple                 # slot -> frozenset of honest validators active at 3Δt+Δ
    A: tuple                 # slot -> frozenset of validators corrupted by 3Δt+Δ
    awake_merge: tuple       # slot -> frozenset of honest validators awake at 3Δt+2Δ
    active: tuple            # round -> frozenset of active honest validators

    def h(self, t: int) -> frozenset:
        return self.H[t] if 0 <= t < len(self.H) else frozenset()

    def a(self, t: int) -> frozenset:
        if t < 0:
            return frozenset()
        return self.A[min(t, len(self.A) - 1)]

    def h_range(self, s, t: int) -> frozenset:
        """Union of H_i for i in [s, t]; s may be INFINITY-derived (None = from 0)."""
        lo = 0 if s is None else max(s, 0)
        out = set()
        for i in range(lo, min(t, len(self.H) - 1) + 1):
            out |= self.H[i]
        return frozenset(out)

    def h_inf(self, t: int) -> frozenset:
        return self.h(t) - self.A[-1]


def _replay(events: list, n: int, delta: int, horizon: int) -> ParticipationSets:
    """``events``: (round, kind, actor, active_from) sorted by round."""
    rounds = 3 * delta * horizon
    status = {v: "active" for v in range(n)}
    until: dict = {}
    corrupted: set = set()
    by_round: dict = {}
    for ev in events:
        by_round.setdefault(ev[0], []).append(ev)
    active, awake = [], []
    for r in range(rounds):
        for _, kind, v, af in by_round.get(r, ()):
            if kind == "corrupt":
                corrupted.add(v)
            elif kind == "sleep":
                status[v] = "asleep"
            elif kind == "wake":
                status[v] = "joining"
                until[v] = af
        for v in range(n):
            if status[v] == "joining" and r >= until[v]:
                status[v] = "active"
        active.append(frozenset(v for v in range(n) if v not in corrupted and status[v] == "active"))
        awake.append((frozenset(v for v in range(n) if v not in corrupted and status[v] != "asleep"),
                      frozenset(corrupted)))
    H = tuple(active[vote_round(t, delta)] for t in range(horizon))
    A = tuple(awake[vote_round(t, delta)][1] for t in range(horizon))
    M = tuple(awake[merge_round(t, delta)][0] for t in range(horizon))
    return ParticipationSets(n, delta, horizon, H, A, M, tuple(active))


def participation_sets(trace) -> ParticipationSets:
    """Sets from the sleep / wake / corrupt records of a trace."""
    recs = trace.records if hasattr(trace, "records") else trace
    meta = None
    events = []
    for rec in recs:
        kind = rec.get("kind")
        if kind == "round_start" and "meta" in rec:
            meta = rec["meta"]
        elif kind in ("sleep", "wake", "corrupt"):
            if not isinstance(rec.get("actor"), int):
                raise ValueError(f"malformed {kind} record: {rec}")
            if kind == "wake" and "active_from" not in rec:
                raise ValueError(f"wake record lacks active_from: {rec}")
            events.append((rec["round"], kind, rec["actor"], rec.get("active_from")))
    if meta is None:
        raise ValueError("trace has no metadata record")
    return _replay(events, meta["n"], meta["delta"], meta["horizon"])


def schedule_events(scenario) -> list:
    """The sleep / wake / corrupt events the simulator will emit for ``scenario``."""
    sc = scenario
    rounds = sc.rounds
    corrupt_at = dict(sc.corruptions)
    intervals: dict = {}
    for v, a, b in sc.sleep:
        intervals.setdefault(v, []).append((a, b))

    def asleep(v, r):
        return any(a <= r and (b is None or r < b) for a, b in intervals.get(v, ()))

    events = []
    for v in range(sc.n):
        is_asleep = asleep(v, 0) and corrupt_at.get(v) != 0
        if is_asleep:
            events.append((0, "sleep", v, None))
        points = sorted({a for a, _ in intervals.get(v, ())} | {b for _, b in intervals.get(v, ()) if b is not None})
        for r in points:
            if r >= rounds:
                break
            if v in corrupt_at and corrupt_at[v] <= r:
                break
            now = asleep(v, r)
            if now and not is_asleep:
                events.append((r, "sleep", v, None))
            elif not now and is_asleep:
                events.append((r, "wake", v, join_round(r, sc.delta)))
            is_asleep = now
        if v in corrupt_at:
            events.append((corrupt_at[v], "corrupt", v, None))
    order = {"corrupt": 0, "sleep": 1, "wake": 2}
    events.sort(key=lambda e: (e[0], order[e[1]], e[2]))
    return events


def participation_from_schedule(scenario) -> ParticipationSets:
    return _replay(schedule_events(scenario), scenario.n, scenario.delta, scenario.horizon)


# ---------------------------------------------------------------- reports

@dataclass
class ComplianceReport:
    rows: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def compliant(self) -> bool:
        return all(r["pass"] for r in self.rows)

    @property
    def first_violation(self) -> Optional[int]:
        for r in self.rows:
            if not r["pass"]:
                return r["slot"]
        return None

    def row(self, slot: int, condition: Optional[str] = None) -> dict:
        for r in self.rows:
            if r["slot"] == slot and (condition is None or r["condition"] == condition):
                return r
        raise KeyError(slot)

    def to_json(self) -> dict:
        return {"params": self.params, "rows": self.rows,
                "overall": {"compliant": self.compliant, "first_violation": self.first_violation}}


def _lo(t: int, tau):
    return None if tau is INFINITY else t - tau


def _eq1_row(sets: ParticipationSets, t: int, tau) -> dict:
    h_prev = sets.h(t - 1)
    other = sets.a(t) | (sets.h_range(_lo(t, tau), t - 2) - h_prev)
    return {"slot": t, "condition": "sleepiness", "lhs": len(h_prev), "rhs": len(other),
            "pass": len(h_prev) > len(other)}


def check_tau_sleepiness(sets: ParticipationSets, tau, horizon: Optional[int] = None) -> ComplianceReport:
    """tau-sleepiness at every slot 1 <= t < horizon.  Slot 0 is skipped (H_{-1} is empty)."""
    tau = parse_eta(tau)
    horizon = sets.horizon if horizon is None else horizon
    rep = ComplianceReport(params={"tau": "inf" if tau is INFINITY else tau})
    for t in range(1, horizon):
        rep.rows.append(_eq1_row(sets, t, tau))
    return rep


def check_tau_pi_compliance(sets: ParticipationSets, tau, pi, tpa, horizon: Optional[int] = None) -> ComplianceReport:
    tau, pi = parse_eta(tau), parse_eta(pi)
    if tau is not INFINITY and (pi is INFINITY or tau <= pi):
        raise ComplianceParamError("(tau, pi)-compliance needs tau > pi or tau = pi = infinity")
    horizon = sets.horizon if horizon is None else horizon
    if tpa is None or (pi is not INFINITY and pi <= 1) or tpa[1] - tpa[0] <= 1:
        rep = check_tau_sleepiness(sets, tau, horizon)
        rep.params["pi"] = "inf" if pi is INFINITY else pi
        return rep
    t1, t2 = tpa
    rep = ComplianceReport(params={"tau": "inf" if tau is INFINITY else tau,
                                   "pi": "inf" if pi is INFINITY else pi, "tpa": [t1, t2]})
    length = t2 - t1
    rep.rows.append({"slot": t1, "condition": "tpa_length", "lhs": length,
                     "rhs": "inf" if pi is INFINITY else pi,
                     "pass": pi is INFINITY or length <= pi})
    base = sets.h(t1)
    for t in range(1, horizon):
        if t1 < t <= t2 + 1:
            left = base - sets.a(t)
            other = sets.a(t) | (sets.h_range(_lo(t, tau), t - 1) - base)
            rep.rows.append({"slot": t, "condition": "tpa_majority", "lhs": len(left),
                             "rhs": len(other), "pass": len(left) > len(other)})
        if not (t1 < t <= t2):
            rep.rows.append(_eq1_row(sets, t, tau))
    if t1 < sets.horizon:
        missing = base - sets.awake_merge[t1]
        rep.rows.append({"slot": t1, "condition": "awake_at_merge", "lhs": len(base) - len(missing),
                         "rhs": len(base), "pass": not missing})
    rep.rows.sort(key=lambda r: r["slot"])
    return rep


def aware_set(sets: ParticipationSets, tpa, rnd: int) -> frozenset:
    active = sets.active[rnd]
    if tpa is None:
        return active
    t1, t2 = tpa
    if t1 < slot_of(rnd, sets.delta) <= t2:
        return active & sets.h(t1)
    return active


def check_scenario(scenario, sets: Optional[ParticipationSets] = None, tau=None, pi=None) -> ComplianceReport:
    """Compliance at the scenario's declared (tau, pi), defaulting tau to eta."""
    sets = participation_from_schedule(scenario) if sets is None else sets
    tau = scenario.tau if tau is None else tau
    tau = scenario.eta if tau is None else tau
    pi = scenario.pi if pi is None else pi
    if pi is None or scenario.tpa is None:
        return check_tau_sleepiness(sets, tau)
    return check_tau_pi_compliance(sets, tau, pi, scenario.tpa)
