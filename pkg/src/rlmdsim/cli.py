"""Command line entry point: run scenarios, batch trials, generate attacks, check traces.

Exit codes: 0 all expected verdicts hold, 1 a verdict differs from the
expectation, 2 invalid input, 3 I/O failure.  ``RLMDSIM_LOG`` sets the log
level (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

from .adversary import BUILDERS, AttackParamError, random_compliant_from_template
from .compliance import ComplianceParamError, check_scenario, check_tau_pi_compliance, check_tau_sleepiness, \
    participation_sets
from .forkchoice import parse_eta
from .netsim import Trace, run
from .properties import FAIL, check_all, summary_stats
from .scenario import Scenario, ScenarioError

log = logging.getLogger("rlmdsim")

EXIT_OK, EXIT_MISMATCH, EXIT_INVALID, EXIT_IO = 0, 1, 2, 3


class CliIOError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("RLMDSIM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliIOError(f"cannot read {path}: {exc}") from exc


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliIOError(f"cannot write {path}: {exc}") from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- expectations

def default_expectation(scenario: Scenario) -> dict:
    """What the positive results promise for a compliant random execution."""
    if scenario.tpa is not None:
        props = {"asynchrony_resilience": "pass"}
    else:
        props = {"safety": "pass", "liveness": "pass", "reorg_resilience": "pass", "view_merge": "pass"}
    if scenario.variant == "fast_confirm":
        props["fast_confirm"] = "pass"
    return {"compliant": True, "properties": props}


def mismatches(expected: dict, compliant: bool, verdicts: dict) -> list:
    out = []
    if "compliant" in expected and bool(expected["compliant"]) != compliant:
        out.append(f"compliant: expected {expected['compliant']}, got {compliant}")
    for name, want in sorted((expected.get("properties") or {}).items()):
        got = verdicts.get(name)
        status = got.status if got is not None else "absent"
        if want == "fail":
            ok = status == FAIL
        elif want == "pass":
            ok = got is not None and status != FAIL
        else:
            ok = status == want
        if not ok:
            out.append(f"{name}: expected {want}, got {status}")
    return out


# ---------------------------------------------------------------- core pipeline

def execute(scenario: Scenario) -> dict:
    ex = run(scenario)
    sets = participation_sets(ex.trace)
    compliance = check_scenario(scenario, sets)
    verdicts = check_all(ex.trace, scenario.liveness_window)
    return {"trace": ex.trace, "compliance": compliance, "verdicts": verdicts,
            "summary": summary_stats(ex.trace)}


def cmd_run(args) -> int:
    scenario = Scenario.loads(_read_text(args.scenario))
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    res = execute(scenario)
    expected = scenario.expected or {}
    bad = mismatches(expected, res["compliance"].compliant, res["verdicts"])
    out = Path(args.out)
    _write_text(out / "trace.ndjson", res["trace"].dumps())
    _write_text(out / "compliance.json", _dump(res["compliance"].to_json()))
    report = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "properties": {k: v.to_json() for k, v in sorted(res["verdicts"].items())},
        "summary": res["summary"],
        "expected": expected,
        "mismatches": bad,
    }
    _write_text(out / "properties.json", _dump(report))
    for line in bad:
        log.error("unexpected verdict: %s", line)
    print(f"{scenario.name or args.scenario}: compliant={res['compliance'].compliant} "
          + " ".join(f"{k}={v.status}" for k, v in sorted(res["verdicts"].items())))
    return EXIT_MISMATCH if bad else EXIT_OK


def run_trials(template: Scenario, trials: int, seed_base: int) -> tuple:
    """Rows of per-trial results and the number of trials with a mismatch."""
    rows, failures = [], 0
    names = None
    for seed in range(seed_base, seed_base + trials):
        sc = random_compliant_from_template(template, seed)
        expected = template.expected or default_expectation(sc)
        res = execute(sc)
        verdicts = res["verdicts"]
        bad = mismatches(expected, res["compliance"].compliant, verdicts)
        failures += bool(bad)
        names = names or sorted(verdicts)
        row = {"seed": seed, "compliant": res["compliance"].compliant}
        row.update({k: verdicts[k].status if k in verdicts else "" for k in names})
        row.update({"pivot_slots": res["summary"]["pivot_slots"], "reorgs": res["summary"]["reorgs"],
                    "ok": not bad})
        rows.append(row)
        log.info("trial seed=%d ok=%s %s", seed, not bad, "; ".join(bad))
    return rows, failures


def cmd_trials(args) -> int:
    if args.n <= 0:
        raise ScenarioError("--n must be a positive number of trials")
    template = Scenario.loads(_read_text(args.template))
    rows, failures = run_trials(template, args.n, args.seed_base)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.csv:
        _write_text(Path(args.csv), buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    print(f"trials={args.n} failures={failures}", file=sys.stderr)
    return EXIT_MISMATCH if failures else EXIT_OK


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_gen_attack(args) -> int:
    if args.strategy not in BUILDERS:
        raise AttackParamError(f"unknown strategy {args.strategy!r}; choose from {sorted(BUILDERS)}")
    params = {}
    for key in ("m", "n", "k", "N", "t", "kappa", "seed", "delta"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    for key in ("eta", "tau", "pi"):
        val = getattr(args, key)
        if val is not None:
            params[key] = parse_eta(val)
    for item in args.param or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise AttackParamError(f"--param expects key=value, got {item!r}")
        params[key] = _parse_value(val)
    try:
        scenario = BUILDERS[args.strategy](**params)
    except TypeError as exc:
        raise AttackParamError(f"unsupported parameter for {args.strategy}: {exc}") from exc
    text = scenario.dumps() + "\n"
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        trace = Trace.loads(_read_text(args.trace))
        sets = participation_sets(trace)
    except (ValueError, KeyError) as exc:
        raise ScenarioError(f"malformed trace: {exc}") from exc
    meta = trace.meta
    tpa = tuple(meta["tpa"]) if meta.get("tpa") else None
    if args.pi is None or tpa is None:
        rep = check_tau_sleepiness(sets, args.tau)
    else:
        rep = check_tau_pi_compliance(sets, args.tau, args.pi, tpa)
    verdicts = check_all(trace, args.t_conf)
    report = {"compliance": rep.to_json(),
              "properties": {k: v.to_json() for k, v in sorted(verdicts.items())}}
    text = _dump(report)
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if rep.compliant else EXIT_MISMATCH


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rlmdsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute one scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("trials", help="batch of random compliant executions")
    p.add_argument("template")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed-base", type=int, default=0)
    p.add_argument("--csv", help="write the CSV summary here instead of stdout")
    p.set_defaults(func=cmd_trials)

    p = sub.add_parser("gen-attack", help="emit a scenario file for a scripted attack")
    p.add_argument("strategy")
    for name in ("m", "n", "k", "N", "t", "kappa", "seed", "delta"):
        p.add_argument(f"--{name}", type=int)
    for name in ("eta", "tau", "pi"):
        p.add_argument(f"--{name}")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_attack)

    p = sub.add_parser("check", help="compliance and property report for a trace file")
    p.add_argument("trace")
    p.add_argument("--tau", required=True)
    p.add_argument("--pi")
    p.add_argument("--t-conf", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliIOError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ScenarioError, ComplianceParamError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
