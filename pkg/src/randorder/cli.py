"""randorder: random-order online GAP and fractional knapsack experiments.

Exit codes: 0 success, 1 runtime or check failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import checks, harness
from .model import (
    GapInstance,
    KnapsackInstance,
    generate_from_spec,
    load_instance,
    save_instance,
)
from .offline import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    fractional_greedy,
    solve_fractional_gap,
    solve_integral_gap_bruteforce,
    solve_integral_knapsack_bruteforce,
)

BUDGET_ENV = "RANDORDER_BUDGET"


class UsageError(Exception):
    pass


def _default_budget() -> int:
    return int(os.environ.get(BUDGET_ENV, DEFAULT_BUDGET))


def _emit(data: bytes, out: str | None):
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def cmd_generate(args) -> int:
    specs = [(k, getattr(args, k.replace("-", "_"))) for k in ("gap", "knapsack", "unit-iid")]
    chosen = [(k, v) for k, v in specs if v]
    if len(chosen) != 1:
        raise UsageError("choose exactly one of --gap, --knapsack, --unit-iid")
    kind, tokens = chosen[0]
    try:
        inst = generate_from_spec(" ".join([kind, *tokens]), args.seed)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    data = save_instance(inst)
    _emit(data, args.out)
    print(f"instance {harness.digest(data)}", file=sys.stderr if not args.out else sys.stdout)
    return 0


def cmd_solve(args) -> int:
    inst = load_instance(Path(args.instance).read_bytes())
    budget = args.budget or _default_budget()
    if args.which == "fractional":
        if isinstance(inst, KnapsackInstance):
            sol = fractional_greedy(inst)
            value, payload = sol.objective, {"fractions": [str(x) for x in sol.fractions]}
        else:
            sol = solve_fractional_gap(inst)
            value = sol.objective
            payload = {"primal": [[str(x) for x in r] for r in sol.primal.entries]}
    else:
        try:
            if isinstance(inst, KnapsackInstance):
                value, payload = solve_integral_knapsack_bruteforce(inst, budget), {}
            else:
                x, value = solve_integral_gap_bruteforce(inst, budget)
                payload = {"assignment": [list(r) for r in x.entries]}
        except BudgetExceeded as exc:
            print(f"error: {exc} (budget {budget}; raise --budget or ${BUDGET_ENV})", file=sys.stderr)
            return 1
    print(f"{args.which} optimum: {value} ({float(value):.10g})")
    if args.out:
        payload.update(which=args.which, objective=str(value))
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


_CONFIG_KEYS = {"instance", "algorithm", "mode", "trials", "seed", "t", "arithmetic", "budget",
                "workers", "format", "out"}


def cmd_run(args) -> int:
    conf: dict = {}
    if args.config:
        conf = json.loads(Path(args.config).read_text())
        unknown = conf.keys() - _CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
    for key in _CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            conf[key] = val
    fmt = conf.pop("format", "json")
    out = conf.pop("out", None)
    conf.setdefault("budget", _default_budget())
    if "instance" not in conf or "algorithm" not in conf:
        raise UsageError("run needs --instance and --algorithm (or a --config file)")
    config = harness.ExperimentConfig(**conf)
    try:
        config.validate()
    except harness.BadArguments as exc:
        raise UsageError(str(exc)) from exc
    report = harness.run_experiment(config)
    _emit(harness.write_report(report, fmt), out)
    summary = sys.stdout if out else sys.stderr
    head = report.get("exact") or report.get("mc")
    value = head.get("expected_value", head.get("mean"))
    print(f"{config.algorithm} [{config.mode}] value {value:.6g}, optimum {report['optimum']['value']:.6g}"
          + (" (conservative ratio)" if report["optimum"]["conservative_ratio"] else ""), file=summary)
    for name, b in sorted(report["bounds"].items()):
        if b["passed"] is not None:
            print(f"  bound {name}: {b['value']:.6g} {'PASS' if b['passed'] else 'FAIL'} "
                  f"margin {b['margin']:.6g}", file=summary)
    for chk in report["lemma_checks"]:
        print(f"  check {chk['name']}: {'PASS' if chk['passed'] else 'FAIL'} ({chk['checked']} cases)",
              file=summary)
    return 0


def cmd_verify(args) -> int:
    res = checks.run_suite(args.suite, args.trials, args.seed)
    print(f"{res.name}: {'PASS' if res.passed else 'FAIL'} "
          f"({res.checked} cases, {res.failure_count} failures)")
    if not res.passed:
        first = dict(res.failures[0])
        first.pop("data", None)
        print("counterexample:", json.dumps(first, sort_keys=True))
    if args.out:
        Path(args.out).write_text(json.dumps(res.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0 if res.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randorder", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated instance file")
    g.add_argument("--gap", nargs="+", metavar="KEY=VALUE")
    g.add_argument("--knapsack", nargs="+", metavar="KEY=VALUE")
    g.add_argument("--unit-iid", nargs="+", metavar="KEY=VALUE")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="offline optimum of an instance")
    s.add_argument("instance")
    s.add_argument("--which", choices=("fractional", "integral"), default="fractional")
    s.add_argument("--budget", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("run", help="run an experiment and write its report")
    r.add_argument("--config")
    r.add_argument("--instance", help="instance file or generator spec, e.g. 'gap n=6 m=2'")
    r.add_argument("--algorithm", choices=harness.ALGORITHMS)
    r.add_argument("--mode", choices=("exact", "mc"))
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--t", type=int)
    r.add_argument("--arithmetic", choices=("float", "rational"))
    r.add_argument("--format", choices=("json", "csv"))
    r.add_argument("--out")
    r.add_argument("--workers", type=int)
    r.add_argument("--budget", type=int)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a property battery")
    v.add_argument("suite", choices=checks.SUITES)
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
