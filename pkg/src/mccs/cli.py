"""Command-line front end.

Subcommands: place, rate, table, sweep, simulate, verify. Run
``mccs <command> --help`` for flags.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .combinatorics import distinct_count, distinct_distribution
from .delivery import members, simulate
from .demand_oracle import DEFAULT_CAP, EnumerationCapExceeded, enumerate_expected_rate, monte_carlo_expected_rate
from .placement import (
    PlacementVector,
    ProblemInstance,
    case_rate_breakdown,
    check_feasible,
    critical_index,
    format_decimal,
    format_fraction,
    optimal_placement,
    rate_report,
    to_rational,
)
from .verification import SuiteConfig, cache_grid, run_suite

Record = Dict[str, Any]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parsing


def parse_int_range(text: str) -> List[int]:
    """``"7"``, ``"1:40"``, ``"1..40"`` or ``"1,2,5"``; ranges are inclusive."""
    text = text.strip()
    try:
        if "," in text:
            values = [int(t) for t in text.split(",")]
        else:
            for sep in ("..", ":"):
                if sep in text:
                    lo, hi = (int(t) for t in text.split(sep, 1))
                    values = list(range(lo, hi + 1))
                    break
            else:
                values = [int(text)]
    except ValueError as exc:
        raise UsageError(f"cannot parse integer range {text!r}") from exc
    if not values:
        raise UsageError(f"empty range {text!r}")
    return values


def parse_m_grid(text: Optional[str]):
    """Cache-size grid as a function of N.

    ``None`` or ``"quarter"``/``"half"``/``"integer"`` give 0..N at that step;
    ``"lo..hi"`` steps by 1, ``"lo..hi:step"`` by ``step``; a comma list is
    taken literally. Values outside [0, N] are dropped for each N.
    """
    steps = {None: Fraction(1, 4), "quarter": Fraction(1, 4), "half": Fraction(1, 2), "integer": Fraction(1)}
    if text in steps:
        step = steps[text]
        return lambda N: cache_grid(N, step)
    try:
        if ".." in text:
            lo_text, rest = text.split("..", 1)
            hi_text, _, step_text = rest.partition(":")
            lo, hi = to_rational(lo_text), to_rational(hi_text)
            step = to_rational(step_text) if step_text else Fraction(1)
            if step <= 0:
                raise UsageError("grid step must be positive")
            values = []
            v = lo
            while v <= hi:
                values.append(v)
                v += step
        else:
            values = [to_rational(t) for t in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse cache-size grid {text!r}") from exc
    return lambda N: [v for v in values if 0 <= v <= N]


def parse_demand(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse demand {text!r}; expected e.g. 1,1,2") from exc


def make_instance(args: argparse.Namespace) -> ProblemInstance:
    for name in ("N", "K", "M"):
        if getattr(args, name) is None:
            raise UsageError(f"--{name} is required")
    try:
        return ProblemInstance(args.N, args.K, to_rational(args.M))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------- rendering


def _cell(value: Any, args: argparse.Namespace, json_mode: bool = False) -> Any:
    if isinstance(value, bool):
        return value if json_mode else str(value).lower()
    if isinstance(value, Fraction):
        if args.exact:
            if json_mode:
                return {"num": value.numerator, "den": value.denominator}
            return format_fraction(value)
        text = format_decimal(value, args.places)
        return float(text) if json_mode else text
    if isinstance(value, (list, tuple)):
        if json_mode:
            return [_cell(v, args, True) for v in value]
        return " ".join(str(_cell(v, args)) for v in value)
    return value


def render(records: List[Record], args: argparse.Namespace) -> str:
    if args.format == "json":
        payload = [{k: _cell(v, args, True) for k, v in r.items()} for r in records]
        return json.dumps(payload if len(payload) != 1 else payload[0], indent=2) + "\n"
    if args.format == "csv":
        buf = io.StringIO()
        fields: List[str] = []
        for r in records:
            fields.extend(k for k in r if k not in fields)
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for r in records:
            writer.writerow({k: _cell(v, args) for k, v in r.items()})
        return buf.getvalue()
    lines = []
    for i, r in enumerate(records):
        if i:
            lines.append("")
        width = max(len(k) for k in r)
        for k, v in r.items():
            if isinstance(v, Fraction) and not args.exact and v.denominator != 1:
                shown = f"{format_decimal(v, args.places)} ({format_fraction(v)})"
            else:
                shown = _cell(v, args)
            lines.append(f"{k.ljust(width)}  {shown}")
    return "\n".join(lines) + "\n"


def emit(text: str, args: argparse.Namespace) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def placement_record(inst: ProblemInstance, a: PlacementVector) -> Record:
    rec: Record = {"N": inst.N, "K": inst.K, "M": inst.M, "mu": inst.mu, "mu_K": inst.mu * inst.K}
    rec["l_star"] = critical_index(inst) if 0 < inst.mu else ""
    for l, v in enumerate(a):
        rec[f"a_{l}"] = v
    rec["support"] = a.support()
    rec["cache_usage"] = a.cache_usage()
    rec["feasible"] = bool(check_feasible(inst, a))
    report = rate_report(inst, a)
    rec["expected_rate"] = report.expected_rate
    rec["peak_rate_mccs"] = report.peak_rate_mccs
    rec["peak_rate_ccs"] = report.peak_rate_ccs
    return rec


def cmd_place(args: argparse.Namespace) -> int:
    inst = make_instance(args)
    emit(render([placement_record(inst, optimal_placement(inst))], args), args)
    return 0


def cmd_rate(args: argparse.Namespace) -> int:
    inst = make_instance(args)
    if args.placement:
        try:
            a = PlacementVector(t for t in args.placement.split(","))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        report = check_feasible(inst, a)
        if not report:
            raise UsageError("infeasible placement: " + "; ".join(report.violations))
        optimal = False
    else:
        a, optimal = optimal_placement(inst), True
    rep = rate_report(inst, a)
    rec: Record = {"N": inst.N, "K": inst.K, "M": inst.M, "placement": list(a)}
    rec["expected_rate"] = rep.expected_rate
    try:
        rec["enumerated_rate"] = enumerate_expected_rate(inst, a, cap=args.cap)
    except EnumerationCapExceeded:
        rec["enumerated_rate"] = ""
    if args.trials:
        mc = monte_carlo_expected_rate(inst, a, args.trials, args.seed)
        rec["mc_mean"] = round(mc.mean, 9)
        rec["mc_stderr"] = round(mc.stderr, 9)
        rec["mc_trials"] = mc.trials
        rec["mc_seed"] = mc.seed
    rec["peak_rate_mccs"] = rep.peak_rate_mccs
    rec["peak_rate_ccs"] = rep.peak_rate_ccs
    probs = distinct_distribution(inst.N, inst.K).probabilities
    for n, r in rep.per_distinct_rates.items():
        rec[f"P_{n}"] = probs[n]
        rec[f"rate_{n}"] = r
        if optimal and 0 < inst.mu < 1:
            rec[f"regime_{n}"] = case_rate_breakdown(inst, n)[1]
    emit(render([rec], args), args)
    return 0


def cmd_table(args: argparse.Namespace) -> int:
    if args.N is None or args.K is None:
        raise UsageError("--N and --K are required")
    records = []
    for M in range(args.N + 1):
        a = optimal_placement(ProblemInstance(args.N, args.K, M))
        rec: Record = {"M": M}
        for l, v in enumerate(a):
            rec[f"a_{l}"] = v
        records.append(rec)
    emit(render(records, args), args)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.N is None or args.M is None:
        raise UsageError("--N and --M are required")
    Ks = parse_int_range(args.K or "1:40")
    M = to_rational(args.M)
    records = []
    for K in Ks:
        try:
            inst = ProblemInstance(args.N, K, M)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        a = optimal_placement(inst)
        rep = rate_report(inst, a)
        muK = inst.mu * K
        records.append(
            {
                "K": K,
                "N": args.N,
                "M": M,
                "mu_K": muK,
                "equal_partition": muK.denominator == 1,
                "support": a.support(),
                "expected_rate": rep.expected_rate,
                "ccs_rate": rep.peak_rate_ccs,
                "peak_rate_mccs": rep.peak_rate_mccs,
                "peak_rate_ccs": rep.peak_rate_ccs,
            }
        )
    emit(render(records, args), args)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    inst = make_instance(args)
    if not args.demand:
        raise UsageError("--demand is required, e.g. --demand 1,1,2")
    demand = parse_demand(args.demand)
    if len(demand) != inst.K or any(not 1 <= n <= inst.N for n in demand):
        raise UsageError(f"demand must list {inst.K} file indices in 1..{inst.N}")
    a = optimal_placement(inst)
    result = simulate(inst, a, demand, seed=args.seed, multiplier=args.multiplier)
    tr = result.transcript
    if args.transcript:
        emit(tr.to_text(), args)
        return 0 if result.ok else 1
    if args.format == "plain":
        lines = [
            f"instance      N={inst.N} K={inst.K} M={inst.M}",
            f"placement     {a}",
            f"demand        {','.join(map(str, demand))} ({distinct_count(demand)} distinct)",
            f"leaders       {{{','.join(map(str, members(tr.leader_set)))}}}",
            f"file bits     {tr.file_size} (seed {args.seed})",
            f"messages      {len(tr.messages)}",
        ]
        for msg in tr.messages:
            lines.append(f"  {{{','.join(map(str, members(msg.subset)))}}}  {msg.length} bits")
        lines.append(f"load          {format_fraction(result.load)} (expected {format_fraction(result.expected_load)})")
        for k in sorted(result.decoded):
            verdict = "ok" if result.decoded[k] else "FAILED: " + result.failures[k]
            lines.append(f"user {k}        decodes file {demand[k - 1]}: {verdict}")
        emit("\n".join(lines) + "\n", args)
    else:
        records = [
            {
                "subset": list(members(m.subset)),
                "level": m.level,
                "bits": m.length,
                "payload_hex": format(m.payload, f"0{max(1, (m.length + 3) // 4)}x"),
            }
            for m in tr.messages
        ]
        if args.format == "json":
            doc = {
                "demand": demand,
                "leaders": list(members(tr.leader_set)),
                "file_bits": tr.file_size,
                "seed": args.seed,
                "messages": records,
                "total_bits": tr.total_bits,
                "load": _cell(result.load, args, True),
                "decoded": {str(k): v for k, v in result.decoded.items()},
            }
            emit(json.dumps(doc, indent=2) + "\n", args)
        else:
            emit(render(records, args) if records else "subset,level,bits,payload_hex\n", args)
    return 0 if result.ok else 1


def cmd_verify(args: argparse.Namespace) -> int:
    Ks, Ns, m_text = args.K, args.N, args.M
    for token in args.grid or []:
        key, _, value = token.partition("=")
        if key == "K":
            Ks = value
        elif key == "N":
            Ns = value
        elif key == "M":
            m_text = value
        else:
            raise UsageError(f"unknown grid key {key!r}; use K=, N= or M=")
    cfg = SuiteConfig(
        Ks=parse_int_range(str(Ks) if Ks is not None else "1:8"),
        Ns=parse_int_range(str(Ns) if Ns is not None else "1:8"),
        grid=parse_m_grid(m_text),
        cap=args.cap,
        sim_cap=args.sim_cap,
        seed=args.seed,
        inject_fault=args.inject_fault,
    )
    result = run_suite(cfg)
    if args.format == "json":
        emit(json.dumps(result.summary(), indent=2) + "\n", args)
    else:
        lines = []
        for t in result.tallies.values():
            status = "PASS" if t.passed else "FAIL"
            lines.append(f"{status}  {t.name:<26} runs={t.runs} failures={len(t.failures)}")
        for f in result.failures[: args.max_failures]:
            lines.append(f"  {f.check}: [{f.witness}] {f.detail}")
        hidden = len(result.failures) - args.max_failures
        if hidden > 0:
            lines.append(f"  ... {hidden} more failures")
        lines.append("verification " + ("passed" if result.passed else "FAILED"))
        emit("\n".join(lines) + "\n", args)
    return 0 if result.passed else 1


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mccs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, default_format: str = "plain", cap: int = DEFAULT_CAP) -> None:
        p.add_argument("--format", choices=("csv", "json", "plain"), default=default_format)
        p.add_argument("--places", type=int, default=3, help="decimal places for rounded output")
        p.add_argument("--exact", action="store_true", help="render rationals exactly as p/q")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cap", type=int, default=cap, help=f"max demand vectors to enumerate (default {cap})")
        p.add_argument("--out", help="write output to this path instead of stdout")

    def instance(p: argparse.ArgumentParser, need_m: bool = True) -> None:
        p.add_argument("--K", type=int, help="number of users")
        p.add_argument("--N", type=int, help="number of files")
        if need_m:
            p.add_argument("--M", help="cache size in files, e.g. 2, 3/2 or 0.25")

    p = sub.add_parser("place", help="optimal placement for one instance")
    instance(p)
    common(p)
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("rate", help="expected and peak rates of a placement")
    instance(p)
    p.add_argument("--placement", help="comma-separated a_0..a_K (default: optimal)")
    p.add_argument("--trials", type=int, default=0, help="also run a Monte Carlo estimate")
    common(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("table", help="optimal placement for M = 0..N")
    instance(p, need_m=False)
    common(p, "csv")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sweep", help="rates versus number of users")
    p.add_argument("--K", help="user range, e.g. 1:40")
    p.add_argument("--N", type=int)
    p.add_argument("--M")
    common(p, "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="bit-exact delivery for one demand")
    instance(p)
    p.add_argument("--demand", help="requested file per user, e.g. 1,1,2")
    p.add_argument("--multiplier", type=int, default=1, help="scale the minimal file size")
    p.add_argument("--transcript", action="store_true", help="print the transcript export")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="cross-oracle verification over a grid")
    p.add_argument("--K", help="user range (default 1:8)")
    p.add_argument("--N", help="file range (default 1:8)")
    p.add_argument("--M", help="cache grid: quarter | half | integer | lo..hi[:step] | list")
    p.add_argument("--grid", nargs="+", metavar="KEY=VALUE", help="e.g. K=7 N=10 M=0..10")
    p.add_argument("--sim-cap", type=int, default=1024, help="max demands for the delivery sweep")
    p.add_argument("--inject-fault", action="store_true", help="perturb one a_l by 1/1000")
    p.add_argument("--max-failures", type=int, default=20)
    common(p, cap=10**6)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "places", 3) < 1:
        parser.error("--places must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    return 2


if __name__ == "__main__":
    sys.exit(main())
