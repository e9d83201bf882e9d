"""Command line front end.

Subcommands: parse, simulate, sweep, clock, baker, lift. All randomness
flows from one seeded generator, so a fixed seed reproduces outputs
byte for byte.
"""

import argparse
import os
import random
import sys

from . import analysis, constructions, digraph, parsing, system
from .rational import format_rational, parse_rational


def _read(path):
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _parse_x0(text):
    parts = [p for p in text.replace(",", " ").split() if p]
    return system.SimplexVector(parse_rational(p) for p in parts)


def _default_workers():
    env = os.environ.get("MISDYN_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def cmd_parse(args):
    try:
        graphs = digraph.read_sequence_text(_read(args.input))
    except digraph.SequenceFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    tree = parsing.parse(graphs)
    dump = tree.dump()
    if args.dump:
        _write(args.dump, dump)
    else:
        sys.stdout.write(dump)
    if args.dot:
        _write(args.dot, tree.to_dot())
    print(f"leaves={tree.length} depth={tree.depth()}")
    return 0


def cmd_simulate(args):
    try:
        sys_ = system.read_mis_config(_read(args.input))
    except system.ConfigFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.delta is not None:
        sys_ = sys_.with_delta(parse_rational(args.delta))
    x0 = _parse_x0(args.x0)
    try:
        if args.mode == "dyadic":
            # Lossy arithmetic: report the trace-level verdict only; the
            # exactness-based certificates need exact rationals.
            trace = system.orbit(
                sys_, x0, args.horizon, mode="dyadic", dyadic_bits=args.dyadic_bits
            )
            if isinstance(trace.verdict, system.Periodic):
                summary = (
                    f"verdict=periodic transient={trace.verdict.transient} "
                    f"period={trace.verdict.period}"
                )
            else:
                summary = "verdict=unresolved"
            if trace.inexact:
                summary += " inexact=1"
        else:
            verdict, trace = analysis.detect_period(
                sys_,
                x0,
                args.horizon,
                mode=args.mode,
                bit_cap=args.bit_cap,
                return_trace=True,
            )
            bits = [f"verdict={verdict.status}"]
            if verdict.transient is not None:
                bits.append(f"transient={verdict.transient}")
            if verdict.period is not None:
                bits.append(f"period={verdict.period}")
            if verdict.tau_block is not None:
                bits.append(f"tau={format_rational(verdict.tau_block)}")
            summary = " ".join(bits)
    except system.NoCellMatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except system.BitSizeExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            system.write_trace_csv(trace, fh, exact=not args.decimal)
    print(summary)
    return 0


def cmd_sweep(args):
    try:
        sys_ = system.read_mis_config(_read(args.input))
    except system.ConfigFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.include_endpoints:
        inner = analysis.interior_grid(sys_.omega, args.grid_points - 2)
        grid = [-sys_.omega] + inner + [sys_.omega]
    else:
        grid = analysis.interior_grid(sys_.omega, args.grid_points)
    rng = random.Random(args.seed)
    samples = [
        system.sample_simplex(rng, sys_.n, denominator=args.denominator)
        for _ in range(args.samples)
    ]
    report = analysis.delta_sweep(
        sys_, grid, samples, args.horizon, workers=args.workers
    )
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        report.write_csv(fh)
    print(
        f"cells={len(report.entries)} resolved={report.resolved_fraction():.4f} "
        f"unresolved={report.unresolved_fraction():.4f}"
    )
    return 0


def cmd_clock(args):
    try:
        verdict = constructions.measure_clock_period(args.levels, args.horizon)
    except constructions.ClockBuildError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.trace:
        sys_, x0 = constructions.build_clock(args.levels)
        trace = system.orbit(sys_, x0, min(args.horizon, args.trace_steps))
        with open(args.trace, "w", encoding="utf-8", newline="\n") as fh:
            system.write_trace_csv(trace, fh, exact=not args.decimal)
    if verdict.status == analysis.EXACT_PERIODIC:
        print(f"period={verdict.period} transient={verdict.transient}")
    else:
        print(f"unresolved horizon={args.horizon}")
    return 0


def cmd_baker(args):
    sys_, sampler = constructions.build_baker()
    if args.delta is not None:
        sys_ = sys_.with_delta(parse_rational(args.delta))
    if args.x0:
        x0 = _parse_x0(args.x0)
    else:
        x0 = sampler(random.Random(args.seed))
    trace = system.orbit(sys_, x0, args.steps, mode="capped", bit_cap=args.bit_cap)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("step,cell,z\n")
        for t, state in enumerate(trace.states[:-1]):
            cell = trace.itinerary[t]
            cell_txt = "D" if cell is system.ON_DISCONTINUITY else str(cell)
            _, z = constructions.baker_coordinates(state)
            z_txt = format_rational(z) if not args.decimal else repr(float(z))
            fh.write(f"{t},{cell_txt},{z_txt}\n")
    print(f"steps={len(trace.itinerary)} out={args.out}")
    return 0


def _read_lift_config(text):
    n = None
    xi = threshold = None
    blocks = {}
    pending = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if pending is not None:
            name, values = pending
            values.extend(parse_rational(tok) for tok in line.split())
            if len(values) >= n * n:
                blocks[name] = values[: n * n]
                pending = None
            continue
        if line.startswith("n="):
            n = int(line[2:])
        elif line.startswith("xi:"):
            xi = [parse_rational(t) for t in line[3:].split()]
        elif line.startswith("threshold:"):
            threshold = parse_rational(line[len("threshold:"):].strip())
        elif line.startswith("A:") or line.startswith("B:"):
            name = line[0]
            values = [parse_rational(t) for t in line[2:].split()]
            if len(values) >= n * n:
                blocks[name] = values[: n * n]
            else:
                pending = (name, values)
        else:
            raise ValueError(f"line {lineno}: unrecognized line {line!r}")
    if n is None or xi is None or threshold is None or set(blocks) != {"A", "B"}:
        raise ValueError("lift input needs n=, xi:, threshold:, A: and B:")
    def matrix(name):
        vals = blocks[name]
        return system.StochasticMatrix(
            [vals[i * n : (i + 1) * n] for i in range(n)]
        )
    return matrix("A"), matrix("B"), xi, threshold


def cmd_lift(args):
    try:
        a, b, xi, threshold = _read_lift_config(_read(args.input))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lifted = system.kronecker_variance_lift(a, b, xi, threshold)
    _write(args.out, system.write_mis_config(lifted))
    print(f"n={lifted.n} out={args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="misdyn")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a digraph sequence into its tree")
    p.add_argument("input")
    p.add_argument("--dump", help="write the indented tree dump here")
    p.add_argument("--dot", help="write a DOT rendering here")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("simulate", help="simulate a system config")
    p.add_argument("input")
    p.add_argument("--x0", required=True, help="comma separated rationals")
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--delta", help="override the config delta")
    p.add_argument("--trace", help="write a step/cell/state CSV here")
    p.add_argument("--decimal", action="store_true", help="CSV as floats")
    p.add_argument("--mode", choices=("exact", "capped", "dyadic"), default="capped")
    p.add_argument("--bit-cap", type=int, default=system.DEFAULT_BIT_CAP)
    p.add_argument("--dyadic-bits", type=int, default=53)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="delta sweep with period verdicts")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--grid-points", type=int, default=64)
    p.add_argument("--include-endpoints", action="store_true")
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--denominator", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("clock", help="measure the stacked clock period")
    p.add_argument("--levels", type=int, default=0)
    p.add_argument("--horizon", type=int, default=10_000)
    p.add_argument("--trace", help="write a trace CSV here")
    p.add_argument("--trace-steps", type=int, default=256)
    p.add_argument("--decimal", action="store_true")
    p.set_defaults(func=cmd_clock)

    p = sub.add_parser("baker", help="run the chaotic five-state system")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--x0", help="explicit start (comma separated rationals)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta")
    p.add_argument("--out", required=True)
    p.add_argument("--decimal", action="store_true")
    p.add_argument("--bit-cap", type=int, default=system.DEFAULT_BIT_CAP)
    p.set_defaults(func=cmd_baker)

    p = sub.add_parser("lift", help="lift a variance-threshold pair of matrices")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lift)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
