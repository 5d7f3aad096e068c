"""Command-line entry point: ``sdicov {bench,verify,gen,trace}``.

Exit codes: 0 on success, 1 on malformed input, IO errors or failed
verification, 2 when ``bench`` finds an optimizer that failed every trial.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .bench import (
    BenchConfig,
    ProblemSpec,
    build_problem,
    cmd_bench,
    fmt_float,
    format_report,
    make_config,
    parse_config_text,
    write_text,
)
from .errors import ConfigError
from .optimizers import OPTIMIZERS
from .problems import DEFAULT_EDGE_FRACTION, format_instance, generate_distg
from .verify import MAX_DENSE_SIZE, SUITES, run_suite

TRACE_COLUMNS = ("k", "f", "grad_norm", "alpha", "ls_status", "f_evals", "g_evals")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--tol", type=float, help="relative gradient tolerance")
    p.add_argument("--ls-c", type=float, dest="ls_c", help="line search slope fraction c")
    p.add_argument("--edge-fraction", type=float, dest="edge_fraction")
    p.add_argument("--noise", type=float)
    p.add_argument("--max-iterations", type=int, dest="max_iterations")
    p.add_argument("--format", choices=("csv", "markdown"), dest="output_format")
    p.add_argument("--out", help="write output here instead of standard output")
    p.add_argument("--no-timestamp", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdicov", description="Steepest descent with iterated change of variables: benchmarks, checks and traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run optimizer/problem matrices over seeded trials")
    _add_common(b)
    b.add_argument("--problems", help="comma-separated kind:size list, e.g. distg:10,distg:100")
    b.add_argument("--optimizers", help=f"comma-separated subset of {','.join(OPTIMIZERS)}")
    b.add_argument("--jobs", type=int, help="worker processes")

    v = sub.add_parser("verify", help="check theorems on seeded random quadratics")
    v.add_argument("suite", choices=SUITES)
    v.add_argument("--size", type=int, default=10, help=f"dimension, at most {MAX_DENSE_SIZE}")
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--kappa", type=float, default=1e3, help="condition number of the quadratics")

    g = sub.add_parser("gen", help="write a problem instance")
    g.add_argument("kind", choices=("distg",))
    g.add_argument("--particles", type=int, default=10)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--edge-fraction", type=float, default=DEFAULT_EDGE_FRACTION, dest="edge_fraction")
    g.add_argument("--out")

    t = sub.add_parser("trace", help="per-iteration CSV for one run")
    _add_common(t)
    t.add_argument("--problem", required=True, help="kind:size")
    t.add_argument("--optimizer", default="sdicov", choices=tuple(OPTIMIZERS))
    return parser


def _split(v: str | None) -> tuple | None:
    return None if v is None else tuple(s.strip() for s in v.split(",") if s.strip())


def config_from_args(args) -> BenchConfig:
    file_values = {}
    if args.config:
        try:
            file_values = parse_config_text(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    overrides = {k: getattr(args, k, None) for k in
                 ("seed", "trials", "tol", "ls_c", "edge_fraction", "noise", "max_iterations",
                  "output_format", "jobs")}
    problems = _split(getattr(args, "problems", None))
    if problems is not None:
        overrides["problems"] = tuple(ProblemSpec.parse(s) for s in problems)
    overrides["optimizers"] = _split(getattr(args, "optimizers", None))
    if args.no_timestamp:
        overrides["timestamp"] = False
    return make_config(file_values, overrides)


def _bench(args) -> int:
    report = cmd_bench(config_from_args(args))
    write_text(format_report(report), args.out)
    return report.exit_code


def _verify(args) -> int:
    try:
        result = run_suite(args.suite, args.size, args.trials, args.seed, args.kappa)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(result.summary())
    return 0 if result.passed else 1


def _gen(args) -> int:
    if args.particles < 3:
        raise ConfigError("need at least 3 particles")
    if not 0.0 < args.edge_fraction <= 1.0:
        raise ConfigError("edge fraction must lie in (0, 1]")
    inst = generate_distg(args.particles, args.edge_fraction, args.seed)
    write_text(format_instance(inst), args.out)
    return 0


def trace_csv(spec: ProblemSpec, optimizer: str, seed: int, config: BenchConfig) -> str:
    bundle, ls = build_problem(spec, seed, config)
    run = OPTIMIZERS[optimizer](bundle.oracle, bundle.x0, ls, config.termination)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerow([0, fmt_float(run.initial_f), fmt_float(run.initial_grad_norm), "", "", 1, 1])
    for r in run.records:
        w.writerow([r.k, fmt_float(r.f_value), fmt_float(r.grad_norm), fmt_float(r.alpha),
                    str(r.ls_status), r.f_evals, r.g_evals])
    return out.getvalue()


def _trace(args) -> int:
    config = config_from_args(args)
    spec = ProblemSpec.parse(args.problem)
    write_text(trace_csv(spec, args.optimizer, config.seed, config), args.out)
    return 0


_COMMANDS = {"bench": _bench, "verify": _verify, "gen": _gen, "trace": _trace}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; 2 is reserved for bench failures here
        return 0 if exc.code == 0 else 1
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
