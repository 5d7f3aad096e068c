"""Benchmark harness: run optimizer x problem x seed matrices and tabulate.

Problem specs are strings ``kind:size``:

``distg:N``
    distance geometry with ``N`` particles, bisection line search.
``quadratic:N``
    seeded random SPD quadratic of dimension ``N`` (log-uniform spectrum on
    ``[1, 1e3]``), started at the origin, exact line search.
``rosenbrock:N``
    chained Rosenbrock from ``(-1.2, 1, ...)``, bisection line search.

Trial ``t`` uses seed ``seed + t`` for both the instance and the starting
point, so a report is a pure function of its configuration.
"""

from __future__ import annotations

import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .linesearch import LineSearchSpec
from .optimizers import OPTIMIZERS, RunReport, TerminationPolicy
from .problems import (
    DEFAULT_EDGE_FRACTION,
    DEFAULT_NOISE,
    ProblemBundle,
    Rosenbrock,
    distg_bundle,
    rosenbrock_start,
)
from .quadlab import random_quadratic

PROBLEM_KINDS = ("distg", "quadratic", "rosenbrock")
DISPLAY_NAMES = {"sdicov": "SDICOV", "bfgs": "BFGS", "dfp": "DFP", "cg-pr+": "CG-PR+", "cg-fr": "CG-FR"}
_SPEC_RE = re.compile(r"^(distg|quadratic|rosenbrock):(\d+)$")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    size: int

    @classmethod
    def parse(cls, text: str) -> "ProblemSpec":
        m = _SPEC_RE.match(text.strip())
        if not m:
            raise ConfigError(f"bad problem spec {text!r}; expected kind:size with kind in {PROBLEM_KINDS}")
        spec = cls(m.group(1), int(m.group(2)))
        minimum = {"distg": 3, "quadratic": 1, "rosenbrock": 2}[spec.kind]
        if spec.size < minimum:
            raise ConfigError(f"{spec.kind} needs size >= {minimum}")
        return spec

    def __str__(self):
        return f"{self.kind}:{self.size}"

    @property
    def label(self) -> str:
        return f"{self.kind}-{self.size}"


@dataclass(frozen=True)
class BenchConfig:
    problems: tuple[ProblemSpec, ...] = (ProblemSpec("distg", 10), ProblemSpec("distg", 100))
    optimizers: tuple[str, ...] = tuple(OPTIMIZERS)
    trials: int = 4
    seed: int = 0
    tol: float = 1e-5
    ls_c: float = 0.2
    max_iterations: int = 5000
    stagnation_rel: float = 1e-8
    edge_fraction: float = DEFAULT_EDGE_FRACTION
    noise: float = DEFAULT_NOISE
    output_format: str = "markdown"
    timestamp: bool = True
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.problems:
            raise ConfigError("at least one problem is required")
        if not self.optimizers:
            raise ConfigError("at least one optimizer is required")
        unknown = [o for o in self.optimizers if o not in OPTIMIZERS]
        if unknown:
            raise ConfigError(f"unknown optimizer(s) {unknown}; choose from {list(OPTIMIZERS)}")
        if self.output_format not in ("csv", "markdown"):
            raise ConfigError("format must be csv or markdown")
        if not 0.0 < self.ls_c < 1.0:
            raise ConfigError("ls_c must lie in (0, 1)")
        if not self.tol > 0 or self.max_iterations < 1 or self.jobs < 1:
            raise ConfigError("tol, max_iterations and jobs must be positive")
        if not 0.0 < self.edge_fraction <= 1.0:
            raise ConfigError("edge_fraction must lie in (0, 1]")
        if self.noise < 0:
            raise ConfigError("noise must be nonnegative")

    @property
    def line_search(self) -> LineSearchSpec:
        return LineSearchSpec(shrink_factor=self.ls_c)

    @property
    def termination(self) -> TerminationPolicy:
        return TerminationPolicy(grad_rel_tol=self.tol, max_iterations=self.max_iterations,
                                 stagnation_rel=self.stagnation_rel)

    @property
    def seeds(self) -> list[int]:
        return [self.seed + t for t in range(self.trials)]

    def echo(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("timestamp", "jobs"):
                continue
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            parts.append(f"{f.name}={v}")
        return " ".join(parts)


# --------------------------------------------------------------------------
# Config files: one "key = value" per line, '#' starts a comment.

_CONVERTERS = {
    "problems": lambda v: tuple(ProblemSpec.parse(s) for s in v.split(",") if s.strip()),
    "optimizers": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    "trials": int,
    "seed": int,
    "tol": float,
    "ls_c": float,
    "max_iterations": int,
    "stagnation_rel": float,
    "edge_fraction": float,
    "noise": float,
    "output_format": str,
    "timestamp": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
    "jobs": int,
}
_ALIASES = {"format": "output_format", "ls-c": "ls_c", "edge-fraction": "edge_fraction",
            "max-iterations": "max_iterations"}


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _CONVERTERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return values


def make_config(file_values: dict | None = None, overrides: dict | None = None) -> BenchConfig:
    """Defaults, then config-file values, then command-line overrides."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return BenchConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --------------------------------------------------------------------------
# Running


def build_problem(spec: ProblemSpec, seed: int, config: BenchConfig) -> tuple[ProblemBundle, object]:
    """Return the bundle and the line search to use with it."""
    if spec.kind == "distg":
        return distg_bundle(spec.size, seed, config.edge_fraction, config.noise), config.line_search
    if spec.kind == "quadratic":
        q = random_quadratic(spec.size, seed)
        return ProblemBundle(spec.label, q, np.zeros(spec.size), q.minimizer()), q.exact_search()
    return (ProblemBundle(spec.label, Rosenbrock(spec.size), rosenbrock_start(spec.size),
                          np.ones(spec.size), 0.0), config.line_search)


def run_single(spec: ProblemSpec, optimizer: str, seed: int, config: BenchConfig) -> RunReport:
    bundle, ls = build_problem(spec, seed, config)
    return OPTIMIZERS[optimizer](bundle.oracle, bundle.x0, ls, config.termination)


@dataclass(frozen=True)
class TrialRow:
    problem: str
    optimizer: str
    seed: int
    status: str
    iterations: int
    final_f: float
    final_grad_norm: float
    f_evals: int
    g_evals: int
    events: int

    @property
    def success(self) -> bool:
        return self.status == "GradConverged"


@dataclass(frozen=True)
class SummaryRow:
    problem: str
    optimizer: str
    trials: int
    successes: int
    mean_iterations: float | None
    min_iterations: int | None
    max_iterations: int | None
    mean_final_f: float | None
    mean_final_grad_norm: float | None
    failures: str


@dataclass
class BenchReport:
    config: BenchConfig
    trials: list[TrialRow]
    summary: list[SummaryRow]
    timestamp: str | None = None
    failed_everywhere: list[tuple[str, str]] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if self.failed_everywhere else 0


def _trial(args) -> TrialRow:
    spec, optimizer, seed, config = args
    r = run_single(spec, optimizer, seed, config)
    events = sum(1 for rec in r.records if rec.event is not None)
    return TrialRow(spec.label, optimizer, seed, str(r.status), r.iterations, r.final_f,
                    r.final_grad_norm, r.f_evals, r.g_evals, events)


def summarize(rows: list[TrialRow], problem: str, optimizer: str) -> SummaryRow:
    ok = [r for r in rows if r.success]
    reasons = sorted({r.status for r in rows if not r.success})
    failures = ";".join(f"{s}x{sum(1 for r in rows if r.status == s)}" for s in reasons)
    if not ok:
        return SummaryRow(problem, optimizer, len(rows), 0, None, None, None, None, None, failures)
    its = [r.iterations for r in ok]
    return SummaryRow(problem, optimizer, len(rows), len(ok), sum(its) / len(its), min(its),
                      max(its), float(np.mean([r.final_f for r in ok])),
                      float(np.mean([r.final_grad_norm for r in ok])), failures)


def cmd_bench(config: BenchConfig) -> BenchReport:
    """Run every (problem, seed, optimizer) combination and aggregate."""
    jobs = [(spec, opt, seed, config)
            for spec in config.problems for seed in config.seeds for opt in config.optimizers]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_trial, jobs))
    else:
        rows = [_trial(j) for j in jobs]
    rows.sort(key=lambda r: ([s.label for s in config.problems].index(r.problem),
                             config.optimizers.index(r.optimizer), r.seed))
    summary, failed = [], []
    for spec in config.problems:
        for opt in config.optimizers:
            sub = [r for r in rows if r.problem == spec.label and r.optimizer == opt]
            s = summarize(sub, spec.label, opt)
            summary.append(s)
            if s.successes == 0:
                failed.append((spec.label, opt))
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds") if config.timestamp else None
    return BenchReport(config, rows, summary, stamp, failed)


# --------------------------------------------------------------------------
# Output


def fmt_float(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v), ".17g")


def _opt(v) -> str:
    return "" if v is None else str(v)


CSV_COLUMNS = ("row", "problem", "optimizer", "seed", "status", "trials", "successes",
               "iterations", "min_iterations", "max_iterations", "final_f", "final_grad_norm",
               "f_evals", "g_evals", "events", "failures")


def _header_lines(report: BenchReport) -> list[str]:
    lines = [f"# config: {report.config.echo()}"]
    if report.timestamp is not None:
        lines.append(f"# timestamp: {report.timestamp}")
    return lines


def format_csv(report: BenchReport) -> str:
    """One table: per-trial rows (``row=trial``) then aggregates (``row=summary``).

    For summary rows ``iterations``, ``final_f`` and ``final_grad_norm`` are
    means over the successful trials and are empty when no trial succeeded.
    """
    out = io.StringIO()
    for line in _header_lines(report):
        out.write(line + "\n")
    out.write(",".join(CSV_COLUMNS) + "\n")
    for r in report.trials:
        cells = ["trial", r.problem, r.optimizer, str(r.seed), r.status, "1", str(int(r.success)),
                 str(r.iterations), "", "", fmt_float(r.final_f), fmt_float(r.final_grad_norm),
                 str(r.f_evals), str(r.g_evals), str(r.events), ""]
        out.write(",".join(cells) + "\n")
    for s in report.summary:
        cells = ["summary", s.problem, s.optimizer, "", "", str(s.trials), str(s.successes),
                 fmt_float(s.mean_iterations), _opt(s.min_iterations), _opt(s.max_iterations),
                 fmt_float(s.mean_final_f), fmt_float(s.mean_final_grad_norm), "", "", "",
                 s.failures]
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def format_markdown(report: BenchReport) -> str:
    """Table of mean iteration counts (one column per problem) plus per-trial detail.

    A cell is left empty when every trial failed.
    """
    cfg = report.config
    labels = [p.label for p in cfg.problems]
    by_key = {(s.problem, s.optimizer): s for s in report.summary}
    out = io.StringIO()
    for line in _header_lines(report):
        out.write(line.replace("# ", "", 1) + "  \n")
    out.write("\n| Algorithm | " + " | ".join(labels) + " |\n")
    out.write("|---|" + "---:|" * len(labels) + "\n")
    for opt in cfg.optimizers:
        cells = []
        for label in labels:
            s = by_key[(label, opt)]
            cells.append("" if s.mean_iterations is None
                         else f"{s.mean_iterations:.2f} ({s.successes}/{s.trials})")
        out.write(f"| {DISPLAY_NAMES.get(opt, opt)} | " + " | ".join(cells) + " |\n")

    out.write("\n| Problem | Algorithm | Seed | Status | Iterations | Final f | Final grad norm |\n")
    out.write("|---|---|---:|---|---:|---:|---:|\n")
    for r in report.trials:
        out.write(f"| {r.problem} | {DISPLAY_NAMES.get(r.optimizer, r.optimizer)} | {r.seed} | "
                  f"{r.status} | {r.iterations} | {r.final_f:.3e} | {r.final_grad_norm:.3e} |\n")
    failures = [s for s in report.summary if s.failures]
    if failures:
        out.write("\nFailures:\n\n")
        for s in failures:
            out.write(f"- {s.problem} / {DISPLAY_NAMES.get(s.optimizer, s.optimizer)}: {s.failures}\n")
    return out.getvalue()


def format_report(report: BenchReport) -> str:
    if report.config.output_format == "csv":
        return format_csv(report)
    return format_markdown(report)


def write_text(text: str, out: str | None) -> None:
    if out is None:
        import sys
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def with_overrides(config: BenchConfig, **kwargs) -> BenchConfig:
    return replace(config, **{k: v for k, v in kwargs.items() if v is not None})
