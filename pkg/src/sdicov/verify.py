"""Seeded verification suites behind ``sdicov verify``.

Each suite runs one property over ``trials`` random instances (trial ``t``
uses seed ``seed + t``) and reports the worst residual together with the
seeds that failed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .optimizers import TerminationPolicy, sdicov_minimize
from .quadlab import (
    random_quadratic,
    verify_cg_equivalence,
    verify_secant,
    verify_subspace_shrinkage,
)
from .transforms import (
    TransformChain,
    apply,
    apply_adjoint,
    apply_inverse,
    chain_adjoint,
    chain_forward,
    chain_inverse,
    h_apply,
    make_transform,
)

SUITES = ("transforms", "cg-equivalence", "termination", "shrinkage", "secant")
MAX_DENSE_SIZE = 50

TRANSFORM_TOL = 1e-10
ADJOINT_TOL = 1e-12
CG_EQUIVALENCE_TOL = 1e-8
TERMINATION_TOL = 1e-8
SHRINKAGE_TOL = 1e-6
SECANT_TOL = 1e-8


@dataclass
class SuiteResult:
    suite: str
    trials: int
    tol: float
    max_residual: float = 0.0
    failed_seeds: list[int] = field(default_factory=list)
    detail: str = ""

    @property
    def passed(self) -> bool:
        return not self.failed_seeds

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        line = (f"{verdict} {self.suite}: {self.trials} trials, max residual "
                f"{self.max_residual:.3e} (tol {self.tol:.0e})")
        if self.detail:
            line += f", {self.detail}"
        if self.failed_seeds:
            shown = ",".join(str(s) for s in self.failed_seeds[:20])
            more = "..." if len(self.failed_seeds) > 20 else ""
            line += f"; failing seeds: {shown}{more}"
        return line


def _rel(a, b) -> float:
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / nb) if nb > 0 else float(np.linalg.norm(a - b))


def random_chain(rng, n: int, k: int, min_mu: float = 1e-2) -> TransformChain:
    """Chain of ``k`` transforms from Gaussian vectors, with ``|mu| >= min_mu``."""
    c = TransformChain(n)
    while len(c) < k:
        p, g = rng.standard_normal(n), rng.standard_normal(n)
        if abs(1.0 + g @ p / (p @ p)) >= min_mu:
            c = c.extended(make_transform(p, g))
    return c


def dense_chain(c: TransformChain) -> np.ndarray:
    M = np.eye(c.dimension)
    for t in c.transforms:
        M = M @ (np.eye(c.dimension) + np.outer(t.p, t.g) / t.p_norm_sq)
    return M


def transform_residuals(c: TransformChain, x, y) -> tuple[float, float]:
    """Worst dense-oracle disagreement and worst adjoint/round-trip defect."""
    M = dense_chain(c)
    dense = max(
        _rel(chain_forward(c, x), M @ x),
        _rel(chain_adjoint(c, x), M.T @ x),
        _rel(chain_inverse(c, x), np.linalg.solve(M, x)),
        _rel(h_apply(c, x), M @ (M.T @ x)),
    )
    for t in c.transforms:
        L = np.eye(c.dimension) + np.outer(t.p, t.g) / t.p_norm_sq
        dense = max(dense, _rel(apply(t, x), L @ x), _rel(apply_adjoint(t, x), L.T @ x),
                    _rel(apply_inverse(t, x), np.linalg.solve(L, x)))
    fx = chain_forward(c, x)
    lhs, rhs = fx @ y, x @ chain_adjoint(c, y)
    scale = np.linalg.norm(fx) * np.linalg.norm(y) + abs(lhs)
    identity = max(abs(lhs - rhs) / scale, _rel(chain_inverse(c, fx), x))
    return dense, identity


def _transforms(size, trials, seed, kappa):
    res = SuiteResult("transforms", trials, TRANSFORM_TOL)
    for t in range(trials):
        rng = np.random.default_rng(seed + t)
        n = int(rng.integers(1, min(size, 8) + 1))
        k = int(rng.integers(0, 7))
        c = random_chain(rng, n, k)
        dense, identity = transform_residuals(c, rng.standard_normal(n), rng.standard_normal(n))
        worst = max(dense, identity)
        res.max_residual = max(res.max_residual, worst)
        if worst > TRANSFORM_TOL:
            res.failed_seeds.append(seed + t)
    return res


def _exact_run(q, tol, max_iterations):
    term = TerminationPolicy(grad_rel_tol=tol, max_iterations=max_iterations)
    return sdicov_minimize(q, np.zeros(q.dimension), q.exact_search(), term)


def _cg_equivalence(size, trials, seed, kappa):
    res = SuiteResult("cg-equivalence", trials, CG_EQUIVALENCE_TOL)
    for t in range(trials):
        q = random_quadratic(size, seed + t, kappa)
        rep = verify_cg_equivalence(q, np.zeros(size), CG_EQUIVALENCE_TOL)
        res.max_residual = max(res.max_residual, rep.max_deviation)
        if not rep.passed:
            res.failed_seeds.append(seed + t)
    return res


def _termination(size, trials, seed, kappa):
    res = SuiteResult("termination", trials, TERMINATION_TOL)
    worst_its = 0
    for t in range(trials):
        q = random_quadratic(size, seed + t, kappa)
        run = _exact_run(q, TERMINATION_TOL, size)
        rel = run.final_grad_norm / run.initial_grad_norm if run.initial_grad_norm else 0.0
        res.max_residual = max(res.max_residual, rel)
        worst_its = max(worst_its, run.iterations)
        if not run.converged:
            res.failed_seeds.append(seed + t)
    res.detail = f"max iterations {worst_its} (limit {size})"
    return res


def _shrinkage(size, trials, seed, kappa):
    res = SuiteResult("shrinkage", trials, SHRINKAGE_TOL)
    for t in range(trials):
        q = random_quadratic(size, seed + t, kappa)
        rep = verify_subspace_shrinkage(q, np.zeros(size), SHRINKAGE_TOL)
        res.max_residual = max(res.max_residual, rep.max_residual)
        if not rep.passed:
            res.failed_seeds.append(seed + t)
    return res


def _secant(size, trials, seed, kappa):
    res = SuiteResult("secant", trials, SECANT_TOL)
    for t in range(trials):
        q = random_quadratic(size, seed + t, kappa)
        run = _exact_run(q, TERMINATION_TOL, size)
        worst = max((verify_secant(q, run, k).residual for k in range(1, run.iterations + 1)),
                    default=0.0)
        res.max_residual = max(res.max_residual, worst)
        if worst > SECANT_TOL:
            res.failed_seeds.append(seed + t)
    return res


_RUNNERS = {
    "transforms": _transforms,
    "cg-equivalence": _cg_equivalence,
    "termination": _termination,
    "shrinkage": _shrinkage,
    "secant": _secant,
}


def run_suite(suite: str, size: int, trials: int, seed: int = 0, kappa: float = 1e3) -> SuiteResult:
    if suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    if not 1 <= size <= MAX_DENSE_SIZE:
        raise ValueError(f"size must lie in [1, {MAX_DENSE_SIZE}]")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    return _RUNNERS[suite](size, trials, seed, kappa)
