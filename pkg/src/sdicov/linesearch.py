"""Step-length selection.

Two searches are provided.  :func:`exact_quadratic_alpha` is the closed-form
minimizer along a direction for a quadratic objective.
:func:`bisection_search` handles general objectives: it brackets a sign
change of ``phi'`` by doubling, then bisects until

    |phi'(alpha)| <= c |phi'(0)|.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NonPositiveCurvature, ZeroDirection


class LineSearchStatus(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    NON_DESCENT = "NonDescent"
    DOMAIN_SAFEGUARD = "DomainSafeguard"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LineSearchSpec:
    """Parameters of the bisection search.

    ``shrink_factor`` is the ``c`` in ``|phi'(alpha)| <= c |phi'(0)|``.
    """

    shrink_factor: float = 0.2
    max_expansions: int = 60
    max_bisections: int = 100
    initial_step: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.shrink_factor < 1.0:
            raise ValueError(f"shrink_factor must lie in (0, 1), got {self.shrink_factor}")
        if self.max_expansions < 1 or self.max_bisections < 1:
            raise ValueError("iteration budgets must be at least 1")
        if not self.initial_step > 0.0:
            raise ValueError("initial_step must be positive")


@dataclass(frozen=True)
class ExactQuadraticSearch:
    """Exact minimization along the direction for a quadratic objective.

    ``hessian_apply(v)`` must return ``A v`` for the (constant) Hessian.
    """

    hessian_apply: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LineSearchResult:
    alpha: float
    phi0_slope: float
    phi_alpha_slope: float
    f_evals: int
    g_evals: int
    status: LineSearchStatus
    phi_alpha: float = math.nan


def exact_quadratic_alpha(A_apply: Callable[[np.ndarray], np.ndarray], p) -> float:
    """Return ``p.p / p.A p``, the exact step along ``p`` for a quadratic.

    ``p`` is taken to be the negative gradient at the current point, so this
    is the minimizer of ``phi(alpha) = f(w + alpha p)``.
    """
    p = np.asarray(p, dtype=float)
    pp = float(np.dot(p, p))
    if pp == 0.0:
        raise ZeroDirection("cannot take a step along a zero direction")
    curvature = float(np.dot(p, A_apply(p)))
    if not curvature > 0.0:
        raise NonPositiveCurvature(f"p.A p = {curvature:.3e}")
    return pp / curvature


def bisection_search(
    phi: Callable[[float], float],
    phi_prime: Callable[[float], float],
    spec: LineSearchSpec = LineSearchSpec(),
    phi0: float | None = None,
    phi0_slope: float | None = None,
) -> LineSearchResult:
    """Find ``alpha > 0`` with ``|phi'(alpha)| <= c |phi'(0)|``.

    ``phi0`` and ``phi0_slope`` may be passed when the caller already knows
    ``phi(0)`` and ``phi'(0)``; they are evaluated otherwise (and counted).

    Trial steps whose value is non-finite or exceeds ``phi(0)`` are treated
    as the upper end of the bracket, so a step that leaves the objective's
    domain is halved rather than accepted.  On budget exhaustion the result
    carries the acceptable step with the smallest ``|phi'|`` seen and status
    ``MaxIterations``.
    """
    c = spec.shrink_factor
    f_evals = g_evals = 0
    if phi0 is None:
        phi0 = float(phi(0.0))
        f_evals += 1
    if phi0_slope is None:
        phi0_slope = float(phi_prime(0.0))
        g_evals += 1

    def result(alpha, slope, status, value=math.nan):
        return LineSearchResult(alpha, phi0_slope, slope, f_evals, g_evals, status, value)

    if not phi0_slope < 0.0:
        return result(0.0, phi0_slope, LineSearchStatus.NON_DESCENT, phi0)

    target = c * abs(phi0_slope)
    lo, hi = 0.0, math.inf
    best = None  # (|slope|, alpha, slope, value) over acceptable trial points

    def probe(alpha):
        # Returns the slope at alpha, or None if alpha is unacceptable.
        nonlocal f_evals, g_evals, best
        value = float(phi(alpha))
        f_evals += 1
        if not (math.isfinite(value) and value <= phi0):
            return None, value
        slope = float(phi_prime(alpha))
        g_evals += 1
        if not math.isfinite(slope):
            return None, value
        if best is None or abs(slope) < best[0]:
            best = (abs(slope), alpha, slope, value)
        return slope, value

    alpha = spec.initial_step
    for _ in range(spec.max_expansions):
        slope, value = probe(alpha)
        if slope is None:
            hi = alpha
            break
        if abs(slope) <= target:
            return result(alpha, slope, LineSearchStatus.CONVERGED, value)
        if slope >= 0.0:
            hi = alpha
            break
        lo = alpha
        alpha *= 2.0

    if math.isfinite(hi):
        for _ in range(spec.max_bisections):
            alpha = 0.5 * (lo + hi)
            if not lo < alpha < hi:
                break
            slope, value = probe(alpha)
            if slope is None:
                hi = alpha
                continue
            if abs(slope) <= target:
                return result(alpha, slope, LineSearchStatus.CONVERGED, value)
            if slope >= 0.0:
                hi = alpha
            else:
                lo = alpha

    if best is None:
        return result(0.0, math.nan, LineSearchStatus.DOMAIN_SAFEGUARD)
    _, alpha, slope, value = best
    return result(alpha, slope, LineSearchStatus.MAX_ITERATIONS, value)
