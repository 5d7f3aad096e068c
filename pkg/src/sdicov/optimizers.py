"""Unconstrained minimizers sharing one driver.

``sdicov_minimize`` is steepest descent with iterated change of variables:
each iteration takes a steepest-descent step in the current coordinates,
then composes the objective with a rank-one transform built from the step
direction and the new negative gradient.  The composed objective is never
formed; the transforms are kept in a :class:`~sdicov.transforms.TransformChain`
and applied through the chain rule.

The comparators are BFGS and DFP (both in product form, O(kn) per
iteration, ``H_1 = I`` and no restarts) and nonlinear conjugate gradient with
the Polak-Ribiere+ and Fletcher-Reeves formulas.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence, Union

import numpy as np

from .errors import NearSingular, ZeroDirection
from .linesearch import (
    ExactQuadraticSearch,
    LineSearchResult,
    LineSearchSpec,
    LineSearchStatus,
    bisection_search,
)
from .transforms import (
    DEFAULT_EPS_INV,
    TransformChain,
    apply_adjoint,
    chain_adjoint,
    chain_forward,
    make_transform,
)


class ObjectiveOracle(Protocol):
    dimension: int

    def value_at(self, x: np.ndarray) -> float: ...

    def gradient_at(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class FunctionOracle:
    """Adapter turning a pair of callables into an :class:`ObjectiveOracle`."""

    dimension: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]

    def value_at(self, x):
        return float(self.value(x))

    def gradient_at(self, x):
        return np.asarray(self.gradient(x), dtype=float)


class RunStatus(str, enum.Enum):
    GRAD_CONVERGED = "GradConverged"
    STAGNATED = "Stagnated"
    MAX_ITERATIONS = "MaxIterations"
    LINE_SEARCH_FAILURE = "LineSearchFailure"

    def __str__(self):
        return self.value


# Events recorded on an iteration; at most one per iteration.
NEAR_SINGULAR = "near_singular"
CURVATURE_SKIP = "curvature_skip"
DESCENT_RESET = "descent_reset"


@dataclass(frozen=True)
class TerminationPolicy:
    grad_rel_tol: float = 1e-5
    max_iterations: int = 5000
    stagnation_window: int = 4
    stagnation_rel: float = 1e-8

    def __post_init__(self):
        if not (self.grad_rel_tol > 0 and self.max_iterations > 0
                and self.stagnation_window > 0 and self.stagnation_rel > 0):
            raise ValueError("termination parameters must all be positive")


@dataclass(frozen=True)
class IterationRecord:
    """One outer iteration.

    ``x`` is the new iterate, ``m`` the search direction and ``alpha`` the
    step, so ``x == x_prev + alpha * m``.  ``p`` and ``g`` are the
    transformed steepest-descent direction and the transformed negative
    gradient at ``x``; they are ``None`` for the comparator methods.
    ``slope`` is ``grad f(x_prev) . m``.  ``rank_one_ops`` counts rank-one
    factor applications spent computing this iteration's direction.
    """

    k: int
    x: np.ndarray
    m: np.ndarray
    alpha: float
    p: np.ndarray | None
    g: np.ndarray | None
    f_value: float
    grad_norm: float
    ls_status: LineSearchStatus
    slope: float
    f_evals: int
    g_evals: int
    event: str | None = None
    rank_one_ops: int = 0


@dataclass
class RunReport:
    status: RunStatus
    records: list[IterationRecord]
    x0: np.ndarray
    initial_f: float
    initial_grad_norm: float
    final_x: np.ndarray
    final_f: float
    final_grad_norm: float
    f_evals: int
    g_evals: int
    method: str = ""
    chain: TransformChain | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.status is RunStatus.GRAD_CONVERGED


LineSearch = Union[LineSearchSpec, ExactQuadraticSearch]


def check_stagnation(records: Sequence, policy: TerminationPolicy) -> bool:
    """True when the last ``stagnation_window`` steps made no significant progress.

    A step from record ``i-1`` to record ``i`` is significant if either the
    function value or the gradient norm dropped by at least
    ``stagnation_rel`` relative to its previous value.  Only ``f_value`` and
    ``grad_norm`` attributes are read.
    """
    w = policy.stagnation_window
    if len(records) < w + 1:
        return False
    rel = policy.stagnation_rel
    recent = records[-(w + 1):]
    for prev, cur in zip(recent[:-1], recent[1:]):
        if prev.f_value - cur.f_value >= rel * abs(prev.f_value):
            return False
        if prev.grad_norm - cur.grad_norm >= rel * prev.grad_norm:
            return False
    return True


@dataclass(frozen=True)
class _Point:
    # Minimal stand-in for the starting point in the stagnation window.
    f_value: float
    grad_norm: float


class _Method:
    """Direction strategy plugged into :func:`_minimize`."""

    name = ""

    def direction(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def update(self, s, grad_old, grad_new):
        """Absorb the step ``s`` and return an event tag (or ``None``)."""
        raise NotImplementedError

    # Filled in by direction/update for the iteration record.
    p = g = None
    ops = 0


class _Sdicov(_Method):
    name = "sdicov"

    def __init__(self, n, use_shortcut=True, eps_inv=DEFAULT_EPS_INV):
        self.chain = TransformChain(n)
        self.use_shortcut = use_shortcut
        self.eps_inv = eps_inv
        self._next_p = None

    def direction(self, grad):
        k = len(self.chain)
        if self.use_shortcut and self._next_p is not None:
            p = self._next_p
            self.ops = 1
        else:
            p = -chain_adjoint(self.chain, grad)
            self.ops = k
        self.p = p
        self.ops += k
        return chain_forward(self.chain, p)

    def update(self, s, grad_old, grad_new):
        k = len(self.chain)
        g = -chain_adjoint(self.chain, grad_new)
        self.ops += k
        self.g = g
        try:
            t = make_transform(self.p, g, self.eps_inv)
        except (NearSingular, ZeroDirection):
            # Leave the chain as is; the next direction is then g itself.
            self._next_p = g
            return NEAR_SINGULAR
        self.chain = self.chain.extended(t)
        if self.use_shortcut:
            self._next_p = apply_adjoint(t, g)
        return None


class _Bfgs(_Method):
    """Inverse-Hessian BFGS kept as the factors ``(I - rho s y^T)``.

    ``H_{k+1} = V_k^T H_k V_k + rho_k s_k s_k^T`` with
    ``V_k = I - rho_k y_k s_k^T``; applied by the two-loop recursion without
    truncation, so every stored pair takes part.
    """

    name = "bfgs"

    def __init__(self, n):
        self.s: list[np.ndarray] = []
        self.y: list[np.ndarray] = []
        self.rho: list[float] = []

    def _h_apply(self, v):
        q = v.copy()
        a = [0.0] * len(self.s)
        for i in reversed(range(len(self.s))):
            a[i] = self.rho[i] * np.dot(self.s[i], q)
            q -= a[i] * self.y[i]
        for i in range(len(self.s)):
            b = self.rho[i] * np.dot(self.y[i], q)
            q += (a[i] - b) * self.s[i]
        self.ops += 2 * len(self.s)
        return q

    def direction(self, grad):
        self.ops = 0
        return -self._h_apply(grad)

    def update(self, s, grad_old, grad_new):
        y = grad_new - grad_old
        sy = float(np.dot(s, y))
        if not sy > 0.0:
            return CURVATURE_SKIP
        self.s.append(s)
        self.y.append(y)
        self.rho.append(1.0 / sy)
        return None


class _Dfp(_Method):
    """DFP inverse-Hessian update in factored form.

    ``H_{k+1} = H_k - u_k u_k^T / (y_k.u_k) + s_k s_k^T / (y_k.s_k)`` with
    ``u_k = H_k y_k``, so ``H_{k+1} v`` is a sum of ``2k`` rank-one terms.
    """

    name = "dfp"

    def __init__(self, n):
        self.terms: list[tuple[np.ndarray, float, np.ndarray, float]] = []

    def _h_apply(self, v):
        out = v.copy()
        for u, yu, s, ys in self.terms:
            out += s * (np.dot(s, v) / ys) - u * (np.dot(u, v) / yu)
        self.ops += 2 * len(self.terms)
        return out

    def direction(self, grad):
        self.ops = 0
        return -self._h_apply(grad)

    def update(self, s, grad_old, grad_new):
        y = grad_new - grad_old
        ys = float(np.dot(y, s))
        if not ys > 0.0:
            return CURVATURE_SKIP
        u = self._h_apply(y)
        yu = float(np.dot(y, u))
        if not yu > 0.0:
            return CURVATURE_SKIP
        self.terms.append((u, yu, s, ys))
        return None


class _NonlinearCg(_Method):
    def __init__(self, n, polak_ribiere):
        self.polak_ribiere = polak_ribiere
        self.name = "cg-pr+" if polak_ribiere else "cg-fr"
        self.prev_grad = None
        self.prev_dir = None
        self._reset = False

    def direction(self, grad):
        self.ops = 0
        self._reset = False
        if self.prev_grad is None:
            d = -grad
        else:
            gg_old = np.dot(self.prev_grad, self.prev_grad)
            if self.polak_ribiere:
                beta = max(0.0, np.dot(grad, grad - self.prev_grad) / gg_old)
            else:
                beta = np.dot(grad, grad) / gg_old
            d = -grad + beta * self.prev_dir
            if not np.dot(grad, d) < 0.0:
                d = -grad
                self._reset = True
        self.prev_dir = d
        return d

    def update(self, s, grad_old, grad_new):
        self.prev_grad = grad_old
        return DESCENT_RESET if self._reset else None


def _line_search(f, x, m, f0, grad, ls):
    """Run the configured line search along ``m`` from ``x``.

    Gradients evaluated inside the search are cached so the driver can reuse
    the one at the accepted point.
    """
    slope0 = float(np.dot(grad, m))
    if isinstance(ls, ExactQuadraticSearch):
        if not slope0 < 0.0:
            return LineSearchResult(0.0, slope0, slope0, 0, 0, LineSearchStatus.NON_DESCENT), None
        curvature = float(np.dot(m, ls.hessian_apply(m)))
        if not curvature > 0.0:
            return LineSearchResult(0.0, slope0, slope0, 0, 0, LineSearchStatus.NON_DESCENT), None
        alpha = -slope0 / curvature
        return LineSearchResult(alpha, slope0, 0.0, 0, 0, LineSearchStatus.CONVERGED), None

    cache = {}

    def phi(a):
        return f.value_at(x + a * m)

    def phi_prime(a):
        gr = f.gradient_at(x + a * m)
        cache[a] = gr
        return float(np.dot(gr, m))

    res = bisection_search(phi, phi_prime, ls, phi0=f0, phi0_slope=slope0)
    return res, cache.get(res.alpha)


def _minimize(method: _Method, f, x0, ls: LineSearch, term: TerminationPolicy) -> RunReport:
    x = np.array(x0, dtype=float)
    x_start = x.copy()
    fx = f.value_at(x)
    grad = f.gradient_at(x)
    f_evals, g_evals = 1, 1
    if not np.all(np.isfinite(grad)):
        raise ValueError("gradient at the starting point is not finite")
    gnorm0 = gnorm = float(np.linalg.norm(grad))
    records: list[IterationRecord] = []
    history = [_Point(fx, gnorm)]

    def report(status):
        return RunReport(
            status=status, records=records, x0=x_start, initial_f=history[0].f_value,
            initial_grad_norm=gnorm0, final_x=x, final_f=fx, final_grad_norm=gnorm,
            f_evals=f_evals, g_evals=g_evals, method=method.name,
            chain=getattr(method, "chain", None),
        )

    if gnorm <= term.grad_rel_tol * gnorm0 or gnorm == 0.0:
        return report(RunStatus.GRAD_CONVERGED)

    for k in range(1, term.max_iterations + 1):
        m = method.direction(grad)
        direction_ops = method.ops
        res, grad_cached = _line_search(f, x, m, fx, grad, ls)
        f_evals += res.f_evals
        g_evals += res.g_evals
        if res.status in (LineSearchStatus.NON_DESCENT, LineSearchStatus.DOMAIN_SAFEGUARD):
            return report(RunStatus.LINE_SEARCH_FAILURE)

        x_new = x + res.alpha * m
        if math.isnan(res.phi_alpha):
            f_new = f.value_at(x_new)
            f_evals += 1
        else:
            f_new = res.phi_alpha
        if grad_cached is None:
            grad_new = f.gradient_at(x_new)
            g_evals += 1
        else:
            grad_new = grad_cached
        event = method.update(x_new - x, grad, grad_new)
        x, fx, grad = x_new, f_new, grad_new
        gnorm = float(np.linalg.norm(grad))
        rec = IterationRecord(
            k=k, x=x, m=m, alpha=res.alpha, p=method.p, g=method.g, f_value=fx,
            grad_norm=gnorm, ls_status=res.status, slope=res.phi0_slope,
            f_evals=f_evals, g_evals=g_evals, event=event, rank_one_ops=direction_ops,
        )
        records.append(rec)
        history.append(rec)
        if gnorm <= term.grad_rel_tol * gnorm0:
            return report(RunStatus.GRAD_CONVERGED)
        if check_stagnation(history[-(term.stagnation_window + 1):], term):
            return report(RunStatus.STAGNATED)
    return report(RunStatus.MAX_ITERATIONS)


_DEFAULT_LS = LineSearchSpec()
_DEFAULT_TERM = TerminationPolicy()


def sdicov_minimize(f: ObjectiveOracle, x0, ls: LineSearch = _DEFAULT_LS,
                    term: TerminationPolicy = _DEFAULT_TERM, *, use_shortcut: bool = True,
                    eps_inv: float = DEFAULT_EPS_INV) -> RunReport:
    """Minimize ``f`` by steepest descent with iterated change of variables.

    Iteration ``k`` computes ``p_k = -L^T grad f(x_{k-1})`` (or, with
    ``use_shortcut``, ``p_k = l_{k-1}^T(g_{k-1})``, which is the same vector),
    the direction ``m_k = L p_k``, a line search along ``m_k``, and
    ``g_k = -L^T grad f(x_k)``, where ``L = l_1 o ... o l_{k-1}``.  The
    transform ``l_k = I + p_k g_k^T / |p_k|^2`` is then appended, unless it
    is near singular, in which case it is skipped and the iteration is
    tagged ``near_singular``.

    The transform chain built during the run is returned in
    ``RunReport.chain``.
    """
    return _minimize(_Sdicov(len(x0), use_shortcut, eps_inv), f, x0, ls, term)


def bfgs_minimize(f: ObjectiveOracle, x0, ls: LineSearch = _DEFAULT_LS,
                  term: TerminationPolicy = _DEFAULT_TERM) -> RunReport:
    return _minimize(_Bfgs(len(x0)), f, x0, ls, term)


def dfp_minimize(f: ObjectiveOracle, x0, ls: LineSearch = _DEFAULT_LS,
                 term: TerminationPolicy = _DEFAULT_TERM) -> RunReport:
    return _minimize(_Dfp(len(x0)), f, x0, ls, term)


def cg_pr_minimize(f: ObjectiveOracle, x0, ls: LineSearch = _DEFAULT_LS,
                   term: TerminationPolicy = _DEFAULT_TERM) -> RunReport:
    """Nonlinear CG with ``beta = max(0, g.(g - g_old) / g_old.g_old)``.

    A direction that fails to be a descent direction is replaced by the
    steepest-descent direction and the iteration is tagged
    ``descent_reset``.
    """
    return _minimize(_NonlinearCg(len(x0), polak_ribiere=True), f, x0, ls, term)


def cg_fr_minimize(f: ObjectiveOracle, x0, ls: LineSearch = _DEFAULT_LS,
                   term: TerminationPolicy = _DEFAULT_TERM) -> RunReport:
    return _minimize(_NonlinearCg(len(x0), polak_ribiere=False), f, x0, ls, term)


OPTIMIZERS: dict[str, Callable[..., RunReport]] = {
    "sdicov": sdicov_minimize,
    "bfgs": bfgs_minimize,
    "dfp": dfp_minimize,
    "cg-pr+": cg_pr_minimize,
    "cg-fr": cg_fr_minimize,
}
