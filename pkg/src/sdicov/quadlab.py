"""Convex-quadratic laboratory.

Everything here works on ``f(x) = x^T A x / 2 - b^T x`` with a dense SPD
matrix ``A`` and is meant for verification, not production use:

* :func:`linear_cg` -- textbook linear conjugate gradient with full trace.
* :func:`algorithm1_quadratic` -- the change-of-variables iteration run with
  the composed objective updated explicitly (``A_k = l_k^T A_{k-1} l_k``,
  ``b_k = l_k^T b_{k-1}``) instead of through a transform chain.
* verifiers comparing these against :func:`~sdicov.optimizers.sdicov_minimize`
  and checking the Krylov-subspace and secant properties.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BreakdownError,
    DimensionMismatch,
    NotPositiveDefinite,
    ZeroDirection,
)
from .linesearch import ExactQuadraticSearch, exact_quadratic_alpha
from .optimizers import RunReport, TerminationPolicy, sdicov_minimize
from .transforms import (
    DEFAULT_EPS_INV,
    TransformChain,
    apply_adjoint,
    apply_inverse,
    chain_forward,
    h_apply,
    make_transform,
)

KRYLOV_DROP_TOL = 1e-8


class QuadraticObjective:
    """``f(x) = x^T A x / 2 - b^T x`` with symmetric positive definite ``A``.

    Satisfies the objective-oracle interface and additionally exposes
    :meth:`hessian_apply` and :meth:`exact_search` for exact line searches.
    """

    def __init__(self, A, b, check: bool = True):
        A = np.array(A, dtype=float)
        b = np.array(b, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
            raise DimensionMismatch(f"A has shape {A.shape}, b has shape {b.shape}")
        if check:
            scale = np.max(np.abs(A))
            if np.max(np.abs(A - A.T)) > 1e-12 * scale:
                raise NotPositiveDefinite("matrix is not symmetric")
            if A.shape[0] <= 200:
                try:
                    np.linalg.cholesky(A)
                except np.linalg.LinAlgError:
                    raise NotPositiveDefinite("matrix is not positive definite") from None
        self.A = A
        self.b = b

    @property
    def dimension(self) -> int:
        return self.b.shape[0]

    def value_at(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.A @ x) - self.b @ x)

    def gradient_at(self, x) -> np.ndarray:
        return self.A @ np.asarray(x, dtype=float) - self.b

    def hessian_apply(self, v) -> np.ndarray:
        return self.A @ v

    def exact_search(self) -> ExactQuadraticSearch:
        return ExactQuadraticSearch(self.hessian_apply)

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.b)


def random_spd(n: int, rng, kappa: float = 1e3, eigenvalues=None) -> np.ndarray:
    """``Q diag(lam) Q^T`` with ``Q`` from the QR factor of a Gaussian matrix.

    Eigenvalues default to log-uniform on ``[1, kappa]``; pass
    ``eigenvalues`` (length ``n``) to fix them, e.g. with repeats.
    """
    rng = np.random.default_rng(rng)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q *= np.sign(np.diag(r))
    if eigenvalues is None:
        lam = np.exp(rng.uniform(0.0, np.log(kappa), size=n))
    else:
        lam = np.asarray(eigenvalues, dtype=float)
    A = (q * lam) @ q.T
    return 0.5 * (A + A.T)


def random_quadratic(n: int, seed, kappa: float = 1e3, n_distinct: int | None = None
                     ) -> QuadraticObjective:
    """Seeded random SPD quadratic with a Gaussian right-hand side.

    With ``n_distinct = s`` the spectrum takes exactly ``s`` distinct values
    (log-spaced on ``[1, kappa]``), each repeated about ``n / s`` times.
    """
    rng = np.random.default_rng(seed)
    eig = None
    if n_distinct is not None:
        if not 1 <= n_distinct <= n:
            raise ValueError("n_distinct must lie in [1, n]")
        levels = np.geomspace(1.0, kappa, n_distinct) if n_distinct > 1 else np.ones(1)
        eig = levels[np.arange(n) % n_distinct]
    A = random_spd(n, rng, kappa, eig)
    return QuadraticObjective(A, rng.standard_normal(n))


# --------------------------------------------------------------------------
# Linear CG


@dataclass(frozen=True)
class LinearCgState:
    """State after iteration ``k``; ``k = 0`` is the starting point.

    ``n_dir``, ``alpha`` and ``beta`` are those used to reach this state
    (``None`` at ``k = 0``; ``beta`` is also ``None`` at ``k = 1``).
    """

    k: int
    x: np.ndarray
    r: np.ndarray
    n_dir: np.ndarray | None = None
    alpha: float | None = None
    beta: float | None = None


def linear_cg(q: QuadraticObjective, x0, tol: float = 1e-10) -> list[LinearCgState]:
    """Run linear CG on ``A x = b`` and return every state.

    Stops once ``|r_k| <= tol |r_0|`` or after ``n`` iterations.  The
    residual is propagated by the recurrence ``r_k = r_{k-1} - alpha A n_k``.
    """
    A, b = q.A, q.b
    x = np.array(x0, dtype=float)
    if x.shape != b.shape:
        raise DimensionMismatch(f"x0 has shape {x.shape}, expected {b.shape}")
    r = b - A @ x
    trace = [LinearCgState(0, x.copy(), r.copy())]
    r0_norm = np.linalg.norm(r)
    if r0_norm == 0.0:
        return trace
    rr = r @ r
    rr_old = None
    n_dir = None
    for k in range(1, len(b) + 1):
        if k == 1:
            beta = None
            n_dir = r.copy()
        else:
            beta = rr / rr_old
            n_dir = beta * n_dir + r
        An = A @ n_dir
        curvature = n_dir @ An
        if not curvature > 0.0:
            raise BreakdownError(f"n^T A n = {curvature:.3e} at iteration {k}")
        alpha = rr / curvature
        x = x + alpha * n_dir
        r = r - alpha * An
        rr_old, rr = rr, r @ r
        trace.append(LinearCgState(k, x.copy(), r.copy(), n_dir.copy(), float(alpha),
                                   None if beta is None else float(beta)))
        if np.sqrt(rr) <= tol * r0_norm:
            break
    return trace


# --------------------------------------------------------------------------
# Algorithm with explicit composed quadratics


@dataclass(frozen=True)
class Algorithm1State:
    """Iteration ``k`` of the explicit change-of-variables method.

    ``A``, ``b`` define the composed objective ``f_k`` *after* the iteration;
    ``A_prev`` defines ``f_{k-1}``, the objective the step was taken on.
    ``w`` is ``w_k = l_k^{-1}(w_tilde)``; when the iteration terminated the
    run no transform is appended and ``w == w_tilde``.
    """

    k: int
    A_prev: np.ndarray
    A: np.ndarray
    b: np.ndarray
    w_prev: np.ndarray
    w_tilde: np.ndarray
    w: np.ndarray
    p: np.ndarray
    g: np.ndarray
    alpha: float
    chain: TransformChain = field(repr=False)
    terminal: bool = False

    def x(self) -> np.ndarray:
        """The iterate in original coordinates, ``l_1 o ... o l_k (w_k)``."""
        return chain_forward(self.chain, self.w)


def algorithm1_quadratic(q: QuadraticObjective, w0, tol: float = 1e-10,
                         eps_inv: float = DEFAULT_EPS_INV) -> list[Algorithm1State]:
    """Run the change-of-variables method updating ``A_k`` and ``b_k`` explicitly.

    Each iteration takes the exact steepest-descent step on the current
    composed quadratic, builds ``l_k`` from the step direction ``p_k`` and
    the new negative gradient ``g_k``, and replaces ``(A, b, w)`` by
    ``(l^T A l, l^T b, l^{-1} w_tilde)``.  Stops when
    ``|g_k| <= tol |p_1|`` or after ``n`` iterations; the solution in
    original coordinates is ``states[-1].x()``.
    """
    A = np.array(q.A, dtype=float)
    b = np.array(q.b, dtype=float)
    n = len(b)
    w = np.array(w0, dtype=float)
    chain = TransformChain(n)
    states: list[Algorithm1State] = []
    ref = None
    for k in range(1, n + 1):
        p = b - A @ w
        p_norm = np.linalg.norm(p)
        if ref is None:
            ref = p_norm
        if p_norm == 0.0:
            break
        alpha = exact_quadratic_alpha(lambda v: A @ v, p)
        w_tilde = w + alpha * p
        g = b - A @ w_tilde
        if np.linalg.norm(g) <= tol * ref or k == n:
            states.append(Algorithm1State(k, A, A, b, w, w_tilde, w_tilde.copy(), p, g,
                                          alpha, chain, terminal=True))
            break
        t = make_transform(p, g, eps_inv)
        L = np.eye(n) + np.outer(t.p, t.g) / t.p_norm_sq
        A_new = L.T @ A @ L
        A_new = 0.5 * (A_new + A_new.T)
        b_new = apply_adjoint(t, b)
        w_new = apply_inverse(t, w_tilde, eps_inv)
        chain = chain.extended(t)
        states.append(Algorithm1State(k, A, A_new, b_new, w, w_tilde, w_new, p, g,
                                      alpha, chain))
        A, b, w = A_new, b_new, w_new
    return states


# --------------------------------------------------------------------------
# Krylov subspaces


@dataclass(frozen=True)
class KrylovBasis:
    basis: np.ndarray  # n x dim, orthonormal columns

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def residual(self, v) -> float:
        """Relative norm of the part of ``v`` outside the subspace."""
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        return float(np.linalg.norm(v - self.basis @ (self.basis.T @ v)) / nv)


def krylov_dim(A, p, drop_tol: float = KRYLOV_DROP_TOL) -> KrylovBasis:
    """Orthonormal basis of ``span(p, A p, A^2 p, ...)``.

    Each new vector ``A q_j`` is orthogonalized twice against the basis; the
    iteration stops when what is left is below ``drop_tol`` times the norm
    of ``A q_j``.
    """
    A = np.asarray(A, dtype=float)
    p = np.asarray(p, dtype=float)
    n = A.shape[0]
    p_norm = np.linalg.norm(p)
    if p_norm == 0.0:
        raise ZeroDirection("Krylov subspace of the zero vector")
    Q = np.zeros((n, n))
    Q[:, 0] = p / p_norm
    dim = 1
    while dim < n:
        v = A @ Q[:, dim - 1]
        scale = np.linalg.norm(v)
        for _ in range(2):
            v -= Q[:, :dim] @ (Q[:, :dim].T @ v)
        rest = np.linalg.norm(v)
        if scale == 0.0 or rest < drop_tol * scale:
            break
        Q[:, dim] = v / rest
        dim += 1
    return KrylovBasis(Q[:, :dim].copy())


# --------------------------------------------------------------------------
# Verifiers


def _rel(a, b, scale=None) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.linalg.norm(b) if scale is None else scale
    diff = np.linalg.norm(a - b)
    if denom == 0.0:
        return float(diff)
    return float(diff / denom)


@dataclass
class CgEquivalenceReport:
    """Per-iteration relative deviations between the two runs.

    Each row holds ``(p vs r_{k-1}, m vs n_k, g vs r_k, alpha)``.
    """

    deviations: list[tuple[float, float, float, float]]
    sdicov_iterations: int
    cg_iterations: int
    tol: float

    @property
    def max_deviation(self) -> float:
        return max((max(row) for row in self.deviations), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol and self.sdicov_iterations == self.cg_iterations


def _exact_run(q: QuadraticObjective, x0, tol: float) -> RunReport:
    term = TerminationPolicy(grad_rel_tol=tol, max_iterations=q.dimension)
    return sdicov_minimize(q, x0, q.exact_search(), term)


def verify_cg_equivalence(q: QuadraticObjective, x0, tol: float = 1e-8,
                          stop_tol: float = 1e-8) -> CgEquivalenceReport:
    """Compare SDICOV (exact line search) against linear CG from ``x0``.

    Expected identities: ``p_k = r_{k-1}``, ``m_k = n_k``, ``g_k = r_k`` and
    equal step lengths.  Vector deviations are measured relative to
    ``|r_0|`` (the common scale of all four sequences) so that iterations
    whose residual has already dropped to rounding level are not scored
    against their own noise; step lengths are compared relatively.  Both runs
    stop at relative residual ``stop_tol``.
    """
    run = _exact_run(q, x0, stop_tol)
    cg = linear_cg(q, x0, stop_tol)
    scale = np.linalg.norm(cg[0].r)
    rows = []
    for rec, st, prev in zip(run.records, cg[1:], cg[:-1]):
        rows.append((
            _rel(rec.p, prev.r, scale),
            _rel(rec.m, st.n_dir, scale),
            _rel(rec.g, st.r, scale),
            abs(rec.alpha - st.alpha) / abs(st.alpha),
        ))
    return CgEquivalenceReport(rows, run.iterations, len(cg) - 1, tol)


@dataclass
class ShrinkageReport:
    dims: list[int]
    containment: list[float]
    orthogonality: list[float]
    tol: float = 1e-6

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.dims, self.dims[1:]))

    @property
    def max_residual(self) -> float:
        return max(self.containment + self.orthogonality, default=0.0)

    @property
    def passed(self) -> bool:
        return self.strictly_decreasing and self.max_residual <= self.tol


def verify_subspace_shrinkage(q: QuadraticObjective, w0, tol: float = 1e-6,
                              stop_tol: float = 1e-10) -> ShrinkageReport:
    """Track ``dim K(A_{k-1}, p_k)`` along an explicit run.

    For consecutive iterations the later subspace must sit inside the
    earlier one and be orthogonal to the earlier ``p``; the containment and
    orthogonality residuals are reported per transition.
    """
    if q.dimension > 50:
        raise ValueError("shrinkage verification is limited to n <= 50")
    states = algorithm1_quadratic(q, w0, stop_tol)
    bases = [krylov_dim(st.A_prev, st.p) for st in states]
    containment, orthogonality = [], []
    for st, old, new in zip(states, bases, bases[1:]):
        u = st.p / np.linalg.norm(st.p)
        containment.append(max(old.residual(v) for v in new.basis.T))
        orthogonality.append(float(np.max(np.abs(u @ new.basis))))
    return ShrinkageReport([b.dim for b in bases], containment, orthogonality, tol)


@dataclass
class SecantReport:
    k: int
    residual: float


def verify_secant(f, run: RunReport, k: int) -> SecantReport:
    """Residual of ``H_{k+1} y_k = m_k`` for iteration ``k`` of an SDICOV run.

    ``k`` is the 1-based iteration index: ``y_k = grad f(x_k) - grad f(x_{k-1})``
    and ``H_{k+1} = l_1 ... l_k l_k^T ... l_1^T``.  Returns
    ``|H_{k+1} y_k - m_k| / |m_k|``.  The identity holds exactly only under
    an exact line search.
    """
    if run.chain is None:
        raise ValueError("run carries no transform chain; was it an SDICOV run?")
    if not 1 <= k <= run.iterations:
        raise IndexError(f"iteration {k} outside [1, {run.iterations}]")
    x_prev = run.x0 if k == 1 else run.records[k - 2].x
    rec = run.records[k - 1]
    y = f.gradient_at(rec.x) - f.gradient_at(x_prev)
    # Transforms skipped as near singular do not occupy a chain slot.
    used = sum(1 for r in run.records[:k] if r.event is None)
    prefix = run.chain.prefix(used)
    return SecantReport(k, _rel(h_apply(prefix, y), rec.m))


@dataclass
class TraceComparison:
    """Max relative deviations between the explicit and chain-based runs."""

    p: float
    g: float
    alpha: float
    x: float
    iterations: tuple[int, int]

    @property
    def max_deviation(self) -> float:
        return max(self.p, self.g, self.alpha, self.x)


def compare_algorithm_traces(q: QuadraticObjective, x0, stop_tol: float = 1e-8
                             ) -> TraceComparison:
    """Run both formulations from the same point and compare ``p, g, alpha``.

    Also checks ``x_k = l_1 o ... o l_k (w_k)``.  Vectors are compared
    relative to ``|p_1|`` (see :func:`verify_cg_equivalence`).
    """
    run = _exact_run(q, x0, stop_tol)
    states = algorithm1_quadratic(q, x0, stop_tol)
    scale = np.linalg.norm(states[0].p) if states else 1.0
    dp = dg = da = dx = 0.0
    for rec, st in zip(run.records, states):
        dp = max(dp, _rel(rec.p, st.p, scale))
        dg = max(dg, _rel(rec.g, st.g, scale))
        da = max(da, abs(rec.alpha - st.alpha) / abs(st.alpha))
        dx = max(dx, _rel(st.x(), rec.x))
    return TraceComparison(dp, dg, da, dx, (run.iterations, len(states)))
