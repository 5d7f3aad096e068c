"""Test objectives.

The main problem is planar distance geometry: recover particle positions
from a subset of pairwise distances by minimizing

    f(x) = sum over edges (i, j) of (|x_i - x_j|^2 - d_ij^2)^2

with particles 0 and 1 pinned at their true positions.  Instances are built
from random true positions, so the global minimum (value 0) is known.

Randomness comes from NumPy's ``Generator`` on the PCG64 bit generator
(PCG-XSL-RR 128/64) seeded with ``numpy.random.default_rng(seed)``; instance
files written by :func:`write_instance` store every coordinate and distance
with 17 significant digits, so they reproduce exactly without the RNG.

Particles are indexed from 0.  Free coordinates are stored flat, particle
by particle with ``(x, y)`` interleaved: ``[x_2, y_2, x_3, y_3, ...]``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .quadlab import QuadraticObjective, random_quadratic, random_spd

DIM_SPACE = 2
N_FIXED = 2
DEFAULT_EDGE_FRACTION = 0.3
DEFAULT_NOISE = 0.05
MIN_DEGREE = 3


@dataclass(frozen=True, eq=False)
class DistanceGeometryInstance:
    """A planar distance-geometry problem with known solution ``truth``."""

    truth: np.ndarray  # (n_particles, 2)
    edges: np.ndarray  # (n_edges, 2) int, rows (i, j) with i < j
    d: np.ndarray  # (n_edges,)
    seed: int | None = None
    _d_sq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_d_sq", self.d ** 2)

    @property
    def n_particles(self) -> int:
        return self.truth.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def dimension(self) -> int:
        """Number of unknowns, ``2 (n_particles - 2)``."""
        return DIM_SPACE * (self.n_particles - N_FIXED)

    @property
    def fixed(self) -> np.ndarray:
        return self.truth[:N_FIXED]

    def truth_free(self) -> np.ndarray:
        return self.truth[N_FIXED:].ravel().copy()

    def positions(self, x) -> np.ndarray:
        """All particle positions for free coordinates ``x``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected {self.dimension} free coordinates, got shape {x.shape}")
        return np.vstack([self.fixed, x.reshape(-1, DIM_SPACE)])

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_particles)

    # objective-oracle interface
    def value_at(self, x) -> float:
        return distg_value(self, x)

    def gradient_at(self, x) -> np.ndarray:
        return distg_gradient(self, x)


def generate_distg(n_particles: int, edge_fraction: float = DEFAULT_EDGE_FRACTION,
                   seed: int = 0) -> DistanceGeometryInstance:
    """Random instance with a known zero-residual minimizer.

    True positions are uniform in the unit square.  The edge set is a random
    spanning tree, plus every other pair independently with probability
    ``edge_fraction``, plus extra random edges until each particle has
    degree at least 3.  With three particles the complete graph is used.
    """
    if n_particles < 3:
        raise ValueError("need at least 3 particles")
    if not 0.0 < edge_fraction <= 1.0:
        raise ValueError("edge_fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    truth = rng.uniform(0.0, 1.0, size=(n_particles, DIM_SPACE))

    adj = np.zeros((n_particles, n_particles), dtype=bool)
    if n_particles == 3:
        adj[:] = True
    else:
        order = rng.permutation(n_particles)
        for pos in range(1, n_particles):
            a, b = order[pos], order[rng.integers(pos)]
            adj[a, b] = adj[b, a] = True
        iu, ju = np.triu_indices(n_particles, 1)
        extra = rng.random(iu.size) < edge_fraction
        adj[iu[extra], ju[extra]] = True
        adj[ju[extra], iu[extra]] = True
        np.fill_diagonal(adj, False)
        for v in range(n_particles):
            while adj[v].sum() < MIN_DEGREE:
                choices = np.flatnonzero(~adj[v])
                choices = choices[choices != v]
                u = choices[rng.integers(choices.size)]
                adj[v, u] = adj[u, v] = True
    np.fill_diagonal(adj, False)
    i, j = np.nonzero(np.triu(adj, 1))
    edges = np.column_stack([i, j]).astype(np.int64)
    d = np.linalg.norm(truth[i] - truth[j], axis=1)
    return DistanceGeometryInstance(truth, edges, d, seed)


def _residuals(inst: DistanceGeometryInstance, x):
    pos = inst.positions(x)
    diff = pos[inst.edges[:, 0]] - pos[inst.edges[:, 1]]
    return diff, np.einsum("ij,ij->i", diff, diff) - inst._d_sq


def distg_value(inst: DistanceGeometryInstance, x) -> float:
    _, res = _residuals(inst, x)
    return float(res @ res)


def distg_gradient(inst: DistanceGeometryInstance, x) -> np.ndarray:
    """Gradient with respect to the free coordinates only.

    Each edge contributes ``4 r_ij (x_i - x_j)`` to particle ``i`` and the
    negative to particle ``j``, where ``r_ij = |x_i - x_j|^2 - d_ij^2``.
    """
    diff, res = _residuals(inst, x)
    force = 4.0 * res[:, None] * diff
    grad = np.zeros((inst.n_particles, DIM_SPACE))
    np.add.at(grad, inst.edges[:, 0], force)
    np.add.at(grad, inst.edges[:, 1], -force)
    return grad[N_FIXED:].ravel()


def configuration_diameter(points) -> float:
    points = np.asarray(points, dtype=float)
    diff = points[:, None, :] - points[None, :, :]
    return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))


def initial_point(inst: DistanceGeometryInstance, noise_scale: float = DEFAULT_NOISE,
                  seed: int = 0) -> np.ndarray:
    """True free coordinates plus Gaussian noise.

    The standard deviation is ``noise_scale`` times the diameter of the true
    configuration.
    """
    if noise_scale < 0:
        raise ValueError("noise_scale must be nonnegative")
    x = inst.truth_free()
    if noise_scale == 0:
        return x
    # Stream keyed on (seed, 1) so it is independent of generate_distg(seed).
    rng = np.random.default_rng([seed, 1])
    sigma = noise_scale * configuration_diameter(inst.truth)
    return x + rng.normal(0.0, sigma, size=x.shape)


# --------------------------------------------------------------------------
# Text format
#
#   distg <n_particles> <n_edges> <seed>
#   P <index> <x> <y>        one line per particle
#   E <i> <j> <d>            one line per edge


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def format_instance(inst: DistanceGeometryInstance) -> str:
    out = io.StringIO()
    seed = "-" if inst.seed is None else str(inst.seed)
    out.write(f"distg {inst.n_particles} {inst.n_edges} {seed}\n")
    for k, (px, py) in enumerate(inst.truth):
        out.write(f"P {k} {_fmt(px)} {_fmt(py)}\n")
    for (i, j), d in zip(inst.edges, inst.d):
        out.write(f"E {i} {j} {_fmt(d)}\n")
    return out.getvalue()


def parse_instance(text: str) -> DistanceGeometryInstance:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0][0] != "distg" or len(lines[0]) != 4:
        raise ValueError("missing 'distg <n_particles> <n_edges> <seed>' header")
    n_particles, n_edges = int(lines[0][1]), int(lines[0][2])
    seed = None if lines[0][3] == "-" else int(lines[0][3])
    truth = np.full((n_particles, DIM_SPACE), np.nan)
    edges, d = [], []
    for parts in lines[1:]:
        if parts[0] == "P" and len(parts) == 4:
            truth[int(parts[1])] = float(parts[2]), float(parts[3])
        elif parts[0] == "E" and len(parts) == 4:
            edges.append((int(parts[1]), int(parts[2])))
            d.append(float(parts[3]))
        else:
            raise ValueError(f"unrecognized line: {' '.join(parts)}")
    if np.isnan(truth).any():
        raise ValueError("some particle positions are missing")
    if len(edges) != n_edges:
        raise ValueError(f"header announces {n_edges} edges, found {len(edges)}")
    return DistanceGeometryInstance(truth, np.array(edges, dtype=np.int64).reshape(-1, 2),
                                    np.array(d, dtype=float), seed)


def write_instance(inst: DistanceGeometryInstance, path) -> None:
    Path(path).write_text(format_instance(inst))


def read_instance(path) -> DistanceGeometryInstance:
    return parse_instance(Path(path).read_text())


# --------------------------------------------------------------------------
# Standard suite


@dataclass(frozen=True)
class ProblemBundle:
    name: str
    oracle: object
    x0: np.ndarray
    x_star: np.ndarray | None = None
    f_star: float | None = None


class Rosenbrock:
    """Chained Rosenbrock ``sum 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2``."""

    def __init__(self, n: int = 2):
        if n < 2:
            raise ValueError("Rosenbrock needs n >= 2")
        self.dimension = n

    def value_at(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))

    def gradient_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = x[1:] - x[:-1] ** 2
        grad = np.zeros_like(x)
        grad[:-1] = -400.0 * x[:-1] * t - 2.0 * (1.0 - x[:-1])
        grad[1:] += 200.0 * t
        return grad


def rosenbrock_start(n: int) -> np.ndarray:
    """The classical start ``(-1.2, 1, -1.2, 1, ...)``."""
    x0 = np.ones(n)
    x0[::2] = -1.2
    return x0


def _quadratic_bundle(name: str, q: QuadraticObjective, x0) -> ProblemBundle:
    x_star = q.minimizer()
    return ProblemBundle(name, q, np.asarray(x0, dtype=float), x_star, q.value_at(x_star))


def ill_conditioned_quadratic(n: int = 10, kappa: float = 1e4, seed: int = 0) -> QuadraticObjective:
    """Random rotation of ``diag(geomspace(1, kappa, n))`` with a random right-hand side."""
    rng = np.random.default_rng(seed)
    A = random_spd(n, rng, eigenvalues=np.geomspace(1.0, kappa, n))
    return QuadraticObjective(A, rng.standard_normal(n))


def standard_suite() -> list[ProblemBundle]:
    """Smooth regression problems with documented starts and minimizers.

    * ``rosenbrock-2``: start ``(-1.2, 1)``, minimizer ``(1, 1)``.
    * ``rosenbrock-10``: start ``(-1.2, 1, ...)``, minimizer all ones.
    * ``quadratic-illcond``: n = 10, condition number 1e4, start 0.
    * ``quadratic-random``: n = 10, log-uniform spectrum on [1, 1e3], start 0.
    """
    return [
        ProblemBundle("rosenbrock-2", Rosenbrock(2), rosenbrock_start(2), np.ones(2), 0.0),
        ProblemBundle("rosenbrock-10", Rosenbrock(10), rosenbrock_start(10), np.ones(10), 0.0),
        _quadratic_bundle("quadratic-illcond", ill_conditioned_quadratic(10, 1e4, seed=1), np.zeros(10)),
        _quadratic_bundle("quadratic-random", random_quadratic(10, seed=2), np.zeros(10)),
    ]


def distg_bundle(n_particles: int, seed: int, edge_fraction: float = DEFAULT_EDGE_FRACTION,
                 noise_scale: float = DEFAULT_NOISE) -> ProblemBundle:
    inst = generate_distg(n_particles, edge_fraction, seed)
    x_star = inst.truth_free()
    return ProblemBundle(f"distg-{n_particles}", inst, initial_point(inst, noise_scale, seed),
                         x_star, 0.0)

