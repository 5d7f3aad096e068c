import itertools

import numpy as np
import pytest

from sdicov.linesearch import LineSearchSpec
from sdicov.optimizers import sdicov_minimize
from sdicov.problems import (
    DistanceGeometryInstance,
    Rosenbrock,
    configuration_diameter,
    distg_bundle,
    format_instance,
    generate_distg,
    initial_point,
    parse_instance,
    read_instance,
    rosenbrock_start,
    standard_suite,
    write_instance,
)


def brute_force_value(truth_fixed, x_free, edges, d):
    """Independent evaluation: loop over edges with explicit positions."""
    pos = list(map(tuple, truth_fixed)) + [tuple(x_free[i:i + 2]) for i in range(0, len(x_free), 2)]
    total = 0.0
    for (i, j), dij in zip(edges, d):
        dx, dy = pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]
        total += (dx * dx + dy * dy - dij * dij) ** 2
    return total


def central_fd(f, x, h=None):
    h = 1e-6 * (1 + np.linalg.norm(x)) if h is None else h
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def three_particle(d13, d23):
    truth = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    edges = np.array([[0, 1], [0, 2], [1, 2]])
    return DistanceGeometryInstance(truth, edges, np.array([1.0, d13, d23]))


# -- hand example -------------------------------------------------------------

def test_three_particle_example_with_stated_distances():
    # unit target distances from particle 3 to both fixed particles
    inst = three_particle(1.0, 1.0)
    x = np.array([1.0, 1.0])
    oracle = brute_force_value(inst.fixed, x, inst.edges, inst.d)
    assert oracle == 1.0
    assert inst.value_at(x) == 1.0
    np.testing.assert_allclose(inst.gradient_at(x), [4.0, 4.0], rtol=1e-15)
    np.testing.assert_allclose(central_fd(inst.value_at, x), [4.0, 4.0], rtol=1e-8)


def test_three_particle_example_with_truth_distances():
    # distances taken from the listed truth positions: d_23^2 = 2
    inst = three_particle(1.0, np.sqrt(2.0))
    x = np.array([1.0, 1.0])
    assert inst.value_at(x) == pytest.approx(brute_force_value(inst.fixed, x, inst.edges, inst.d),
                                             rel=1e-15)
    assert inst.value_at(x) == pytest.approx(2.0, rel=1e-15)
    np.testing.assert_allclose(inst.gradient_at(x), [4.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(inst.value_at(inst.truth_free()), 0.0, atol=1e-30)


# -- generation ------------------------------------------------------------------

def test_three_particles_complete_graph():
    for seed in range(5):
        inst = generate_distg(3, seed=seed)
        assert inst.n_edges == 3
        assert inst.dimension == 2


def test_complete_graph_counts():
    inst = generate_distg(10, edge_fraction=1.0, seed=0)
    assert inst.n_edges == 45
    assert inst.dimension == 16
    assert generate_distg(100, edge_fraction=1.0, seed=0).dimension == 196


def test_generation_invariants():
    for n, seed in itertools.product((4, 10, 50), range(5)):
        inst = generate_distg(n, 0.3, seed)
        assert np.all(inst.edges[:, 0] < inst.edges[:, 1])
        assert len({tuple(e) for e in inst.edges.tolist()}) == inst.n_edges
        assert inst.degrees().min() >= 3
        assert is_connected(n, inst.edges)
        assert inst.value_at(inst.truth_free()) <= 1e-20
        np.testing.assert_allclose(inst.gradient_at(inst.truth_free()), 0.0, atol=1e-12)
        truth = inst.truth
        assert truth.min() >= 0 and truth.max() <= 1


def is_connected(n, edges):
    seen, stack = {0}, [0]
    adj = {v: set() for v in range(n)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    while stack:
        for u in adj[stack.pop()] - seen:
            seen.add(u)
            stack.append(u)
    return len(seen) == n


def test_generation_is_deterministic():
    a, b = generate_distg(20, 0.3, 7), generate_distg(20, 0.3, 7)
    assert format_instance(a) == format_instance(b)
    assert format_instance(a) != format_instance(generate_distg(20, 0.3, 8))


def test_generation_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generate_distg(2)
    with pytest.raises(ValueError):
        generate_distg(5, edge_fraction=0.0)


# -- gradient -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    inst = generate_distg(10, 0.3, seed)
    rng = np.random.default_rng(100 + seed)
    for _ in range(20):
        x = inst.truth_free() + rng.normal(0, 0.2, inst.dimension)
        fd = central_fd(inst.value_at, x)
        assert np.linalg.norm(inst.gradient_at(x) - fd) <= 1e-6 * np.linalg.norm(fd)


# -- initial point ------------------------------------------------------------

def test_initial_point_noise_free_is_truth():
    inst = generate_distg(10, seed=3)
    np.testing.assert_array_equal(initial_point(inst, 0.0, seed=3), inst.truth_free())


def test_initial_point_is_seeded_and_scaled():
    inst = generate_distg(50, seed=3)
    a, b = initial_point(inst, 0.05, seed=3), initial_point(inst, 0.05, seed=3)
    np.testing.assert_array_equal(a, b)
    sigma = 0.05 * configuration_diameter(inst.truth)
    spread = np.std(a - inst.truth_free())
    assert 0.7 * sigma < spread < 1.3 * sigma
    with pytest.raises(ValueError):
        initial_point(inst, -1.0)


def test_configuration_diameter():
    assert configuration_diameter([[0, 0], [3, 4], [1, 1]]) == 5.0


def test_sdicov_reaches_small_value_from_default_start():
    b = distg_bundle(10, seed=0)
    run = sdicov_minimize(b.oracle, b.x0, LineSearchSpec(0.2))
    assert run.converged
    assert run.final_f <= 1e-7


# -- file format ------------------------------------------------------------------

def test_format_header_and_round_trip(tmp_path):
    inst = generate_distg(10, 0.3, 7)
    text = format_instance(inst)
    assert text.splitlines()[0] == f"distg 10 {inst.n_edges} 7"
    assert sum(ln.startswith("P ") for ln in text.splitlines()) == 10
    path = tmp_path / "inst.txt"
    write_instance(inst, path)
    back = read_instance(path)
    np.testing.assert_array_equal(back.truth, inst.truth)
    np.testing.assert_array_equal(back.edges, inst.edges)
    np.testing.assert_array_equal(back.d, inst.d)
    assert back.seed == 7
    assert format_instance(back) == text


def test_parse_rejects_malformed_text():
    with pytest.raises(ValueError):
        parse_instance("nonsense\n")
    with pytest.raises(ValueError):
        parse_instance("distg 3 1 0\nP 0 0 0\nP 1 1 0\nP 2 0 1\n")
    with pytest.raises(ValueError):
        parse_instance("distg 3 0 0\nP 0 0 0\nP 1 1 0\n")


# -- standard suite -----------------------------------------------------------

def test_standard_suite_contents():
    suite = {b.name: b for b in standard_suite()}
    assert {"rosenbrock-2", "rosenbrock-10", "quadratic-illcond", "quadratic-random"} <= set(suite)
    r2 = suite["rosenbrock-2"]
    np.testing.assert_array_equal(r2.x_star, [1.0, 1.0])
    assert r2.oracle.value_at(r2.x_star) == 0.0
    np.testing.assert_array_equal(r2.x0, [-1.2, 1.0])
    ill = suite["quadratic-illcond"].oracle
    assert np.linalg.cond(ill.A) == pytest.approx(1e4, rel=1e-6)
    for name in ("quadratic-illcond", "quadratic-random"):
        b = suite[name]
        np.testing.assert_allclose(b.oracle.A @ b.x_star, b.oracle.b, rtol=1e-10, atol=1e-12)


def test_standard_suite_gradients():
    rng = np.random.default_rng(0)
    for b in standard_suite():
        for _ in range(5):
            x = b.x0 + rng.normal(0, 0.1, b.x0.size)
            fd = central_fd(b.oracle.value_at, x)
            assert np.linalg.norm(b.oracle.gradient_at(x) - fd) <= 1e-6 * np.linalg.norm(fd)


def test_rosenbrock_basics():
    r = Rosenbrock(4)
    np.testing.assert_array_equal(rosenbrock_start(4), [-1.2, 1.0, -1.2, 1.0])
    assert r.value_at(np.ones(4)) == 0.0
    np.testing.assert_array_equal(r.gradient_at(np.ones(4)), np.zeros(4))
    with pytest.raises(ValueError):
        Rosenbrock(1)
