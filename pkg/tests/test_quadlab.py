import numpy as np
import pytest

from oracles import rel_err
from sdicov.errors import BreakdownError, NotPositiveDefinite, ZeroDirection
from sdicov.linesearch import LineSearchSpec
from sdicov.optimizers import TerminationPolicy, sdicov_minimize
from sdicov.problems import Rosenbrock, rosenbrock_start
from sdicov.quadlab import (
    QuadraticObjective,
    algorithm1_quadratic,
    compare_algorithm_traces,
    krylov_dim,
    linear_cg,
    random_quadratic,
    random_spd,
    verify_cg_equivalence,
    verify_secant,
    verify_subspace_shrinkage,
)
from sdicov.transforms import apply_adjoint

DIAG12 = QuadraticObjective(np.diag([1.0, 2.0]), np.zeros(2))
W11 = np.array([1.0, 1.0])


def exact_run(q, x0, tol=1e-10):
    return sdicov_minimize(q, x0, q.exact_search(),
                           TerminationPolicy(grad_rel_tol=tol, max_iterations=q.dimension))


# -- objective ---------------------------------------------------------------

def test_quadratic_rejects_bad_matrices():
    with pytest.raises(ValueError):
        QuadraticObjective(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))
    with pytest.raises(NotPositiveDefinite):
        QuadraticObjective(np.diag([1.0, -1.0]), np.zeros(2))


def test_random_spd_spectrum():
    A = random_spd(12, 0, kappa=1e3)
    lam = np.linalg.eigvalsh(A)
    assert lam.min() >= 1 - 1e-10 and lam.max() <= 1e3 * (1 + 1e-10)
    np.testing.assert_allclose(A, A.T, rtol=0, atol=0)
    q = random_quadratic(20, 5, n_distinct=3)
    assert len(np.unique(np.round(np.linalg.eigvalsh(q.A), 6))) == 3


def test_random_quadratic_is_seeded():
    a, b = random_quadratic(7, 11), random_quadratic(7, 11)
    np.testing.assert_array_equal(a.A, b.A)
    np.testing.assert_array_equal(a.b, b.b)


# -- linear CG ---------------------------------------------------------------

def test_linear_cg_identity_one_step():
    q = QuadraticObjective(np.eye(3), np.array([1.0, 2.0, 3.0]))
    states = linear_cg(q, np.zeros(3))
    assert len(states) == 2
    np.testing.assert_allclose(states[-1].x, [1.0, 2.0, 3.0])


def test_linear_cg_hand_recurrence():
    states = linear_cg(DIAG12, W11)
    np.testing.assert_array_equal(states[0].r, [-1.0, -2.0])
    s1 = states[1]
    assert s1.alpha == pytest.approx(5 / 9, rel=1e-15)
    np.testing.assert_allclose(s1.r, [-4 / 9, 2 / 9], rtol=1e-15)
    assert len(states) - 1 <= 2
    np.testing.assert_allclose(states[-1].x, np.linalg.solve(DIAG12.A, DIAG12.b), atol=1e-15)


def test_linear_cg_distinct_eigenvalue_bound():
    q = random_quadratic(6, 4, kappa=10.0, n_distinct=3)
    states = linear_cg(q, np.zeros(6), tol=1e-10)
    assert len(states) - 1 <= 3


def test_linear_cg_residual_invariants():
    q = random_quadratic(8, 0, kappa=10.0)
    states = linear_cg(q, np.zeros(8), tol=1e-12)
    r0 = np.linalg.norm(states[0].r)
    for st in states:
        # measured against |r_0|: the last residuals sit at rounding level
        assert np.linalg.norm(st.r - (q.b - q.A @ st.x)) <= 1e-10 * r0
    # the terminal residual is rounding noise (zero in exact arithmetic)
    rs = [st.r for st in states[:-1]]
    for i in range(len(rs)):
        for j in range(i):
            assert abs(rs[i] @ rs[j]) <= 1e-8 * np.linalg.norm(rs[i]) * np.linalg.norm(rs[j])


def test_linear_cg_breakdown_on_indefinite_input():
    q = QuadraticObjective(np.diag([1.0, -1.0]), np.array([1.0, 1.0]), check=False)
    with pytest.raises(BreakdownError):
        linear_cg(q, np.array([0.0, 0.0]))


# -- explicit algorithm ---------------------------------------------------------

def test_algorithm1_identity_terminates_immediately():
    b = np.array([1.0, -2.0, 0.5])
    q = QuadraticObjective(np.eye(3), b)
    states = algorithm1_quadratic(q, np.zeros(3))
    assert len(states) == 1 and states[0].terminal
    assert len(states[0].chain) == 0
    np.testing.assert_allclose(states[-1].x(), b, rtol=1e-15)


def test_algorithm1_diag12():
    states = algorithm1_quadratic(DIAG12, W11)
    assert len(states) <= 2
    np.testing.assert_allclose(states[-1].x(), [0.0, 0.0], atol=1e-15)


def test_algorithm1_composed_value_invariant():
    # f_{k-1}(w_tilde_k) = f_k(w_k), with f_k(w) = w^T A_k w / 2 - b_k^T w
    q = random_quadratic(8, 2, kappa=10.0)
    b_prev = q.b
    for st in algorithm1_quadratic(q, np.zeros(8)):
        f_before = 0.5 * st.w_tilde @ st.A_prev @ st.w_tilde - b_prev @ st.w_tilde
        f_after = 0.5 * st.w @ st.A @ st.w - st.b @ st.w
        assert abs(f_before - f_after) <= 1e-10 * abs(f_before)
        b_prev = st.b


def test_alpha_recurrences_and_eigenvector_identity():
    for seed in range(5):
        q = random_quadratic(8, seed, kappa=10.0)
        states = algorithm1_quadratic(q, np.zeros(8))
        for st, nxt in zip(states, states[1:]):
            scale = np.linalg.norm(st.p)
            # g_k = p_k - alpha_k A_{k-1} p_k and p_{k+1} = l_k^T(g_k)
            assert np.linalg.norm(st.g - (st.p - st.alpha * st.A_prev @ st.p)) <= 1e-10 * scale
            assert np.linalg.norm(nxt.p - apply_adjoint(st.chain[-1], st.g)) <= 1e-10 * scale
            # l_k^T A_{k-1} p_k = p_k / alpha_k
            lhs = apply_adjoint(st.chain[-1], st.A_prev @ st.p)
            assert rel_err(lhs, st.p / st.alpha) <= 1e-10


# -- Krylov ----------------------------------------------------------------------

def test_krylov_examples():
    assert krylov_dim(np.eye(3), np.array([1.0, 2.0, 3.0])).dim == 1
    assert krylov_dim(np.diag([1.0, 2.0, 3.0]), np.ones(3)).dim == 3
    assert krylov_dim(np.diag([1.0, 1.0, 3.0]), np.ones(3)).dim == 2
    with pytest.raises(ZeroDirection):
        krylov_dim(np.eye(2), np.zeros(2))


def test_krylov_dim_matches_vandermonde_rank():
    # dimension = number of distinct eigenvalues touched by p
    lam = np.array([1.0, 2.0, 2.0, 5.0, 7.0, 7.0])
    Q = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 6)))[0]
    A = (Q * lam) @ Q.T
    coeffs = np.array([1.0, 0.5, -0.3, 0.0, 2.0, 1.0])
    p = Q @ coeffs
    touched = np.unique(lam[coeffs != 0])
    V = np.vander(touched, increasing=True)
    assert krylov_dim(A, p).dim == np.linalg.matrix_rank(V) == 3


def test_krylov_basis_is_orthonormal():
    A = random_spd(10, 3, kappa=10.0)
    B = krylov_dim(A, np.ones(10)).basis
    np.testing.assert_allclose(B.T @ B, np.eye(B.shape[1]), atol=1e-12)


# -- verifiers ---------------------------------------------------------------

def test_cg_equivalence_identity():
    q = QuadraticObjective(np.eye(3), np.array([1.0, 2.0, 3.0]))
    rep = verify_cg_equivalence(q, np.zeros(3))
    assert rep.sdicov_iterations == rep.cg_iterations == 1
    assert rep.max_deviation == 0.0


def test_cg_equivalence_first_direction():
    run = exact_run(DIAG12, W11)
    np.testing.assert_array_equal(run.records[0].m, [-1.0, -2.0])
    assert linear_cg(DIAG12, W11)[1].n_dir.tolist() == [-1.0, -2.0]
    assert verify_cg_equivalence(DIAG12, W11).passed


@pytest.mark.parametrize("seed", range(10))
def test_cg_equivalence_mild_conditioning(seed):
    rep = verify_cg_equivalence(random_quadratic(10, seed, kappa=10.0), np.zeros(10))
    assert rep.passed, rep.max_deviation


def test_shrinkage_identity():
    q = QuadraticObjective(np.eye(4), np.ones(4))
    rep = verify_subspace_shrinkage(q, np.zeros(4))
    assert rep.dims == [1]
    assert rep.passed


def test_shrinkage_three_distinct_eigenvalues():
    q = random_quadratic(8, 1, kappa=10.0, n_distinct=3)
    rep = verify_subspace_shrinkage(q, np.zeros(8))
    assert rep.dims[0] <= 3
    assert len(rep.dims) <= 3
    assert rep.passed


def test_shrinkage_limit():
    with pytest.raises(ValueError):
        verify_subspace_shrinkage(random_quadratic(51, 0), np.zeros(51))


def test_secant_diag12():
    run = exact_run(DIAG12, W11)
    assert verify_secant(DIAG12, run, 1).residual <= 1e-10


def test_secant_isotropic_one_step():
    q = QuadraticObjective(np.eye(3), np.array([1.0, 2.0, 3.0]))
    run = exact_run(q, np.zeros(3))
    assert run.iterations == 1
    assert verify_secant(q, run, 1).residual <= 1e-10


def test_secant_index_range():
    run = exact_run(DIAG12, W11)
    with pytest.raises(IndexError):
        verify_secant(DIAG12, run, 0)
    with pytest.raises(IndexError):
        verify_secant(DIAG12, run, run.iterations + 1)


def test_secant_inexact_search_is_only_reported():
    r = Rosenbrock(2)
    run = sdicov_minimize(r, rosenbrock_start(2), LineSearchSpec(0.5),
                          TerminationPolicy(max_iterations=20))
    res = verify_secant(r, run, 5).residual
    assert np.isfinite(res)


def test_algorithm_traces_agree_mild_conditioning():
    for seed in range(5):
        cmp = compare_algorithm_traces(random_quadratic(10, seed, kappa=10.0), np.zeros(10))
        assert cmp.iterations[0] == cmp.iterations[1]
        assert cmp.max_deviation <= 1e-10
