import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treefusion.fusion import QualityWeights
from treefusion.model import MultimodalSample, TreeGroupStructure, build_dictionary
from treefusion.prox import dual_norm_joint
from treefusion.solver import (
    SolverError, SolverSettings, SparsityPrior, StepRule, grad_f, lipschitz_step, objective,
    power_iteration, solve, spectral_norm_sq,
)

from conftest import random_problem, random_tree


def _weights(mu):
    mu = np.asarray(mu, dtype=float)
    return QualityWeights(mu, np.ones_like(mu))


def _orthonormal_dict(rng, n, S):
    mats = [np.linalg.qr(rng.standard_normal((n, n)))[0] for _ in range(S)]
    # one atom per class keeps the columns in the given order
    return build_dictionary([[m[:, [j]].T for m in mats] for j in range(n)]), mats


def test_objective_at_zero():
    rng = np.random.default_rng(0)
    D, y = random_problem(rng)
    w = _weights([0.5, 1.0, 0.8])
    expect = 0.5 * sum(ws * v @ v for ws, v in zip(w.mu ** 2, y.vectors))
    A0 = np.zeros((D.n_atoms, 3))
    assert objective(A0, D, y, SparsityPrior.joint(1.0), w) == pytest.approx(expect)


def test_objective_exact_fit_is_penalty():
    rng = np.random.default_rng(1)
    D, _ = random_problem(rng, S=2)
    A = np.zeros((D.n_atoms, 2))
    A[3] = (3.0, 4.0)
    y = MultimodalSample(tuple(X @ A[:, s] for s, X in enumerate(D.matrices)))
    assert objective(A, D, y, SparsityPrior.joint(1.0)) == pytest.approx(5.0)


def test_root_tree_penalty_equals_joint():
    rng = np.random.default_rng(2)
    tree = SparsityPrior.from_tree(TreeGroupStructure.root_only(3), 1.0)
    joint = SparsityPrior.joint(1.0)
    for _ in range(20):
        A = rng.standard_normal((10, 3))
        assert tree.penalty(A) == pytest.approx(joint.penalty(A), rel=1e-13)


def test_gradient_at_zero_and_exact_fit():
    rng = np.random.default_rng(3)
    D, y = random_problem(rng)
    w = _weights([0.3, 0.6, 0.9])
    G = grad_f(np.zeros((D.n_atoms, 3)), D, y, w)
    for s, X in enumerate(D.matrices):
        np.testing.assert_allclose(G[:, s], -w.mu[s] ** 2 * X.T @ y.vectors[s])
    A = rng.standard_normal((D.n_atoms, 3))
    exact = MultimodalSample(tuple(X @ A[:, s] for s, X in enumerate(D.matrices)))
    np.testing.assert_allclose(grad_f(A, D, exact), 0.0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), weighted=st.booleans())
def test_gradient_matches_finite_differences(seed, weighted):
    rng = np.random.default_rng(seed)
    D, y = random_problem(rng, n=6, N=8, S=2)
    w = _weights(rng.uniform(0.1, 1.0, 2)) if weighted else None
    A = rng.standard_normal((8, 2))
    prior = SparsityPrior.joint(1e-300)  # penalty negligible: tests the smooth part
    G = grad_f(A, D, y, w)
    h = 1e-6
    num = np.zeros_like(A)
    for idx in np.ndindex(A.shape):
        E = np.zeros_like(A)
        E[idx] = h
        num[idx] = (objective(A + E, D, y, prior, w) - objective(A - E, D, y, prior, w)) / (2 * h)
    assert np.linalg.norm(num - G) <= 1e-5 * max(np.linalg.norm(G), 1e-12)


def test_lipschitz_examples():
    rng = np.random.default_rng(4)
    D, _ = _orthonormal_dict(rng, 5, 2)
    assert lipschitz_step(D) == pytest.approx(1.0, rel=1e-9)
    assert 1.0 / power_iteration(2.0 * np.eye(4)) == pytest.approx(0.25)


def test_lipschitz_matches_svd():
    rng = np.random.default_rng(5)
    for _ in range(5):
        X = rng.standard_normal((7, 12))
        sig2 = np.linalg.svd(X, compute_uv=False)[0] ** 2
        assert abs(spectral_norm_sq(X) - sig2) <= 1e-6 * sig2
        assert power_iteration(X) <= sig2 * (1 + 1e-12)
    # power iteration converges when the spectrum has a clear gap
    X = np.diag([3.0, 1.0, 0.5]) @ np.linalg.qr(rng.standard_normal((3, 3)))[0]
    assert power_iteration(X) == pytest.approx(9.0, rel=1e-9)
    D, _ = random_problem(rng)
    w = _weights([0.2, 0.9, 0.5])
    L = max(ws * np.linalg.svd(X, compute_uv=False)[0] ** 2 for ws, X in zip(w.mu ** 2, D.matrices))
    assert 1.0 / lipschitz_step(D, w) == pytest.approx(L, rel=1e-6)


@pytest.mark.parametrize("rule", list(StepRule))
def test_zero_solution_above_lambda_max(rule):
    rng = np.random.default_rng(6)
    D, y = random_problem(rng)
    lam_max = dual_norm_joint(-grad_f(np.zeros((D.n_atoms, 3)), D, y))
    res = solve(D, y, SparsityPrior.joint(lam_max * 1.0001), SolverSettings(step_rule=rule))
    assert np.all(res.coefficients == 0.0)


def test_least_squares_limit():
    rng = np.random.default_rng(7)
    D, mats = _orthonormal_dict(rng, 6, 2)
    y = MultimodalSample(tuple(rng.standard_normal(6) for _ in range(2)))
    res = solve(D, y, SparsityPrior.l1(1e-12), SolverSettings(max_iter=2000, tol=1e-14))
    for s, X in enumerate(D.matrices):
        np.testing.assert_allclose(res.coefficients[:, s], X.T @ y.vectors[s], atol=1e-6)


def test_backtracking_agrees_with_fixed_step():
    rng = np.random.default_rng(8)
    D, y = random_problem(rng)
    prior = SparsityPrior.from_tree(random_tree(rng, 3), 0.05)
    tight = dict(max_iter=20000, tol=1e-13)
    a = solve(D, y, prior, SolverSettings(**tight))
    b = solve(D, y, prior, SolverSettings(step_rule=StepRule.BACKTRACKING, step=10.0, **tight))
    assert b.objective == pytest.approx(a.objective, rel=1e-8)
    assert b.step < 10.0


def test_warm_start_never_worse():
    rng = np.random.default_rng(9)
    D, y = random_problem(rng)
    prior = SparsityPrior.joint(0.1)
    good = solve(D, y, prior, SolverSettings(max_iter=5000, tol=1e-13))
    again = solve(D, y, prior, SolverSettings(max_iter=1), initial=good.coefficients)
    assert again.objective <= good.objective


def test_divergent_step_raises():
    rng = np.random.default_rng(10)
    D, y = random_problem(rng)
    with pytest.raises(SolverError):
        solve(D, y, SparsityPrior.joint(1e-3), SolverSettings(step=1e6, max_iter=2000))


def test_settings_validation():
    with pytest.raises(ValueError):
        SolverSettings(tol=0)
    with pytest.raises(ValueError):
        SolverSettings(shrink=1.0)
    with pytest.raises(ValueError):
        SparsityPrior.joint(0.0)
    with pytest.raises(ValueError):
        SparsityPrior(SparsityPrior.joint(1).kind.__class__("tree"), 1.0)
