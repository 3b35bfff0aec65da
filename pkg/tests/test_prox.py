import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treefusion.model import TreeGroupStructure, validate_tree
from treefusion.prox import (
    dual_norm_joint, group_soft_threshold, prox_joint, prox_tree, soft_threshold,
    soft_threshold_scalar, tree_norm,
)

from conftest import random_tree, trees

finite = st.floats(-10, 10, allow_nan=False)


@pytest.mark.parametrize("x,tau,out", [(0.5, 1, 0.0), (-2, 1, -1.0), (3, 0, 3.0)])
def test_soft_threshold_scalar(x, tau, out):
    assert soft_threshold_scalar(x, tau) == out


def test_group_soft_threshold():
    np.testing.assert_array_equal(group_soft_threshold([3, 4], 5), [0, 0])
    np.testing.assert_allclose(group_soft_threshold([3, 4], 2.5), [1.5, 2.0])
    np.testing.assert_array_equal(group_soft_threshold([0, 0], 1), [0, 0])


def test_prox_tree_examples():
    root = TreeGroupStructure.root_only(2)
    assert np.all(prox_tree(np.zeros((3, 2)), random_tree(np.random.default_rng(1), 2), 1.0) == 0)
    np.testing.assert_allclose(prox_tree([[3.0, 4.0]], root, 2.5), [[1.5, 2.0]])
    t = validate_tree([{1}, {2}, {1, 2}], [1, 1, 1], 2)
    expect = np.array([2.0, 3.0]) * (1 - 1 / np.sqrt(13))
    np.testing.assert_allclose(prox_tree([[3.0, 4.0]], t, 1.0)[0], expect, rtol=0, atol=1e-12)
    np.testing.assert_allclose(expect, [1.4452998, 2.1679497], atol=1e-6)
    single = TreeGroupStructure.singletons(2)
    np.testing.assert_allclose(prox_tree([[0.5, -2.0]], single, 1.0), [[0.0, -1.0]])


def test_prox_joint_examples():
    np.testing.assert_allclose(prox_joint([[3, 4], [0.3, 0.4]], 2.5), [[1.5, 2.0], [0, 0]])
    V = np.random.default_rng(0).standard_normal((5, 3))
    np.testing.assert_array_equal(prox_joint(V, 0.0), V)


def test_dual_norm_joint():
    assert dual_norm_joint([[3, 4], [1, 0]]) == 5
    assert dual_norm_joint(np.zeros((3, 2))) == 0
    assert dual_norm_joint([[1.0, 2.0]]) == pytest.approx(np.sqrt(5))


def test_prox_tree_rejects_bad_input():
    t = TreeGroupStructure.root_only(2)
    with pytest.raises(ValueError):
        prox_tree(np.ones((2, 3)), t, 1.0)
    with pytest.raises(ValueError):
        prox_tree(np.ones((2, 2)), t, 0.0)


@settings(max_examples=60, deadline=None)
@given(tree=trees(), seed=st.integers(0, 2**31), beta=st.floats(0.05, 3.0))
def test_prox_nonexpansive(tree, seed, beta):
    rng = np.random.default_rng(seed)
    V1 = 3 * rng.standard_normal((6, tree.n_modalities))
    V2 = 3 * rng.standard_normal((6, tree.n_modalities))
    d_out = np.linalg.norm(prox_tree(V1, tree, beta) - prox_tree(V2, tree, beta), axis=1)
    assert np.all(d_out <= np.linalg.norm(V1 - V2, axis=1) + 1e-12)


@settings(max_examples=60, deadline=None)
@given(tree=trees(), seed=st.integers(0, 2**31), beta=st.floats(0.05, 3.0))
def test_prox_zero_pattern_is_union_of_groups(tree, seed, beta):
    """Zeros of a prox row form a union of groups, written as exact zeros."""
    rng = np.random.default_rng(seed)
    U = prox_tree(2 * rng.standard_normal((10, tree.n_modalities)), tree, beta)
    masks = tree.masks().astype(bool)
    for row in U:
        zero = row == 0
        covered = np.zeros_like(zero)
        for m in masks:
            if np.all(zero[m]):
                covered |= m
        assert np.array_equal(covered, zero)


@settings(max_examples=60, deadline=None)
@given(tree=trees(), seed=st.integers(0, 2**31), beta=st.floats(0.05, 3.0))
def test_prox_optimality_against_perturbations(tree, seed, beta):
    rng = np.random.default_rng(seed)
    v = 2 * rng.standard_normal((1, tree.n_modalities))
    u = prox_tree(v, tree, beta)

    def obj(x):
        return tree_norm(x, tree) + ((x - v) ** 2).sum() / (2 * beta)

    base = obj(u)
    for _ in range(20):
        assert obj(u + 1e-3 * rng.standard_normal(u.shape)) >= base - 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), S=st.integers(1, 5), tau=st.floats(0.0, 4.0))
def test_reductions(seed, S, tau):
    V = 2 * np.random.default_rng(seed).standard_normal((7, S))
    beta = max(tau, 1e-3)
    np.testing.assert_allclose(prox_tree(V, TreeGroupStructure.root_only(S), beta),
                               prox_joint(V, beta), rtol=0, atol=1e-12)
    np.testing.assert_allclose(prox_tree(V, TreeGroupStructure.singletons(S), beta),
                               soft_threshold(V, beta), rtol=0, atol=1e-12)


def test_tree_norm_of_root_only_is_row_norm_sum():
    A = np.random.default_rng(3).standard_normal((9, 3))
    assert tree_norm(A, TreeGroupStructure.root_only(3)) == pytest.approx(
        np.linalg.norm(A, axis=1).sum(), rel=1e-14)
