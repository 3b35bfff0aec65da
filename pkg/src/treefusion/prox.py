"""Proximal operators for the l1, joint l1/l2 and tree-structured norms."""

from __future__ import annotations

import numpy as np

from ._backend import kernels
from .model import TreeGroupStructure


def soft_threshold_scalar(x: float, tau: float) -> float:
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    return float(np.sign(x) * max(abs(x) - tau, 0.0))


def soft_threshold(V, tau: float) -> np.ndarray:
    """Elementwise soft thresholding of an array."""
    V = np.asarray(V, dtype=np.float64)
    return np.sign(V) * np.maximum(np.abs(V) - tau, 0.0)


def group_soft_threshold(v, tau: float) -> np.ndarray:
    """Shrink ``v`` towards the origin by ``tau`` in Euclidean norm.

    Returns the zero vector when ``||v|| <= tau`` (including ``v = 0``).
    """
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    nrm = float(np.linalg.norm(v))
    if nrm <= tau:
        return np.zeros_like(v)
    return v * (1.0 - tau / nrm)


def prox_tree(V, tree: TreeGroupStructure, beta: float) -> np.ndarray:
    """Proximal operator of ``beta * Omega`` for a tree-structured norm.

    Solves, row by row,

        min_u  sum_g w_g ||u_g||_2 + 1/(2 beta) ||u - v||_2^2

    exactly with a single pass over the groups in children-first order. For
    each group the current residual restricted to the group is projected onto
    the ball of radius ``beta * w_g``; that projection is subtracted. When the
    residual lies inside the ball the group is set to exact zeros.

    Parameters
    ----------
    V : array_like, shape (N, S)
    tree : TreeGroupStructure
    beta : float
        Positive scale (step size times regularization inside the solver).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    if V.shape[1] != tree.n_modalities:
        raise ValueError(f"V has {V.shape[1]} columns, tree covers {tree.n_modalities}")
    members, offsets, weights = tree.csr()
    return kernels.prox_tree_rows(V, members, offsets, weights, float(beta))


def prox_joint(V, tau: float) -> np.ndarray:
    """Row-wise group soft thresholding (prox of ``tau * sum_j ||a_j||_2``)."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    norms = np.linalg.norm(V, axis=1)
    factor = np.zeros_like(norms)
    over = norms > tau
    factor[over] = 1.0 - tau / norms[over]
    return V * factor[:, None]


def dual_norm_joint(G) -> float:
    """Largest row norm: the dual of the l1/l2 norm."""
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    if G.size == 0:
        return 0.0
    return float(np.max(np.linalg.norm(G, axis=1)))


def tree_norm(A, tree: TreeGroupStructure) -> float:
    """``sum_j sum_g w_g ||a_{jg}||_2``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    members, offsets, weights = tree.csr()
    return float(kernels.tree_penalty(A, members, offsets, weights))
