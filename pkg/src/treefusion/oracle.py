"""Slow reference solvers used to check the production prox and solver.

Nothing here calls into ``prox``, ``solver`` or the compiled kernels: group
norms are evaluated from boolean membership masks built locally.

Both nonsmooth oracles run in two phases:

1. subgradient descent with diminishing steps ``c / sqrt(k)`` from a simple
   start point, keeping the best iterate;
2. a restart from that iterate on the smoothed surrogate in which every group
   norm ``||u_g||`` becomes ``sqrt(||u_g||^2 + eps^2)``, minimized by damped
   Newton steps while ``eps`` is driven down geometrically.

The surrogate overestimates the true objective by at most ``eps`` per group
term, so the value returned at the end is within
``penalty_weight_sum * eps + newton_decrement`` of the optimum. That bound is
reported as ``gap_bound``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS_LEVELS = tuple(10.0 ** -k for k in range(1, 15))


class OracleError(RuntimeError):
    """The oracle did not stabilize within its budget."""


def _masks_from_groups(groups, weights, n_modalities):
    M = np.zeros((len(groups), n_modalities))
    for i, g in enumerate(groups):
        M[i, list(g)] = 1.0
    return M, np.asarray(weights, dtype=np.float64)


def _tree_masks(tree):
    return _masks_from_groups(tree.groups, tree.weights, tree.n_modalities)


def _prior_masks(prior, n_modalities):
    kind = prior.kind.name
    if kind == "L1_PER_MODALITY":
        return _masks_from_groups([[s] for s in range(n_modalities)], [1.0] * n_modalities,
                                  n_modalities)
    if kind == "JOINT":
        return _masks_from_groups([list(range(n_modalities))], [1.0], n_modalities)
    return _tree_masks(prior.tree)


# ---------------------------------------------------------------------------
# prox oracle


def _prox_obj(U, V, M, W, beta, eps=0.0):
    # U, V: (R, S); M: (R, G, S); W: (R, G); beta: (R,)
    sq = np.einsum("rgs,rs->rg", M, U * U)
    norms = np.sqrt(sq + eps * eps)
    return (W * norms).sum(axis=1) + ((U - V) ** 2).sum(axis=1) / (2.0 * beta)


def _prox_subgradient(V, M, W, beta, iterations):
    U = V.copy()
    best = U.copy()
    best_val = _prox_obj(U, V, M, W, beta)
    scale = beta[:, None]
    for k in range(1, iterations + 1):
        ug = M * U[:, None, :]
        n = np.sqrt((ug * ug).sum(axis=2))
        coef = np.divide(W, n, out=np.zeros_like(n), where=n > 0)
        g = np.einsum("rg,rgs->rs", coef, ug) + (U - V) / scale
        U = U - (0.5 * scale / np.sqrt(k)) * g
        val = _prox_obj(U, V, M, W, beta)
        better = val < best_val
        if better.any():
            best[better] = U[better]
            best_val[better] = val[better]
    return best


def _prox_newton(U, V, M, W, beta, eps, max_steps=200):
    R, S = U.shape
    eye = np.eye(S)
    for _ in range(max_steps):
        ug = M * U[:, None, :]
        s = np.sqrt((ug * ug).sum(axis=2) + eps * eps)
        grad = np.einsum("rg,rgs->rs", W / s, ug) + (U - V) / beta[:, None]
        H = (eye[None] / beta[:, None, None]
             + np.einsum("rg,rgs,st->rst", W / s, M, eye)
             - np.einsum("rg,rgs,rgt->rst", W / s ** 3, ug, ug))
        step = np.linalg.solve(H, grad[:, :, None])[:, :, 0]
        dec = np.einsum("rs,rs->r", grad, step)
        if np.all(dec <= 1e-14):
            return U, dec
        t = np.ones(R)
        f0 = _prox_obj(U, V, M, W, beta, eps)
        for _ in range(60):
            trial = U - t[:, None] * step
            ok = _prox_obj(trial, V, M, W, beta, eps) <= f0 - 0.25 * t * dec
            if ok.all():
                break
            t = np.where(ok, t, 0.5 * t)
        U = U - t[:, None] * step
    return U, dec


def prox_numeric_rows(V, trees, betas, iterations: int = 200_000):
    """Batched numeric prox: row ``r`` of ``V`` uses ``trees[r]`` and ``betas[r]``.

    Trees may cover different numbers of modalities; shorter rows are padded
    with zeros on the right. Returns ``(U, gap_bound)``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    R, S = V.shape
    if S > 6:
        raise ValueError("prox oracle is limited to S <= 6")
    betas = np.broadcast_to(np.asarray(betas, dtype=np.float64), (R,)).copy()
    if not isinstance(trees, (list, tuple)):
        trees = [trees] * R
    G = max(t.n_groups for t in trees)
    M = np.zeros((R, G, S))
    W = np.zeros((R, G))
    for r, tree in enumerate(trees):
        m, w = _tree_masks(tree)
        M[r, : m.shape[0], : m.shape[1]] = m
        W[r, : w.size] = w
    start = _prox_subgradient(V, M, W, betas, iterations) if iterations > 0 else V.copy()
    U = start
    for eps in EPS_LEVELS:
        U, dec = _prox_newton(U, V, M, W, betas, eps)
    # keep the subgradient iterate wherever it is better on the true objective
    worse = _prox_obj(U, V, M, W, betas) > _prox_obj(start, V, M, W, betas)
    U[worse] = start[worse]
    gap = W.sum(axis=1) * EPS_LEVELS[-1] + np.maximum(dec, 0.0)
    return U, gap


def prox_numeric(v, tree, beta: float, iterations: int = 200_000) -> np.ndarray:
    """Minimize ``sum_g w_g ||u_g|| + ||u - v||^2 / (2 beta)`` numerically."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != tree.n_modalities:
        raise ValueError("vector length does not match the tree")
    if v.size > 6:
        raise ValueError("prox oracle is limited to S <= 6")
    U, _ = prox_numeric_rows(v[None, :], [tree], [beta], iterations)
    return U[0]


def prox_objective(u, v, tree, beta: float) -> float:
    """Exact value of the row-wise prox objective."""
    M, W = _tree_masks(tree)
    u = np.atleast_2d(u)
    v = np.atleast_2d(v)
    vals = _prox_obj(u, v, np.broadcast_to(M, (u.shape[0],) + M.shape),
                     np.broadcast_to(W, (u.shape[0], W.size)), np.full(u.shape[0], beta))
    return float(vals.sum())


# ---------------------------------------------------------------------------
# full problem oracle


@dataclass
class OracleResult:
    objective: float
    coefficients: np.ndarray
    gap_bound: float
    subgradient_objective: float


class _Problem:
    """Dense representation of the smoothed multimodal objective."""

    def __init__(self, dictionary, sample, prior, weights=None):
        self.Xs = [np.asarray(X) for X in dictionary.matrices]
        self.ys = [np.asarray(y) for y in sample.vectors]
        self.S = len(self.Xs)
        self.N = self.Xs[0].shape[1]
        self.lam = float(prior.lam)
        if weights is None:
            self.w = np.ones(self.S)
        else:
            self.w = np.asarray(weights.mu, dtype=np.float64) ** weights.m
        self.M, self.W = _prior_masks(prior, self.S)
        self.grams = [X.T @ X for X in self.Xs]

    def value(self, A, eps=0.0):
        fit = 0.0
        for s in range(self.S):
            r = self.ys[s] - self.Xs[s] @ A[:, s]
            fit += 0.5 * self.w[s] * (r @ r)
        norms = np.sqrt((A * A) @ self.M.T + eps * eps)
        return fit + self.lam * float((norms * self.W).sum())

    def subgradient(self, A):
        G = np.empty_like(A)
        for s in range(self.S):
            G[:, s] = -self.w[s] * (self.Xs[s].T @ (self.ys[s] - self.Xs[s] @ A[:, s]))
        for g in range(self.M.shape[0]):
            idx = self.M[g] > 0
            sub = A[:, idx]
            n = np.linalg.norm(sub, axis=1)
            coef = np.divide(self.lam * self.W[g], n, out=np.zeros_like(n), where=n > 0)
            G[:, idx] += coef[:, None] * sub
        return G

    def grad_hess(self, A, eps):
        N, S = self.N, self.S
        grad = np.empty((N, S))
        H = np.zeros((N * S, N * S))
        for s in range(S):
            grad[:, s] = self.w[s] * (self.grams[s] @ A[:, s] - self.Xs[s].T @ self.ys[s])
            H[s::S, s::S] = self.w[s] * self.grams[s]
        for g in range(self.M.shape[0]):
            idx = np.flatnonzero(self.M[g])
            sub = A[:, idx]
            n = np.sqrt((sub * sub).sum(axis=1) + eps * eps)
            c = self.lam * self.W[g]
            grad[:, idx] += (c / n)[:, None] * sub
            for j in range(N):
                block = (c / n[j]) * np.eye(idx.size) - (c / n[j] ** 3) * np.outer(sub[j], sub[j])
                pos = j * S + idx
                H[np.ix_(pos, pos)] += block
        return grad, H


def _newton(problem, A, eps, max_steps=300):
    dec = np.inf
    for _ in range(max_steps):
        grad, H = problem.grad_hess(A, eps)
        g = grad.ravel()
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        dec = float(g @ step)
        f0 = problem.value(A, eps)
        if dec <= 1e-15 * max(1.0, abs(f0)):
            return A, max(dec, 0.0)
        D = step.reshape(A.shape)
        t = 1.0
        while t > 1e-20:
            trial = A - t * D
            if problem.value(trial, eps) <= f0 - 0.25 * t * dec:
                break
            t *= 0.5
        else:
            return A, dec
        A = A - t * D
    return A, dec


def solve_subgradient(dictionary, sample, prior, iterations: int = 20_000,
                      weights=None, rtol: float = 1e-6) -> OracleResult:
    """Reference minimizer of the full nonsmooth objective.

    Raises :class:`OracleError` when the final certificate is looser than
    ``rtol`` relative to the returned objective.
    """
    N = dictionary.n_atoms
    S = dictionary.n_modalities
    if N > 30 or S > 4:
        raise ValueError("subgradient oracle is limited to N <= 30, S <= 4")
    sample = dictionary.check_sample(sample)
    problem = _Problem(dictionary, sample, prior, weights)

    A = np.zeros((N, S))
    best, best_val = A.copy(), problem.value(A)
    L = max(problem.w[s] * np.linalg.norm(problem.Xs[s], 2) ** 2 for s in range(S))
    c = 1.0 / max(L, 1e-12)
    for k in range(1, iterations + 1):
        A = A - (c / np.sqrt(k)) * problem.subgradient(A)
        val = problem.value(A)
        if val < best_val:
            best, best_val = A.copy(), val
    sub_val = best_val

    A = best
    dec = 0.0
    for eps in EPS_LEVELS:
        A, dec = _newton(problem, A, eps)
    val = problem.value(A)
    if val > best_val:
        A, val = best, best_val
    gap = problem.lam * float(problem.W.sum()) * N * EPS_LEVELS[-1] + dec
    if gap > rtol * max(abs(val), 1e-300):
        raise OracleError(f"certificate {gap:.3g} exceeds tolerance at objective {val:.6g}")
    return OracleResult(objective=float(val), coefficients=A, gap_bound=float(gap),
                        subgradient_objective=float(sub_val))


# ---------------------------------------------------------------------------
# weight update oracle


def weight_grid_search(residual: float, lam_mu: float, m: float = 2.0,
                       step: float = 1e-4) -> float:
    """Minimize ``mu^m r / 2 + lam_mu / 2 * |1 - mu|^m`` over a grid on [0, 1.5]."""
    if residual < 0 or lam_mu <= 0:
        raise ValueError("need residual >= 0 and lam_mu > 0")
    grid = np.arange(0.0, 1.5 + step / 2, step)
    vals = grid ** m * residual / 2.0 + lam_mu / 2.0 * np.abs(1.0 - grid) ** m
    return float(grid[int(np.argmin(vals))])
