"""Accelerated proximal gradient for (optionally weighted) multimodal sparse coding.

The problem solved is

    min_A  sum_s w_s/2 ||y_s - X_s a_s||^2 + lam * Penalty(A)

where ``w_s = mu_s ** m`` when quality weights are supplied and 1 otherwise.
Every supported penalty is a tree-structured norm: the per-modality l1 norm
uses singleton groups, the joint l1/l2 norm a single root group.
"""

from __future__ import annotations

import enum
import weakref
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from ._backend import kernels
from .model import MultimodalDictionary, TreeGroupStructure
from .prox import tree_norm

if TYPE_CHECKING:
    from .fusion import QualityWeights


class SolverError(RuntimeError):
    """Raised when the iteration produces non-finite values."""


class PriorKind(enum.Enum):
    L1_PER_MODALITY = "l1"
    JOINT = "joint"
    TREE = "tree"


@dataclass(frozen=True)
class SparsityPrior:
    kind: PriorKind
    lam: float
    tree: Optional[TreeGroupStructure] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.kind is PriorKind.TREE and self.tree is None:
            raise ValueError("TREE prior requires a tree")

    @classmethod
    def l1(cls, lam: float) -> "SparsityPrior":
        return cls(PriorKind.L1_PER_MODALITY, lam)

    @classmethod
    def joint(cls, lam: float) -> "SparsityPrior":
        return cls(PriorKind.JOINT, lam)

    @classmethod
    def from_tree(cls, tree: TreeGroupStructure, lam: float) -> "SparsityPrior":
        return cls(PriorKind.TREE, lam, tree)

    def groups(self, n_modalities: int) -> TreeGroupStructure:
        """The tree-structured norm equivalent to this prior."""
        if self.kind is PriorKind.L1_PER_MODALITY:
            return TreeGroupStructure.singletons(n_modalities)
        if self.kind is PriorKind.JOINT:
            return TreeGroupStructure.root_only(n_modalities)
        if self.tree.n_modalities != n_modalities:
            raise ValueError(
                f"tree covers {self.tree.n_modalities} modalities, data has {n_modalities}"
            )
        return self.tree

    def penalty(self, A) -> float:
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        if self.kind is PriorKind.L1_PER_MODALITY:
            return float(np.abs(A).sum())
        if self.kind is PriorKind.JOINT:
            return float(np.linalg.norm(A, axis=1).sum())
        return tree_norm(A, self.tree)


class StepRule(enum.Enum):
    FIXED = "fixed"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolverSettings:
    """Iteration controls.

    ``step=None`` means ``1 / L`` from :func:`lipschitz_step` (FIXED) or the
    starting step of the line search (BACKTRACKING).
    """

    max_iter: int = 500
    tol: float = 1e-8
    step_rule: StepRule = StepRule.FIXED
    step: Optional[float] = None
    shrink: float = 0.5
    patience: int = 5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.step is not None and not self.step > 0:
            raise ValueError("step must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_iter < 1 or self.patience < 1:
            raise ValueError("max_iter and patience must be at least 1")


@dataclass
class SolveResult:
    coefficients: np.ndarray
    objective: float
    iterations: int
    trace: np.ndarray = field(repr=False)
    converged: bool = False
    step: float = 0.0


def modality_weights(weights: Optional["QualityWeights"], n_modalities: int) -> np.ndarray:
    """``mu_s ** m`` per modality, or ones when no weights are given."""
    if weights is None:
        return np.ones(n_modalities)
    w = np.asarray(weights.mu, dtype=np.float64) ** weights.m
    if w.shape != (n_modalities,):
        raise ValueError(f"expected {n_modalities} quality weights, got {w.shape}")
    return w


def _residual_list(A, dictionary, sample):
    return [y - X @ A[:, s] for s, (X, y) in enumerate(zip(dictionary.matrices, sample.vectors))]


def objective(A, dictionary: MultimodalDictionary, sample, prior: SparsityPrior,
              weights: Optional["QualityWeights"] = None) -> float:
    sample = dictionary.check_sample(sample)
    A = dictionary.check_coefficients(A)
    w = modality_weights(weights, dictionary.n_modalities)
    fit = sum(0.5 * ws * float(r @ r) for ws, r in zip(w, _residual_list(A, dictionary, sample)))
    return fit + prior.lam * prior.penalty(A)


def grad_f(A, dictionary: MultimodalDictionary, sample,
           weights: Optional["QualityWeights"] = None) -> np.ndarray:
    """Gradient of the weighted reconstruction error; column ``s`` is
    ``-w_s X_s^T (y_s - X_s a_s)``."""
    sample = dictionary.check_sample(sample)
    A = dictionary.check_coefficients(A)
    w = modality_weights(weights, dictionary.n_modalities)
    G = np.empty_like(A)
    for s, r in enumerate(_residual_list(A, dictionary, sample)):
        G[:, s] = -w[s] * (dictionary.matrices[s].T @ r)
    return G


def power_iteration(X, iterations: int = 50, tol: float = 1e-10) -> float:
    """Largest squared singular value of ``X`` by power iteration.

    Runs on the smaller of the two Gram matrices from a fixed start vector,
    so the estimate is deterministic.
    """
    X = np.asarray(X, dtype=np.float64)
    M = X @ X.T if X.shape[0] <= X.shape[1] else X.T @ X
    v = np.random.default_rng(0).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        u = M @ v
        new = float(v @ u)
        nrm = np.linalg.norm(u)
        if nrm == 0:
            return 0.0
        v = u / nrm
        if abs(new - est) <= tol * max(new, 1e-300):
            est = new
            break
        est = new
    return float(max(est, float(v @ (M @ v))))


_SIGMA_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


# Gram matrices up to this size get an exact symmetric eigensolve; power
# iteration can stall short of the top eigenvalue when the spectral gap is small
DENSE_GRAM_LIMIT = 256


def spectral_norm_sq(X) -> float:
    X = np.asarray(X, dtype=np.float64)
    if min(X.shape) <= DENSE_GRAM_LIMIT:
        M = X @ X.T if X.shape[0] <= X.shape[1] else X.T @ X
        return float(np.linalg.eigvalsh(M)[-1])
    return power_iteration(X)


def _sigma_sq(dictionary: MultimodalDictionary) -> np.ndarray:
    try:
        return _SIGMA_CACHE[dictionary]
    except KeyError:
        sig = np.array([spectral_norm_sq(X) for X in dictionary.matrices])
        _SIGMA_CACHE[dictionary] = sig
        return sig


def lipschitz_step(dictionary: MultimodalDictionary,
                   weights: Optional["QualityWeights"] = None) -> float:
    """``1 / max_s w_s sigma_max(X_s)^2``."""
    L = float(np.max(modality_weights(weights, dictionary.n_modalities) * _sigma_sq(dictionary)))
    if L <= 0:
        raise SolverError("dictionary has zero spectral norm")
    return 1.0 / L


def solve(dictionary: MultimodalDictionary, sample, prior: SparsityPrior,
          settings: Optional[SolverSettings] = None,
          weights: Optional["QualityWeights"] = None,
          initial=None) -> SolveResult:
    """Minimize the (weighted) sparse coding objective by accelerated proximal
    gradient, starting from ``initial`` (zeros by default).

    Stops when the relative objective change stays below ``settings.tol`` for
    ``settings.patience`` consecutive iterations, or after ``max_iter``.
    The returned objective never exceeds the objective of ``initial``.
    """
    settings = settings or SolverSettings()
    sample = dictionary.check_sample(sample)
    S = dictionary.n_modalities
    if initial is None:
        A0 = np.zeros((dictionary.n_atoms, S))
    else:
        A0 = np.array(dictionary.check_coefficients(initial), dtype=np.float64)
    w = modality_weights(weights, S)
    tree = prior.groups(S)
    members, offsets, gweights = tree.csr()
    X, row_offsets = dictionary.stacked
    y = np.concatenate(sample.vectors)
    step = settings.step if settings.step is not None else lipschitz_step(dictionary, weights)

    A, trace, n_iter, status, t_final = kernels.fista(
        X, y, row_offsets, w, members, offsets, gweights, float(prior.lam), A0,
        float(step), settings.step_rule is StepRule.BACKTRACKING, float(settings.shrink),
        int(settings.max_iter), float(settings.tol), int(settings.patience),
    )
    if status < 0:
        raise SolverError(
            f"non-finite objective after {n_iter} iterations (step {step:.3g} too large?)"
        )
    F0 = objective(A0, dictionary, sample, prior, weights)
    F = objective(A, dictionary, sample, prior, weights)
    if F > F0:
        A, F = A0, F0
    return SolveResult(
        coefficients=A, objective=F, iterations=int(n_iter), trace=trace,
        converged=status == 0, step=float(t_final),
    )
