"""Residual-based classification rules over solved coefficients."""

from __future__ import annotations

import enum
import weakref
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .fusion import FusionSettings, QualityWeights, solve_weighted
from .model import MultimodalDictionary, MultimodalSample, TreeGroupStructure
from .solver import SolverSettings, SparsityPrior, modality_weights, solve


class Method(enum.Enum):
    SRC_PER_MODALITY = "SRC_PER_MODALITY"
    HSRC = "HSRC"
    JSRC = "JSRC"
    MTSRC = "MTSRC"
    JSRC_W = "JSRC_W"
    MTSRC_W = "MTSRC_W"

    @property
    def weighted(self) -> bool:
        return self in (Method.JSRC_W, Method.MTSRC_W)

    @property
    def needs_tree(self) -> bool:
        return self in (Method.MTSRC, Method.MTSRC_W)

    @classmethod
    def parse(cls, tag: str) -> "Method":
        key = str(tag).strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(
                f"unknown method {tag!r}; expected one of {', '.join(m.value for m in cls)}"
            ) from None


@dataclass(frozen=True)
class PipelineSettings:
    lam: float = 0.01
    tree: Optional[TreeGroupStructure] = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    fusion: FusionSettings = field(default_factory=FusionSettings)


@dataclass
class ClassificationResult:
    predicted: int
    residuals: np.ndarray
    per_modality: Optional[np.ndarray] = None
    weights: Optional[QualityWeights] = None
    coefficients: Optional[np.ndarray] = field(default=None, repr=False)

    def ranking(self) -> np.ndarray:
        """Classes (1-based) ordered from lowest to highest residual."""
        return np.argsort(self.residuals, kind="stable") + 1


def class_residuals(A, dictionary: MultimodalDictionary, sample) -> np.ndarray:
    """``E[c, s] = ||y_s - X_s delta_c(a_s)||^2`` as a ``(C, S)`` matrix."""
    sample = dictionary.check_sample(sample)
    A = dictionary.check_coefficients(A)
    E = np.empty((dictionary.n_classes, dictionary.n_modalities))
    for c in range(1, dictionary.n_classes + 1):
        sl = dictionary.class_slice(c)
        for s, (X, y) in enumerate(zip(dictionary.matrices, sample.vectors)):
            r = y - X[:, sl] @ A[sl, s]
            E[c - 1, s] = r @ r
    return E


def classify_residual(A, dictionary: MultimodalDictionary, sample,
                      weights: Optional[QualityWeights] = None) -> ClassificationResult:
    """Pick the class whose coefficients alone reconstruct the sample best.

    Per-modality errors are summed with weights ``mu_s ** m`` when quality
    weights are given. Ties go to the lowest class index.
    """
    E = class_residuals(A, dictionary, sample)
    agg = E @ modality_weights(weights, dictionary.n_modalities)
    return ClassificationResult(
        predicted=int(np.argmin(agg)) + 1, residuals=agg, per_modality=E,
        weights=weights, coefficients=np.asarray(A),
    )


_HSRC_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def concatenated_dictionary(dictionary: MultimodalDictionary) -> MultimodalDictionary:
    """Single-modality dictionary whose atoms are the stacked feature vectors."""
    try:
        return _HSRC_CACHE[dictionary]
    except KeyError:
        X, _ = dictionary.stacked
        out = MultimodalDictionary((X / np.sqrt(dictionary.n_modalities),), dictionary.labels)
        _HSRC_CACHE[dictionary] = out
        return out


def classify_pipeline(dictionary: MultimodalDictionary, sample, method,
                      settings: Optional[PipelineSettings] = None) -> ClassificationResult:
    settings = settings or PipelineSettings()
    method = method if isinstance(method, Method) else Method.parse(method)
    sample = dictionary.check_sample(sample)
    if method.needs_tree and settings.tree is None:
        raise ValueError(f"{method.value} requires a tree")

    if method is Method.HSRC:
        flat = concatenated_dictionary(dictionary)
        flat_sample = MultimodalSample((np.concatenate(sample.vectors),))
        res = solve(flat, flat_sample, SparsityPrior.l1(settings.lam), settings.solver)
        return classify_residual(res.coefficients, flat, flat_sample)

    if method is Method.SRC_PER_MODALITY:
        prior = SparsityPrior.l1(settings.lam)
    elif method.needs_tree:
        prior = SparsityPrior.from_tree(settings.tree, settings.lam)
    else:
        prior = SparsityPrior.joint(settings.lam)

    if method.weighted:
        fusion = settings.fusion
        if fusion.solver is not settings.solver:
            fusion = FusionSettings(
                alternations=fusion.alternations, m=fusion.m, solver=settings.solver,
                lam_mu=fusion.lam_mu, initial_mu=fusion.initial_mu,
            )
        fr = solve_weighted(dictionary, sample, prior, fusion)
        return classify_residual(fr.coefficients, dictionary, sample, fr.weights)

    res = solve(dictionary, sample, prior, settings.solver)
    return classify_residual(res.coefficients, dictionary, sample)
