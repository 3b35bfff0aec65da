"""Classification metrics: CCR, confusion matrix, CMC and binary detection rates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class MetricsReport:
    ccr: float
    confusion: np.ndarray
    cmc: np.ndarray
    hdr: Optional[float] = None
    hfar: Optional[float] = None
    mr: Optional[float] = None
    mean_mu: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {
            "ccr": self.ccr,
            "confusion": np.asarray(self.confusion).tolist(),
            "cmc": np.asarray(self.cmc).tolist(),
            "hdr": self.hdr,
            "hfar": self.hfar,
            "mr": self.mr,
            "mean_mu": None if self.mean_mu is None else np.asarray(self.mean_mu).tolist(),
        }
        doc.update(self.meta)
        return doc


def compute_metrics(scores, truth, positive: Optional[int] = None,
                    rank_budget: Optional[int] = None, mean_mu=None) -> MetricsReport:
    """Metrics from per-class residual scores (lower is better).

    Parameters
    ----------
    scores : array_like, shape (n_samples, C)
        Aggregate residual of every class for every sample.
    truth : array_like of int
        True 1-based classes.
    positive : int, optional
        Positive class for the detection rates (HDR, HFAR) and MR.
    rank_budget : int, optional
        Length of the CMC curve; defaults to ``C``.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if truth.size == 0:
        raise ValueError("no predictions to score")
    if scores.shape[0] != truth.size:
        raise ValueError("scores and truth have different lengths")
    C = scores.shape[1]
    if truth.min() < 1 or truth.max() > C:
        raise ValueError("truth labels outside 1..C")
    ranking = np.argsort(scores, axis=1, kind="stable") + 1
    predicted = ranking[:, 0]
    budget = C if rank_budget is None else int(rank_budget)
    if budget < 1:
        raise ValueError("rank budget must be positive")
    hit_rank = np.argmax(ranking == truth[:, None], axis=1) + 1
    cmc = np.array([np.mean(hit_rank <= r) for r in range(1, budget + 1)])
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (truth - 1, predicted - 1), 1)
    ccr = float(np.mean(predicted == truth))
    hdr = hfar = mr = None
    if positive is not None:
        pos_truth = truth == positive
        pos_pred = predicted == positive
        hdr = float(np.mean(pos_pred[pos_truth])) if pos_truth.any() else float("nan")
        hfar = float(np.mean(pos_pred[~pos_truth])) if (~pos_truth).any() else float("nan")
        mr = 100.0 * (1.0 - ccr)
    return MetricsReport(
        ccr=ccr, confusion=confusion, cmc=cmc, hdr=hdr, hfar=hfar, mr=mr,
        mean_mu=None if mean_mu is None else np.asarray(mean_mu, dtype=np.float64),
    )
