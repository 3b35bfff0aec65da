"""Test-time corruption of one modality."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset


class PerturbKind(enum.Enum):
    GAUSSIAN = "gaussian"
    ZERO_BLOCK = "zero_block"


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbKind
    level: float  # noise standard deviation, or occluded fraction

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, PerturbKind) else PerturbKind(str(self.kind).lower())
        object.__setattr__(self, "kind", kind)
        if self.level < 0:
            raise ValueError("perturbation level must be non-negative")
        if kind is PerturbKind.ZERO_BLOCK and self.level > 1:
            raise ValueError("occluded fraction must lie in [0, 1]")


def perturb(dataset: Dataset, modality: int, perturbation: Perturbation, seed: int = 0) -> Dataset:
    """Corrupt the test vectors of ``modality`` (1-based); training data is untouched.

    ``GAUSSIAN`` adds i.i.d. noise of standard deviation ``level``.
    ``ZERO_BLOCK`` zeroes ``round(level * n)`` consecutive coordinates starting
    at a random offset drawn per sample.
    """
    if not 1 <= modality <= dataset.n_modalities:
        raise ValueError(f"modality {modality} out of range 1..{dataset.n_modalities}")
    rng = np.random.default_rng(seed)
    test = [a.copy() for a in dataset.test]
    block = test[modality - 1]
    count, n = block.shape
    if perturbation.kind is PerturbKind.GAUSSIAN:
        if perturbation.level > 0:
            block += perturbation.level * rng.standard_normal((count, n))
    else:
        width = int(round(perturbation.level * n))
        if width > 0:
            offsets = rng.integers(0, n - width + 1, size=count)
            for i, off in enumerate(offsets):
                block[i, off:off + width] = 0.0
    return dataset.with_test(test)
