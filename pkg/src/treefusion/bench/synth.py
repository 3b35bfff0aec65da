"""Synthetic multimodal data with class subspaces and shared latent factors.

Every class owns a random ``d``-dimensional subspace in each modality. A
sample draws one latent vector per correlation group and maps it through the
class basis of every modality in that group, so modalities of one group are
exactly representable by the same training atoms while different groups are
independent. Optional latent modes make the latent vectors cluster, which
gives each group its own preferred atoms.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .data import Dataset


class SynthError(ValueError):
    """Infeasible synthetic dataset settings."""


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 5
    modalities: int = 3
    dims: tuple = (32,)
    subspace_dim: int = 3
    train_per_class: int = 20
    test_per_class: int = 20
    groups: Optional[tuple] = None  # 1-based; default: one group with every modality
    noise: tuple = (0.0,)
    seed: int = 0
    modes: int = 0
    mode_spread: float = 0.1
    class_similarity: float = 0.0

    def __post_init__(self):
        dims = tuple(int(d) for d in np.atleast_1d(self.dims))
        if len(dims) == 1:
            dims = dims * self.modalities
        noise = tuple(float(x) for x in np.atleast_1d(self.noise))
        if len(noise) == 1:
            noise = noise * self.modalities
        groups = self.groups
        if groups is None:
            groups = (tuple(range(1, self.modalities + 1)),)
        groups = tuple(tuple(int(m) for m in g) for g in groups)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "noise", noise)
        object.__setattr__(self, "groups", groups)
        self.validate()

    def validate(self) -> None:
        if self.classes < 1 or self.modalities < 1:
            raise SynthError("classes and modalities must be at least 1")
        if len(self.dims) != self.modalities or len(self.noise) != self.modalities:
            raise SynthError("dims and noise need one entry per modality")
        if self.subspace_dim < 1 or self.subspace_dim > min(self.dims):
            raise SynthError(
                f"subspace dimension {self.subspace_dim} exceeds feature dimension {min(self.dims)}"
            )
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise SynthError("sample counts must be at least 1")
        if any(x < 0 for x in self.noise):
            raise SynthError("noise levels must be non-negative")
        members = sorted(m for g in self.groups for m in g)
        if members != list(range(1, self.modalities + 1)):
            raise SynthError("correlation groups must partition the modalities")
        if self.modes < 0 or self.mode_spread < 0:
            raise SynthError("modes and mode_spread must be non-negative")
        if not 0 <= self.class_similarity < 1:
            raise SynthError("class_similarity must lie in [0, 1)")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["dims"] = list(self.dims)
        doc["noise"] = list(self.noise)
        doc["groups"] = [list(g) for g in self.groups]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise SynthError(f"unknown synthetic spec fields: {sorted(unknown)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise SynthError(str(exc)) from None


def _orthonormal(rng, n, d):
    q, r = np.linalg.qr(rng.standard_normal((n, d)))
    return q * np.sign(np.diag(r))


def synth_generate(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    S, C, d = spec.modalities, spec.classes, spec.subspace_dim
    group_of = {m - 1: gi for gi, g in enumerate(spec.groups) for m in g}
    common = [_orthonormal(rng, n, d) for n in spec.dims]
    rho = spec.class_similarity
    bases = [
        [
            _orthonormal(rng, n, d) if rho == 0 else np.linalg.qr(
                np.sqrt(rho) * common[s] + np.sqrt(1 - rho) * _orthonormal(rng, n, d)
            )[0]
            for s, n in enumerate(spec.dims)
        ]
        for _ in range(C)
    ]
    centers = None
    if spec.modes:
        centers = rng.standard_normal((C, len(spec.groups), spec.modes, d)) / np.sqrt(d)

    def draw(count):
        feats = [np.empty((count * C, n)) for n in spec.dims]
        labels = np.repeat(np.arange(1, C + 1), count)
        for c in range(C):
            for i in range(count):
                row = c * count + i
                latents = []
                for gi in range(len(spec.groups)):
                    if centers is None:
                        z = rng.standard_normal(d) / np.sqrt(d)
                    else:
                        k = rng.integers(spec.modes)
                        z = centers[c, gi, k] + spec.mode_spread * rng.standard_normal(d) / np.sqrt(d)
                    latents.append(z)
                for s in range(S):
                    x = bases[c][s] @ latents[group_of[s]]
                    if spec.noise[s] > 0:
                        x = x + spec.noise[s] * rng.standard_normal(spec.dims[s])
                    feats[s][row] = x
        return feats, labels

    train, train_labels = draw(spec.train_per_class)
    test, test_labels = draw(spec.test_per_class)
    return Dataset(tuple(train), train_labels, tuple(test), test_labels)
