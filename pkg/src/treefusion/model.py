"""Domain types: multimodal dictionaries, tree-structured group families and
the class selector.

Class and modality indices are 1-based at every public boundary (tree JSON,
labels files, ``class_select``); arrays are indexed from 0 internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class ModelError(ValueError):
    """Raised when a dictionary, sample or tree violates its invariants."""


@dataclass(frozen=True, eq=False)
class MultimodalDictionary:
    """Per-modality dictionaries sharing one class-contiguous column layout.

    Attributes
    ----------
    matrices : tuple of ndarray
        ``matrices[s]`` has shape ``(n_s, N)`` with unit-norm columns.
    labels : ndarray of int
        Class index (1-based) of each of the ``N`` columns, non-decreasing.
    """

    matrices: tuple
    labels: np.ndarray
    class_counts: tuple = field(init=False)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ModelError("labels must be a non-empty vector")
        if np.any(np.diff(labels) < 0) or labels[0] != 1:
            raise ModelError("columns must be class-contiguous starting at class 1")
        counts = np.bincount(labels)[1:]
        if np.any(counts == 0):
            raise ModelError("empty class")
        mats = []
        for s, X in enumerate(self.matrices):
            X = np.array(X, dtype=np.float64, order="C")
            if X.ndim != 2 or X.shape[1] != labels.size:
                raise ModelError(f"modality {s + 1}: expected {labels.size} columns")
            norms = np.linalg.norm(X, axis=0)
            if np.any(np.abs(norms - 1.0) > 1e-10):
                raise ModelError(f"modality {s + 1}: columns must have unit norm")
            X.setflags(write=False)
            mats.append(X)
        if not mats:
            raise ModelError("at least one modality is required")
        labels.setflags(write=False)
        object.__setattr__(self, "matrices", tuple(mats))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_counts", tuple(int(c) for c in counts))

    @property
    def n_modalities(self) -> int:
        return len(self.matrices)

    @property
    def n_classes(self) -> int:
        return len(self.class_counts)

    @property
    def n_atoms(self) -> int:
        return int(self.labels.size)

    @property
    def dims(self) -> tuple:
        return tuple(X.shape[0] for X in self.matrices)

    @cached_property
    def stacked(self):
        """All modalities stacked row-wise and the row offset of each block."""
        offsets = np.zeros(self.n_modalities + 1, dtype=np.intp)
        offsets[1:] = np.cumsum(self.dims)
        return np.ascontiguousarray(np.vstack(self.matrices)), offsets

    def class_slice(self, c: int) -> slice:
        """Column range of class ``c`` (1-based)."""
        if not 1 <= c <= self.n_classes:
            raise ModelError(f"class index {c} out of range 1..{self.n_classes}")
        start = sum(self.class_counts[: c - 1])
        return slice(start, start + self.class_counts[c - 1])

    def check_sample(self, sample) -> "MultimodalSample":
        if not isinstance(sample, MultimodalSample):
            sample = MultimodalSample(sample)
        if sample.dims != self.dims:
            raise ModelError(
                f"sample dimensions {sample.dims} do not match dictionary {self.dims}"
            )
        return sample

    def check_coefficients(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=np.float64)
        if A.shape != (self.n_atoms, self.n_modalities):
            raise ModelError(
                f"coefficient matrix has shape {A.shape}, "
                f"expected {(self.n_atoms, self.n_modalities)}"
            )
        return A


@dataclass(frozen=True)
class MultimodalSample:
    """One observation per modality, ``vectors[s]`` of length ``n_s``."""

    vectors: tuple

    def __post_init__(self):
        vecs = []
        for y in self.vectors:
            y = np.array(y, dtype=np.float64).ravel()
            y.setflags(write=False)
            vecs.append(y)
        object.__setattr__(self, "vectors", tuple(vecs))

    @property
    def dims(self) -> tuple:
        return tuple(y.size for y in self.vectors)

    def __len__(self):
        return len(self.vectors)

    def __getitem__(self, s):
        return self.vectors[s]


def build_dictionary(samples_by_class: Sequence[Sequence]) -> MultimodalDictionary:
    """Build a normalized multimodal dictionary from raw training samples.

    Parameters
    ----------
    samples_by_class : sequence
        ``samples_by_class[c][s]`` is an array of shape ``(N_c, n_s)`` holding
        the training samples of class ``c + 1`` in modality ``s + 1``, one
        sample per row. Row ``j`` of every modality describes the same event.

    Returns
    -------
    MultimodalDictionary
        Columns are the unit-normalized samples, class 1 first.
    """
    if len(samples_by_class) == 0:
        raise ModelError("at least one class is required")
    n_mod = len(samples_by_class[0])
    if n_mod == 0:
        raise ModelError("at least one modality is required")
    blocks = [[] for _ in range(n_mod)]
    labels = []
    dims = [None] * n_mod
    for c, per_mod in enumerate(samples_by_class, start=1):
        if len(per_mod) != n_mod:
            raise ModelError(f"class {c}: expected {n_mod} modalities, got {len(per_mod)}")
        count = None
        for s, rows in enumerate(per_mod):
            rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
            if rows.shape[0] == 0 or rows.size == 0:
                raise ModelError(f"empty class {c} in modality {s + 1}")
            if count is None:
                count = rows.shape[0]
            elif rows.shape[0] != count:
                raise ModelError(f"class {c}: sample count differs across modalities")
            if dims[s] is None:
                dims[s] = rows.shape[1]
            elif rows.shape[1] != dims[s]:
                raise ModelError(f"modality {s + 1}: inconsistent dimensions")
            blocks[s].append(rows)
        labels.extend([c] * count)
    mats = []
    for s in range(n_mod):
        X = np.vstack(blocks[s]).T
        norms = np.linalg.norm(X, axis=0)
        if np.any(norms == 0):
            raise ModelError(f"zero-norm column in modality {s + 1}")
        mats.append(X / norms)
    return MultimodalDictionary(tuple(mats), np.asarray(labels))


def class_select(v, c: int, dictionary: MultimodalDictionary) -> np.ndarray:
    """Keep the entries of ``v`` belonging to class ``c``, zero the rest."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != dictionary.n_atoms:
        raise ModelError("coefficient length does not match the dictionary")
    out = np.zeros_like(v)
    sl = dictionary.class_slice(c)
    out[sl] = v[sl]
    return out


@dataclass(frozen=True)
class TreeGroupStructure:
    """A laminar family of modality groups stored children-before-parents.

    Attributes
    ----------
    groups : tuple of tuple of int
        0-based modality indices of each group, in processing order.
    weights : tuple of float
        Positive weight of each group.
    n_modalities : int
    """

    groups: tuple
    weights: tuple
    n_modalities: int

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def masks(self) -> np.ndarray:
        """Boolean membership matrix of shape ``(n_groups, n_modalities)``."""
        M = np.zeros((self.n_groups, self.n_modalities), dtype=bool)
        for i, g in enumerate(self.groups):
            M[i, list(g)] = True
        return M

    def csr(self):
        """Flattened ``(members, offsets, weights)`` arrays for the kernels."""
        members = np.fromiter(
            (m for g in self.groups for m in g), dtype=np.intp,
            count=sum(len(g) for g in self.groups),
        )
        offsets = np.zeros(self.n_groups + 1, dtype=np.intp)
        offsets[1:] = np.cumsum([len(g) for g in self.groups])
        return members, offsets, np.asarray(self.weights, dtype=np.float64)

    def scaled(self, factor: float, singletons: bool = False) -> "TreeGroupStructure":
        """Multiply the weights of non-singleton groups (or all, if asked)."""
        w = tuple(
            wg * factor if (singletons or len(g) > 1) else wg
            for g, wg in zip(self.groups, self.weights)
        )
        return validate_tree(
            [[m + 1 for m in g] for g in self.groups], w, self.n_modalities
        )

    def to_json(self) -> dict:
        return {
            "groups": [
                {"members": [m + 1 for m in g], "weight": w}
                for g, w in zip(self.groups, self.weights)
            ]
        }

    @classmethod
    def from_json(cls, doc: dict, n_modalities: int) -> "TreeGroupStructure":
        """Accepts ``{"groups": [{"members": [...], "weight": w}, ...]}`` or the
        compact ``{"groups": [[...], ...], "weights": [...]}`` (weights default
        to 1). Members are 1-based."""
        try:
            entries = doc["groups"]
            if all(isinstance(e, dict) for e in entries):
                members = [list(e["members"]) for e in entries]
                weights = [float(e.get("weight", 1.0)) for e in entries]
            else:
                members = [list(e) for e in entries]
                weights = [float(w) for w in doc.get("weights", [1.0] * len(members))]
                if len(weights) != len(members):
                    raise ModelError("tree needs one weight per group")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"malformed tree document: {exc}") from None
        return validate_tree(members, weights, n_modalities)

    @classmethod
    def root_only(cls, n_modalities: int, weight: float = 1.0) -> "TreeGroupStructure":
        return validate_tree([range(1, n_modalities + 1)], [weight], n_modalities)

    @classmethod
    def singletons(cls, n_modalities: int, weight: float = 1.0) -> "TreeGroupStructure":
        return validate_tree(
            [[s] for s in range(1, n_modalities + 1)], [weight] * n_modalities, n_modalities
        )


def validate_tree(
    subsets: Iterable[Iterable[int]],
    weights: Sequence[float] | None,
    n_modalities: int,
) -> TreeGroupStructure:
    """Check a family of 1-based modality subsets and order it children-first.

    Groups are sorted by size (stable), which places every group before all of
    its strict supersets; disjoint groups keep their relative input order.
    """
    groups = [frozenset(int(m) for m in g) for g in subsets]
    if weights is None:
        weights = [1.0] * len(groups)
    weights = [float(w) for w in weights]
    if len(weights) != len(groups):
        raise ModelError("one weight per group is required")
    if not groups:
        raise ModelError("tree has no groups")
    for g, w in zip(groups, weights):
        if not g:
            raise ModelError("empty group")
        if min(g) < 1 or max(g) > n_modalities:
            raise ModelError(f"group {sorted(g)} has members outside 1..{n_modalities}")
        if not (w > 0 and np.isfinite(w)):
            raise ModelError(f"group {sorted(g)} has non-positive weight {w}")
    if len(set(groups)) != len(groups):
        raise ModelError("duplicate group")
    if frozenset().union(*groups) != frozenset(range(1, n_modalities + 1)):
        raise ModelError(f"groups do not cover modalities 1..{n_modalities}")
    for i, g in enumerate(groups):
        for h in groups[i + 1:]:
            if g & h and not (g <= h or h <= g):
                raise ModelError(f"not laminar: {sorted(g)} and {sorted(h)} overlap")
    if _is_ordered(groups):
        order = list(range(len(groups)))
    else:
        order = sorted(range(len(groups)), key=lambda i: len(groups[i]))
    return TreeGroupStructure(
        groups=tuple(tuple(sorted(m - 1 for m in groups[i])) for i in order),
        weights=tuple(weights[i] for i in order),
        n_modalities=n_modalities,
    )


def _is_ordered(groups) -> bool:
    # no group may be preceded by one of its strict supersets
    return not any(
        groups[i] > groups[j] for i in range(len(groups)) for j in range(i + 1, len(groups))
    )
