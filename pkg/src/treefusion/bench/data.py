"""Multimodal datasets and their on-disk manifest format.

A manifest is a UTF-8 JSON document::

    {
      "modalities": [{"name": "m1", "train_csv": "...", "test_csv": "..."}, ...],
      "train_labels_csv": "...",
      "test_labels_csv": "..."
    }

Paths are resolved relative to the manifest. Feature tables are headerless
CSV with one sample per row; label files hold one 1-based class per line.
Row order aligns samples across modalities.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np

from ..model import MultimodalDictionary, MultimodalSample, build_dictionary


class DataError(ValueError):
    """Unreadable or inconsistent dataset files."""


@dataclass(frozen=True)
class Dataset:
    """Train and test samples per modality, rows aligned across modalities."""

    train: tuple
    train_labels: np.ndarray
    test: tuple
    test_labels: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        train = tuple(np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in self.train)
        test = tuple(np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in self.test)
        trl = np.asarray(self.train_labels, dtype=np.int64).ravel()
        tel = np.asarray(self.test_labels, dtype=np.int64).ravel()
        if len(train) == 0 or len(train) != len(test):
            raise DataError("train and test must cover the same modalities")
        for s, (a, b) in enumerate(zip(train, test)):
            if a.shape[0] != trl.size or b.shape[0] != tel.size:
                raise DataError(f"sample count mismatch in modality {s + 1}")
            if a.shape[1] != b.shape[1]:
                raise DataError(f"dimension mismatch between train and test in modality {s + 1}")
        names = tuple(self.names) or tuple(f"m{s + 1}" for s in range(len(train)))
        if len(names) != len(train):
            raise DataError("one name per modality is required")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "test", test)
        object.__setattr__(self, "train_labels", trl)
        object.__setattr__(self, "test_labels", tel)
        object.__setattr__(self, "names", names)

    @property
    def n_modalities(self) -> int:
        return len(self.train)

    @property
    def n_classes(self) -> int:
        return int(max(self.train_labels.max(), self.test_labels.max(initial=0)))

    def dictionary(self) -> MultimodalDictionary:
        C = self.n_classes
        per_class = []
        for c in range(1, C + 1):
            idx = np.flatnonzero(self.train_labels == c)
            if idx.size == 0:
                raise DataError(f"class {c} has no training samples")
            per_class.append([a[idx] for a in self.train])
        return build_dictionary(per_class)

    def test_samples(self) -> Iterator[MultimodalSample]:
        for i in range(self.test_labels.size):
            yield MultimodalSample(tuple(a[i] for a in self.test))

    def with_test(self, test) -> "Dataset":
        return replace(self, test=tuple(test))

    def equals(self, other: "Dataset") -> bool:
        return (
            np.array_equal(self.train_labels, other.train_labels)
            and np.array_equal(self.test_labels, other.test_labels)
            and all(np.array_equal(a, b) for a, b in zip(self.train, other.train))
            and all(np.array_equal(a, b) for a, b in zip(self.test, other.test))
            and self.n_modalities == other.n_modalities
        )


def _read_table(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            vals = []
            for j, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {i}, column {j}"
                    ) from None
            if rows and len(vals) != len(rows[0]):
                raise DataError(f"{path}: row {i} has {len(vals)} columns, expected {len(rows[0])}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no samples")
    return np.asarray(rows, dtype=np.float64)


def _read_labels(path: str) -> np.ndarray:
    if not os.path.isfile(path):
        raise DataError(f"missing file: {path}")
    labels = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            tok = line.strip()
            if not tok:
                continue
            try:
                lab = int(tok)
            except ValueError:
                raise DataError(f"{path}: non-integer label {tok!r} at row {i}") from None
            if lab < 1:
                raise DataError(f"{path}: labels are 1-based, got {lab} at row {i}")
            labels.append(lab)
    return np.asarray(labels, dtype=np.int64)


def load_dataset(manifest_path) -> Dataset:
    manifest_path = os.fspath(manifest_path)
    if not os.path.isfile(manifest_path):
        raise DataError(f"missing file: {manifest_path}")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON at line {exc.lineno} column {exc.colno}")
    base = os.path.dirname(os.path.abspath(manifest_path))

    def path(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    try:
        mods = doc["modalities"]
        train_labels = _read_labels(path(doc["train_labels_csv"]))
        test_labels = _read_labels(path(doc["test_labels_csv"]))
        names = [m.get("name", f"m{s + 1}") for s, m in enumerate(mods)]
        train = [_read_table(path(m["train_csv"])) for m in mods]
        test = [_read_table(path(m["test_csv"])) for m in mods]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{manifest_path}: malformed manifest ({exc})") from None
    if not mods:
        raise DataError(f"{manifest_path}: no modalities")
    for s, (a, b) in enumerate(zip(train, test)):
        if a.shape[0] != train_labels.size or b.shape[0] != test_labels.size:
            raise DataError(f"sample count mismatch in modality {names[s]}")
        if a.shape[1] != b.shape[1]:
            raise DataError(f"dimension inconsistency in modality {names[s]}")
    return Dataset(tuple(train), train_labels, tuple(test), test_labels, tuple(names))


def _write_table(path: str, rows: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(",".join(format(float(x), ".17g") for x in row))
            fh.write("\n")


def write_dataset(dataset: Dataset, out_dir) -> str:
    """Write CSVs plus ``manifest.json`` into ``out_dir``; returns the manifest path."""
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    mods = []
    for name, tr, te in zip(dataset.names, dataset.train, dataset.test):
        entry = {"name": name, "train_csv": f"{name}_train.csv", "test_csv": f"{name}_test.csv"}
        _write_table(os.path.join(out_dir, entry["train_csv"]), tr)
        _write_table(os.path.join(out_dir, entry["test_csv"]), te)
        mods.append(entry)
    for fname, labels in (("train_labels.csv", dataset.train_labels),
                          ("test_labels.csv", dataset.test_labels)):
        with open(os.path.join(out_dir, fname), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("".join(f"{int(v)}\n" for v in labels))
    manifest = {
        "modalities": mods,
        "train_labels_csv": "train_labels.csv",
        "test_labels_csv": "test_labels.csv",
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
