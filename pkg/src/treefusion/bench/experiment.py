"""Declarative experiments: methods x perturbation levels x folds."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..classify import Method, PipelineSettings, classify_pipeline
from ..fusion import FusionSettings
from ..model import ModelError, TreeGroupStructure
from ..solver import SolverSettings, StepRule
from .data import Dataset, DataError, load_dataset
from .metrics import MetricsReport, compute_metrics
from .perturb import PerturbKind, Perturbation, perturb
from .synth import SynthError, SyntheticSpec, synth_generate

SCHEMA_VERSION = 1
SPLIT_MODES = ("holdout", "kfold", "two_way")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class Sweep:
    modality: int
    kind: PerturbKind
    levels: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment.

    ``dataset`` is either a :class:`SyntheticSpec` or a manifest path.
    ``tree`` keeps the raw tree document (1-based members) because the
    modality count is only known once the dataset is loaded.
    """

    methods: tuple
    lam: float
    dataset: object
    tree: Optional[dict] = None
    weight_scale: float = 1.0
    solver: SolverSettings = field(default_factory=SolverSettings)
    fusion: FusionSettings = field(default_factory=FusionSettings)
    sweep: Optional[Sweep] = None
    split: str = "holdout"
    folds: int = 2
    seed: int = 0
    rank_budget: Optional[int] = None
    positive_class: Optional[int] = None

    @classmethod
    def from_json(cls, doc: dict, base_dir: str = ".") -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("experiment config must be a JSON object")
        schema = doc.get("schema", SCHEMA_VERSION)
        if schema != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema {schema!r}")
        try:
            methods = tuple(Method.parse(m) for m in doc.get("methods", []))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not methods:
            raise ConfigError("method list is empty")

        ds = doc.get("dataset")
        if not isinstance(ds, dict) or len(ds) != 1:
            raise ConfigError('dataset must be {"synthetic": {...}} or {"manifest": "path"}')
        if "synthetic" in ds:
            try:
                dataset = SyntheticSpec.from_json(ds["synthetic"])
            except SynthError as exc:
                raise ConfigError(str(exc)) from None
        elif "manifest" in ds:
            p = ds["manifest"]
            dataset = p if os.path.isabs(p) else os.path.join(base_dir, p)
        else:
            raise ConfigError(f"unknown dataset source {next(iter(ds))!r}")

        solver_doc = doc.get("solver", {})
        fusion_doc = doc.get("fusion", {})
        pert = doc.get("perturbation")
        split = doc.get("split", {"mode": "holdout"})
        try:
            solver = SolverSettings(
                max_iter=int(solver_doc.get("max_iter", 500)),
                tol=float(solver_doc.get("tol", 1e-8)),
                step_rule=StepRule(solver_doc.get("step_rule", "fixed")),
                step=solver_doc.get("step"),
            )
            fusion = FusionSettings(
                alternations=int(fusion_doc.get("alternations", 10)),
                m=float(fusion_doc.get("fuzzifier", 2.0)),
                solver=solver,
            )
            sweep = None
            if pert is not None:
                sweep = Sweep(
                    modality=int(pert["modality"]),
                    kind=PerturbKind(str(pert.get("kind", "gaussian")).lower()),
                    levels=tuple(float(x) for x in pert["levels"]),
                )
                for lvl in sweep.levels:
                    Perturbation(sweep.kind, lvl)
            mode = split.get("mode", "holdout")
            if mode not in SPLIT_MODES:
                raise ConfigError(f"unknown split mode {mode!r}")
            lam = float(doc["lambda"])
            if not lam > 0:
                raise ConfigError("lambda must be positive")
            return cls(
                methods=methods, lam=lam, dataset=dataset, tree=doc.get("tree"),
                weight_scale=float(doc.get("weight_scale", 1.0)), solver=solver, fusion=fusion,
                sweep=sweep, split=mode, folds=int(split.get("folds", 2)),
                seed=int(doc.get("seed", 0)),
                rank_budget=doc.get("rank_budget"), positive_class=doc.get("positive_class"),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from None


@dataclass
class ExperimentResult:
    reports: list
    summary: dict


def _folds(dataset: Dataset, mode: str, k: int, seed: int):
    if mode == "holdout":
        return [dataset]
    if mode == "two_way":
        return [dataset, Dataset(dataset.test, dataset.test_labels, dataset.train,
                                 dataset.train_labels, dataset.names)]
    if k < 2:
        raise ConfigError("k-fold split needs at least 2 folds")
    feats = [np.vstack([a, b]) for a, b in zip(dataset.train, dataset.test)]
    labels = np.concatenate([dataset.train_labels, dataset.test_labels])
    perm = np.random.default_rng(seed).permutation(labels.size)
    out = []
    for i in range(k):
        test_idx = np.sort(perm[i::k])
        train_idx = np.setdiff1d(np.arange(labels.size), test_idx)
        out.append(Dataset(tuple(f[train_idx] for f in feats), labels[train_idx],
                           tuple(f[test_idx] for f in feats), labels[test_idx], dataset.names))
    return out


def _sub_seed(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def load_config_dataset(config: ExperimentConfig) -> Dataset:
    if isinstance(config.dataset, SyntheticSpec):
        return synth_generate(config.dataset)
    return load_dataset(config.dataset)


def run_experiment(config: ExperimentConfig, dataset: Optional[Dataset] = None) -> ExperimentResult:
    """Evaluate every method at every perturbation level on every fold.

    One report per (method, level, fold) carries ``method``, ``kind``,
    ``level`` and ``fold`` in its metadata; the summary averages over folds.
    """
    if not config.methods:
        raise ConfigError("method list is empty")
    if dataset is None:
        dataset = load_config_dataset(config)
    S = dataset.n_modalities
    tree = None
    if config.tree is not None:
        try:
            tree = TreeGroupStructure.from_json(config.tree, S)
        except ModelError as exc:
            raise ConfigError(f"tree: {exc}") from None
        if config.weight_scale != 1.0:
            tree = tree.scaled(config.weight_scale)
    if any(m.needs_tree for m in config.methods) and tree is None:
        raise ConfigError("tree required for MTSRC methods")
    sweep = config.sweep
    if sweep is not None and not 1 <= sweep.modality <= S:
        raise ConfigError(f"perturbed modality {sweep.modality} out of range 1..{S}")
    levels = sweep.levels if sweep is not None else (0.0,)
    kind = sweep.kind.value if sweep is not None else "none"
    settings = PipelineSettings(lam=config.lam, tree=tree, solver=config.solver,
                                fusion=config.fusion)

    reports = []
    for fold, fold_ds in enumerate(_folds(dataset, config.split, config.folds, config.seed)):
        try:
            dictionary = fold_ds.dictionary()
        except ModelError as exc:
            raise DataError(str(exc)) from None
        C = dictionary.n_classes
        if fold_ds.test_labels.max() > C:
            raise DataError("test labels include classes absent from training")
        for li, level in enumerate(levels):
            test_ds = fold_ds
            if sweep is not None:
                test_ds = perturb(fold_ds, sweep.modality, Perturbation(sweep.kind, level),
                                  seed=_sub_seed(config.seed, fold, li))
            samples = list(test_ds.test_samples())
            for method in config.methods:
                scores = np.empty((len(samples), C))
                mus = [] if method.weighted else None
                for i, sample in enumerate(samples):
                    res = classify_pipeline(dictionary, sample, method, settings)
                    scores[i] = res.residuals
                    if mus is not None:
                        mus.append(res.weights.mu)
                rep = compute_metrics(
                    scores, test_ds.test_labels, positive=config.positive_class,
                    rank_budget=config.rank_budget,
                    mean_mu=None if mus is None else np.mean(mus, axis=0),
                )
                rep.meta = {"method": method.value, "kind": kind, "level": float(level),
                            "fold": fold}
                reports.append(rep)
    return ExperimentResult(reports=reports, summary=summarize(reports))


def summarize(reports) -> dict:
    groups: dict = {}
    for rep in reports:
        key = (rep.meta["method"], rep.meta["level"])
        groups.setdefault(key, []).append(rep)
    points = []
    for (method, level), reps in sorted(groups.items()):
        entry = {
            "method": method,
            "kind": reps[0].meta["kind"],
            "level": level,
            "folds": len(reps),
            "mean_ccr": float(np.mean([r.ccr for r in reps])),
            "mean_cmc": np.mean([r.cmc for r in reps], axis=0).tolist(),
        }
        if reps[0].mean_mu is not None:
            entry["mean_mu"] = np.mean([r.mean_mu for r in reps], axis=0).tolist()
        if reps[0].hdr is not None:
            for name in ("hdr", "hfar", "mr"):
                entry[f"mean_{name}"] = float(np.mean([getattr(r, name) for r in reps]))
        points.append(entry)
    return {"points": points}


def report_filename(rep: MetricsReport) -> str:
    m = rep.meta
    return f"{m['method']}__{m['kind']}_{m['level']:.6g}__fold{m['fold']}.json"
