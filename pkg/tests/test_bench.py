import json
import os

import numpy as np
import pytest

from treefusion.bench import (
    ConfigError, DataError, Dataset, ExperimentConfig, PerturbKind, Perturbation, SynthError,
    SyntheticSpec, compute_metrics, load_dataset, perturb, run_experiment, synth_generate,
    write_dataset,
)
from treefusion.bench.experiment import Sweep, _folds
from treefusion.classify import Method, PipelineSettings, classify_pipeline
from treefusion.model import TreeGroupStructure


# data ----------------------------------------------------------------------

def _write_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("\n".join(",".join(str(x) for x in r) for r in rows) + "\n")


def _manifest(tmp_path, train_rows=(4, 4), bad_token=False):
    rng = np.random.default_rng(0)
    mods = []
    for s, rows in enumerate(train_rows):
        tr = rng.standard_normal((rows, 3)).tolist()
        if bad_token and s == 1:
            tr[2][1] = "abc"
        _write_csv(tmp_path / f"m{s}_tr.csv", tr)
        _write_csv(tmp_path / f"m{s}_te.csv", rng.standard_normal((2, 3)).tolist())
        mods.append({"name": f"m{s}", "train_csv": f"m{s}_tr.csv", "test_csv": f"m{s}_te.csv"})
    (tmp_path / "trl.csv").write_text("1\n1\n2\n2\n")
    (tmp_path / "tel.csv").write_text("1\n2\n")
    doc = {"modalities": mods, "train_labels_csv": "trl.csv", "test_labels_csv": "tel.csv"}
    (tmp_path / "manifest.json").write_text(json.dumps(doc))
    return tmp_path / "manifest.json"


def test_load_manifest(tmp_path):
    ds = load_dataset(_manifest(tmp_path))
    assert ds.n_modalities == 2
    assert ds.train_labels.tolist() == [1, 1, 2, 2]
    assert ds.test_labels.tolist() == [1, 2]
    assert ds.dictionary().n_atoms == 4


def test_row_count_mismatch(tmp_path):
    with pytest.raises(DataError, match="sample count mismatch"):
        load_dataset(_manifest(tmp_path, train_rows=(4, 3)))


def test_non_numeric_token_names_location(tmp_path):
    with pytest.raises(DataError, match=r"row 3.*column 2"):
        load_dataset(_manifest(tmp_path, bad_token=True))


def test_missing_manifest(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nope.json")


def test_write_then_load_roundtrip(tmp_path):
    ds = synth_generate(SyntheticSpec(classes=3, modalities=2, dims=(6,), subspace_dim=2,
                                      train_per_class=3, test_per_class=2, noise=(0.1,)))
    path = write_dataset(ds, tmp_path)
    assert load_dataset(path).equals(ds)


# synth ---------------------------------------------------------------------

def test_synth_deterministic():
    spec = SyntheticSpec(seed=7, train_per_class=3, test_per_class=2)
    assert synth_generate(spec).equals(synth_generate(spec))
    assert not synth_generate(spec).equals(synth_generate(SyntheticSpec(seed=8, train_per_class=3,
                                                                        test_per_class=2)))


def test_synth_rejects_infeasible():
    with pytest.raises(SynthError):
        SyntheticSpec(dims=(3,), subspace_dim=4)
    with pytest.raises(SynthError):
        SyntheticSpec(modalities=3, groups=((1, 2),))
    with pytest.raises(SynthError):
        SyntheticSpec.from_json({"bogus": 1})


def test_synth_spec_json_roundtrip():
    spec = SyntheticSpec(modalities=4, groups=((1, 2), (3, 4)), modes=3, noise=(0.1,))
    assert SyntheticSpec.from_json(json.loads(json.dumps(spec.to_json()))) == spec


def test_clean_test_points_classified_by_subspace():
    ds = synth_generate(SyntheticSpec(classes=5, modalities=2, dims=(20,), subspace_dim=3,
                                      train_per_class=10, test_per_class=20, seed=3))
    D = ds.dictionary()
    settings = PipelineSettings(lam=1e-4)
    hits = [classify_pipeline(D, y, Method.JSRC, settings).predicted == l
            for y, l in zip(ds.test_samples(), ds.test_labels)]
    assert np.mean(hits) >= 0.95


def test_orthogonal_classes_are_separable():
    rng = np.random.default_rng(0)
    Q = np.linalg.qr(rng.standard_normal((8, 8)))[0]
    bases = [Q[:, :2], Q[:, 2:4]]

    def draw(k):
        feats = [[], []]
        labels = []
        for c in range(2):
            for _ in range(k):
                z = rng.standard_normal(2)
                for s in range(2):
                    feats[s].append(bases[c] @ z)
                labels.append(c + 1)
        return [np.array(f) for f in feats], labels

    tr, trl = draw(5)
    te, tel = draw(5)
    ds = Dataset(tuple(tr), trl, tuple(te), tel)
    D = ds.dictionary()
    settings = PipelineSettings(lam=1e-3, tree=TreeGroupStructure.root_only(2))
    for method in Method:
        preds = [classify_pipeline(D, y, method, settings).predicted for y in ds.test_samples()]
        assert preds == tel, method


# perturb -------------------------------------------------------------------

def _small():
    return synth_generate(SyntheticSpec(classes=2, modalities=2, dims=(16,), subspace_dim=2,
                                        train_per_class=3, test_per_class=4))


def test_perturb_zero_level_is_identity():
    ds = _small()
    assert perturb(ds, 1, Perturbation(PerturbKind.GAUSSIAN, 0.0), seed=1).equals(ds)


def test_zero_block_full_and_quarter():
    ds = _small()
    full = perturb(ds, 2, Perturbation(PerturbKind.ZERO_BLOCK, 1.0))
    assert np.all(full.test[1] == 0)
    np.testing.assert_array_equal(full.test[0], ds.test[0])
    np.testing.assert_array_equal(full.train[1], ds.train[1])
    part = perturb(ds, 1, Perturbation("zero_block", 0.25), seed=5)
    for row in part.test[0]:
        z = np.flatnonzero(row == 0)
        assert z.size == 4 and np.all(np.diff(z) == 1)


def test_perturbation_validation():
    with pytest.raises(ValueError):
        Perturbation(PerturbKind.GAUSSIAN, -1.0)
    with pytest.raises(ValueError):
        Perturbation(PerturbKind.ZERO_BLOCK, 1.5)
    with pytest.raises(ValueError):
        perturb(_small(), 3, Perturbation("gaussian", 1.0))


# metrics -------------------------------------------------------------------

def test_metrics_perfect():
    scores = np.array([[0.1, 0.5, 0.9], [0.7, 0.2, 0.9], [0.9, 0.8, 0.1]])
    rep = compute_metrics(scores, [1, 2, 3])
    assert rep.ccr == 1.0
    np.testing.assert_array_equal(rep.cmc, [1, 1, 1])
    np.testing.assert_array_equal(rep.confusion, np.eye(3))


def test_metrics_binary_rates():
    # predictions (1, 2, 2, 1) against truth (1, 1, 2, 2), class 1 positive
    scores = np.array([[0, 1], [1, 0], [1, 0], [0, 1]], dtype=float)
    rep = compute_metrics(scores, [1, 1, 2, 2], positive=1)
    assert (rep.hdr, rep.hfar, rep.mr) == (0.5, 0.5, 50.0)


def test_cmc_first_entry_is_ccr():
    rng = np.random.default_rng(0)
    scores = rng.random((40, 5))
    truth = rng.integers(1, 6, 40)
    rep = compute_metrics(scores, truth, rank_budget=3)
    assert rep.cmc[0] == rep.ccr and rep.cmc.size == 3
    assert np.all(np.diff(rep.cmc) >= 0)


# experiment ----------------------------------------------------------------

def _config_doc(**extra):
    doc = {
        "schema": 1,
        "methods": ["JSRC", "JSRC_W"],
        "lambda": 0.05,
        "dataset": {"synthetic": {"classes": 3, "modalities": 2, "dims": [8], "subspace_dim": 2,
                                  "train_per_class": 4, "test_per_class": 3, "noise": [0.05]}},
        "perturbation": {"modality": 1, "kind": "gaussian", "levels": [0, 0.5, 1, 2]},
    }
    doc.update(extra)
    return doc


def test_noise_sweep_reports():
    res = run_experiment(ExperimentConfig.from_json(_config_doc()))
    assert len(res.reports) == 8
    assert len(res.summary["points"]) == 8
    weighted = [p for p in res.summary["points"] if p["method"] == "JSRC_W"]
    assert all(len(p["mean_mu"]) == 2 for p in weighted)


def test_two_way_covers_every_sample_once():
    ds = _small()
    folds = _folds(ds, "two_way", 2, 0)
    assert len(folds) == 2
    seen = np.concatenate([f.test[0] for f in folds])
    everything = np.concatenate([ds.train[0], ds.test[0]])
    assert sorted(map(tuple, seen)) == sorted(map(tuple, everything))


def test_kfold_partition():
    ds = _small()
    folds = _folds(ds, "kfold", 3, 1)
    assert sum(f.test_labels.size for f in folds) == ds.train_labels.size + ds.test_labels.size


def test_config_errors():
    with pytest.raises(ConfigError, match="empty"):
        ExperimentConfig.from_json(_config_doc(methods=[]))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(_config_doc(schema=2))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(_config_doc(methods=["MTSRC"], split={"mode": "bogus"}))
    cfg = ExperimentConfig.from_json(_config_doc(methods=["MTSRC"]))
    with pytest.raises(ConfigError, match="tree required"):
        run_experiment(cfg)


def test_manifest_dataset_relative_to_config(tmp_path):
    ds = _small()
    write_dataset(ds, tmp_path / "data")
    doc = _config_doc(dataset={"manifest": "data/manifest.json"})
    del doc["perturbation"]
    cfg = ExperimentConfig.from_json(doc, base_dir=str(tmp_path))
    assert os.path.isfile(cfg.dataset)
    res = run_experiment(cfg)
    assert len(res.reports) == 2
