"""Command line entry point: ``treefusion {classify,experiment,synth}``.

Exit codes: 0 on success, 2 for configuration errors, 3 for data errors.
Diagnostics are a single line on standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import jsonio
from .bench.data import DataError, load_dataset, write_dataset
from .bench.experiment import ConfigError, ExperimentConfig, report_filename, run_experiment
from .bench.synth import SynthError, SyntheticSpec, synth_generate
from .classify import Method, PipelineSettings, classify_pipeline
from .fusion import FusionSettings
from .model import ModelError, TreeGroupStructure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read_json(path: str, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise _Fail(EXIT_CONFIG, f"cannot read {what} {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _Fail(
            EXIT_CONFIG, f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None


def _ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise _Fail(EXIT_DATA, f"cannot create output directory {path}: {exc.strerror}") from None
    if not os.access(path, os.W_OK):
        raise _Fail(EXIT_DATA, f"output directory {path} is not writable")


def _write(path: str, obj) -> None:
    try:
        jsonio.dump(obj, path)
    except OSError as exc:
        raise _Fail(EXIT_DATA, f"cannot write {path}: {exc.strerror}") from None


def cmd_classify(args) -> int:
    try:
        method = Method.parse(args.method)
    except ValueError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None
    if not args.lam > 0:
        raise _Fail(EXIT_CONFIG, "--lambda must be positive")
    if method.needs_tree and args.tree is None:
        raise _Fail(EXIT_CONFIG, f"tree required for {method.value} (pass --tree)")
    try:
        fusion = FusionSettings(alternations=args.weighted_alternations, m=args.fuzzifier)
    except ValueError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None

    try:
        dataset = load_dataset(args.manifest)
        dictionary = dataset.dictionary()
    except (DataError, ModelError) as exc:
        raise _Fail(EXIT_DATA, str(exc)) from None

    tree = None
    if args.tree is not None:
        try:
            tree = TreeGroupStructure.from_json(_read_json(args.tree, "tree"), dataset.n_modalities)
        except ModelError as exc:
            raise _Fail(EXIT_CONFIG, f"tree: {exc}") from None
        if args.weight_scale != 1.0:
            tree = tree.scaled(args.weight_scale)

    settings = PipelineSettings(lam=args.lam, tree=tree, fusion=fusion)
    predictions, residuals, mus = [], [], []
    try:
        for sample in dataset.test_samples():
            res = classify_pipeline(dictionary, sample, method, settings)
            predictions.append(res.predicted)
            residuals.append(res.residuals)
            if res.weights is not None:
                mus.append(res.weights.mu)
    except (ModelError, ValueError) as exc:
        raise _Fail(EXIT_DATA, str(exc)) from None

    truth = dataset.test_labels
    doc = {
        "method": method.value,
        "lambda": args.lam,
        "seed": args.seed,
        "predictions": predictions,
        "residuals": residuals,
        "ccr": float(np.mean(np.asarray(predictions) == truth)),
    }
    if method.weighted:
        doc["mu"] = mus
        doc["fuzzifier"] = args.fuzzifier
        doc["alternations"] = args.weighted_alternations
    if args.out:
        _write(args.out, doc)
    else:
        sys.stdout.write(jsonio.dumps(doc))
    return EXIT_OK


def cmd_experiment(args) -> int:
    doc = _read_json(args.config, "config")
    base = os.path.dirname(os.path.abspath(args.config))
    try:
        config = ExperimentConfig.from_json(doc, base_dir=base)
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None
    _ensure_dir(args.out_dir)
    try:
        result = run_experiment(config)
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None
    except (DataError, ModelError, SynthError) as exc:
        raise _Fail(EXIT_DATA, str(exc)) from None
    for rep in result.reports:
        _write(os.path.join(args.out_dir, report_filename(rep)), rep.to_json())
    _write(os.path.join(args.out_dir, "summary.json"), result.summary)
    return EXIT_OK


def cmd_synth(args) -> int:
    doc = _read_json(args.spec, "spec")
    if not isinstance(doc, dict):
        raise _Fail(EXIT_CONFIG, "synthetic spec must be a JSON object")
    try:
        spec = SyntheticSpec.from_json(doc)
    except SynthError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None
    _ensure_dir(args.out_dir)
    try:
        write_dataset(synth_generate(spec), args.out_dir)
    except OSError as exc:
        raise _Fail(EXIT_DATA, f"cannot write dataset: {exc.strerror}") from None
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treefusion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify the test split of a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", required=True, help=", ".join(m.value for m in Method))
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--tree", help="tree JSON (required for MTSRC and MTSRC_W)")
    p.add_argument("--weight-scale", type=float, default=1.0)
    p.add_argument("--weighted-alternations", type=int, default=10)
    p.add_argument("--fuzzifier", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write JSON here instead of standard output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("experiment", help="run a declarative experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which matches EXIT_CONFIG
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"treefusion {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
