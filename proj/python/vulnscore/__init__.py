"""Vulnerability classifier over static-analysis findings, source metrics and project metadata."""

import json
import os

from . import _vulnscore
from ._vulnscore import VulnscoreError, __version__

__all__ = [
    "VulnscoreError",
    "__version__",
    "generate_corpus",
    "validate_dataset",
    "parse_findings",
    "extract_layer2",
    "encode_layer3",
    "train",
    "decision_value",
    "classify",
    "evaluate",
    "run_cli",
]


def _text(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def generate_corpus(seed, instances=75, vulnerable_fraction=2 / 3, informative_l3=True, shuffle_labels=False):
    """Synthetic dataset document."""
    return json.loads(
        _vulnscore.generate_corpus(seed, instances, vulnerable_fraction, informative_l3, shuffle_labels)
    )


def validate_dataset(dataset):
    """List of (instance_id, feature, rule) violations; empty when valid."""
    return _vulnscore.validate_dataset(_text(dataset))


def parse_findings(paths):
    """Per-report counts and the aggregated l1.* features."""
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    return json.loads(_vulnscore.parse_findings([os.fspath(p) for p in paths]))


def extract_layer2(source_dir, manifest=None):
    """l2.* features of a source tree."""
    return json.loads(_vulnscore.extract_layer2(os.fspath(source_dir), None if manifest is None else os.fspath(manifest)))


def encode_layer3(manifest):
    """l3.* features of a project manifest."""
    return json.loads(_vulnscore.encode_layer3(os.fspath(manifest)))


def train(dataset, model="svm", subset="all", beta=1.0, c=1.0, seed=0):
    """Model document fitted on the whole dataset."""
    return json.loads(_vulnscore.train(_text(dataset), model, subset, beta, c, seed))


def decision_value(model, features):
    return _vulnscore.decision_value(_text(model), _text(features))


def classify(model, features):
    """Label name for the decision value: vulnerable when non-negative."""
    return "vulnerable" if decision_value(model, features) >= 0 else "benign_flaw"


def evaluate(dataset, seed, folds=10, bootstraps=100, beta=1.0, c=1.0):
    """(report document, rendered table) for the model x subset grid."""
    report, table = _vulnscore.evaluate(_text(dataset), seed, folds, bootstraps, beta, c)
    return json.loads(report), table


def run_cli(args):
    """(exit code, stdout, stderr) of the command-line tool run in-process."""
    return _vulnscore.run_cli([os.fspath(a) for a in args])
