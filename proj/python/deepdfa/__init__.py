"""Python bindings for the deepdfa C++ library.

CFGs, reports and metrics are plain dicts in the same JSON shapes the CLI
emits. Feature matrices are numpy uint8 arrays.
"""

import json

from . import _core
from ._core import (
    Error,
    NumericError,
    ParseError,
    ShapeError,
    UnsupportedError,
    ValidationError,
    f1_score,
)

__all__ = [
    "Error",
    "NumericError",
    "ParseError",
    "ShapeError",
    "UnsupportedError",
    "ValidationError",
    "build_vocabulary",
    "compute_metrics",
    "dataflow",
    "default_config",
    "encode",
    "evaluate",
    "f1_score",
    "parse",
    "predict",
    "synth",
    "trace",
    "train",
]


def _doc(cfg):
    return cfg if isinstance(cfg, str) else json.dumps(cfg)


def parse(source, deref_defs=False):
    return json.loads(_core.parse(source, deref_defs))


def dataflow(cfg):
    return json.loads(_core.dataflow(_doc(cfg)))


def trace(cfg, rounds):
    return json.loads(_core.trace(_doc(cfg), rounds))


def build_vocabulary(cfgs, k):
    return json.loads(_core.build_vocabulary([_doc(c) for c in cfgs], k))


def encode(cfg, vocab, mask="api,datatype,constant,operator"):
    return _core.encode(_doc(cfg), _doc(vocab), mask)


def compute_metrics(probabilities, labels, threshold=0.5):
    return json.loads(_core.compute_metrics(list(probabilities), list(labels), threshold))


def synth(directory, n, seed=0, vulnerable_fraction=0.5):
    return _core.synth(str(directory), n, seed, vulnerable_fraction)


def default_config():
    return json.loads(_core.default_config())


def train(data_dir, checkpoint, seed=0, **overrides):
    """Train on a mixed 0.8/0.1/0.1 split of ``data_dir``; returns history and test metrics."""
    config = default_config()
    unknown = set(overrides) - set(config)
    if unknown:
        raise TypeError("unknown config keys: " + ", ".join(sorted(unknown)))
    config.update(overrides)
    return json.loads(_core.train(str(data_dir), str(checkpoint), seed, json.dumps(config)))


def evaluate(checkpoint, data_dir):
    return json.loads(_core.evaluate(str(checkpoint), str(data_dir)))


def predict(checkpoint, cfg):
    return _core.predict(str(checkpoint), _doc(cfg))
