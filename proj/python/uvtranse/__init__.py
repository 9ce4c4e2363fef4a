# SPDX-License-Identifier: Apache-2.0
"""UVTransE visual relationship detection."""

import json as _json

from ._core import (
    ConfigError,
    DomainError,
    Error,
    IndexError,
    ParseError,
    ShapeError,
    StateError,
    TrainingError,
    ValidationError,
    attribute_score,
    average_precision,
    box_location_feature,
    combined_score,
    iou,
    open_images_score,
    pair_location_feature,
    run_cli,
    triplet_location_vector,
    triplet_score,
    union_box,
)
from . import _core

__all__ = [
    "ConfigError", "DomainError", "Error", "IndexError", "ParseError", "ShapeError", "StateError",
    "TrainingError", "ValidationError", "attribute_score", "average_precision", "box_location_feature",
    "combined_score", "evaluate", "gradcheck", "iou", "open_images_score", "pair_location_feature",
    "predict", "run_cli", "synth", "train", "triplet_location_vector", "triplet_score", "union_box",
]


def _cfg(config):
    return _json.dumps(config or {})


def train(config, out):
    """Train a model; writes the checkpoint to `out` and returns the training log."""
    return _json.loads(_core._train(_cfg(config), str(out)))


def evaluate(config, checkpoint):
    return _json.loads(_core._evaluate(_cfg(config), str(checkpoint)))


def predict(config, checkpoint):
    return _json.loads(_core._predict(_cfg(config), str(checkpoint)))


def synth(config, out_dir):
    return _json.loads(_core._synth(_cfg(config), str(out_dir)))


def gradcheck(config=None):
    return _json.loads(_core._gradcheck(_cfg(config)))
