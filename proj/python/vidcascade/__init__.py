"""Python bindings for the vidcascade library.

The heavy lifting happens in the compiled ``_core`` module; this package
turns its JSON strings into dictionaries.
"""

import json

from . import _core
from ._core import (
    VidcascadeError,
    error_budget,
    estimate_cost,
    extract_intervals,
    fp_fn_rates,
    read_labels,
    run_cli,
    windowed_accuracy,
    write_labels,
)

__all__ = [
    "VidcascadeError",
    "error_budget",
    "estimate_cost",
    "extract_intervals",
    "fp_fn_rates",
    "read_labels",
    "run",
    "run_cli",
    "synth",
    "video_meta",
    "windowed_accuracy",
    "write_labels",
]


def _dump(obj):
    return obj if isinstance(obj, str) else json.dumps(obj)


def synth(spec, video_path, labels_path=None):
    """Generate a synthetic clip. Returns the ground-truth labels."""
    return _core.synth(_dump(spec), video_path, labels_path or "")


def video_meta(path):
    return json.loads(_core.video_meta(path))


def run(config, video_path, begin=0, end=None, workers=1):
    """Run a cascade config. Returns (labels, stats dict)."""
    labels, stats = _core.run(_dump(config), video_path, begin, end, workers)
    return labels, json.loads(stats)
