"""Assertion generation by tree-search self-refinement.

Thin layer over the native ``_core`` module; JSON documents come back as
Python objects.
"""

import json as _json

from . import _core
from ._core import (
    BackendError,
    ConfigError,
    Error,
    FlatIndex,
    LoadError,
    PreconditionError,
    RangeError,
    ReasoningTree,
    ScoreParseError,
    SearchParams,
    StageError,
    ValidationError,
    call_budget,
    check,
    chunk,
    extract_assertions,
    normalize,
    parse_score,
    reconstruct,
    split_units,
    suppress,
    tokenize,
    uct_value,
)

__all__ = [
    "BackendError",
    "ConfigError",
    "Error",
    "FlatIndex",
    "LoadError",
    "PreconditionError",
    "RangeError",
    "ReasoningTree",
    "ScoreParseError",
    "SearchParams",
    "StageError",
    "ValidationError",
    "call_budget",
    "check",
    "chunk",
    "extract_assertions",
    "is_valid",
    "load_bank",
    "load_config",
    "normalize",
    "parse_score",
    "reconstruct",
    "run",
    "split_units",
    "suppress",
    "tokenize",
    "uct_value",
    "validate_bank",
]


def is_valid(source):
    """True when the built-in checker reports no errors."""
    return not any(d["severity"] == "error" for d in check(source))


def load_bank(path):
    return _json.loads(_core.load_bank(path))


def validate_bank(bank):
    """Warnings for a bank given as a dict; raises ValidationError."""
    return _core.validate_bank(_json.dumps(bank))


def load_config(path):
    return _json.loads(_core.load_config(path))


def run(config_path, signal=None, output_dir=None):
    """Runs the pipeline from a config file and returns the design summary."""
    return _json.loads(_core.run(str(config_path), signal, None if output_dir is None else str(output_dir)))
