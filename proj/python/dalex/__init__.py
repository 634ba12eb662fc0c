"""Lexicase-family parent selection.

Method strings follow the command-line syntax, for example
``"dalex:pressure=200:relaxed=true"`` or ``"batch_lexicase:batch_size=4"``.
Error and support matrices have one row per individual and one column per
training case.
"""

import json

import numpy as np

from ._dalex import (
    ConfigError,
    GuardError,
    ParseError,
    ShapeError,
    js_divergence,
)
from . import _dalex

__all__ = [
    "ConfigError",
    "GuardError",
    "ParseError",
    "ShapeError",
    "distribution",
    "evolve",
    "exact_lexicase_probs",
    "fitness",
    "js_divergence",
    "select",
]


def _matrix(values):
    return np.ascontiguousarray(values, dtype=np.float64)


def _optional(values):
    return None if values is None else _matrix(values)


def select(errors, support=None, *, method="dalex", count=None, seed=0):
    """Selected parent indices, one per selection event (default: one per row)."""
    picks = _dalex.select(_matrix(errors), _optional(support), method=method, count=count,
                          seed=seed)
    return np.asarray(picks, dtype=np.int64)


def fitness(errors, support=None, *, method="dalex", events=1, seed=0):
    """Weighted fitness with rows for individuals and columns for events."""
    return _dalex.fitness(_matrix(errors), _optional(support), method=method, events=events,
                          seed=seed)


def distribution(errors, support=None, *, method="lexicase", samples=50000,
                 mode="exact_or_empirical", seed=0):
    """Selection probabilities per individual and ``"exact"`` or ``"empirical"``."""
    probs, kind = _dalex.distribution(_matrix(errors), _optional(support), method=method,
                                      samples=samples, mode=mode, seed=seed)
    return np.asarray(probs), kind


def exact_lexicase_probs(errors, support=None):
    """Exact lexicase selection probabilities per individual."""
    return np.asarray(_dalex.exact_lexicase_probs(_matrix(errors), _optional(support)))


def evolve(config, seed=None):
    """Runs an INI configuration given as text and returns one dict per run."""
    return json.loads(_dalex.evolve(config, seed))
