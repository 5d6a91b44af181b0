"""Dependency SRL toolkit with syntactic-rule argument pruning.

Thin re-export of the compiled core. All functions speak CoNLL-2009 text and
rule-file text; checkpoints are opaque bytes.
"""

from ._core import (
    DataError,
    NumericError,
    UsageError,
    coverage,
    distance_tuple,
    evaluate,
    grad_check,
    mine_rules,
    predict,
    prune_stats,
    round_trip,
    select_rules,
    stats,
    synth,
    train,
    validate,
)

__all__ = [
    "DataError",
    "NumericError",
    "UsageError",
    "coverage",
    "distance_tuple",
    "evaluate",
    "grad_check",
    "mine_rules",
    "predict",
    "prune_stats",
    "round_trip",
    "select_rules",
    "stats",
    "synth",
    "train",
    "validate",
]
