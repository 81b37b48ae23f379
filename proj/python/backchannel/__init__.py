"""Listener backchannel prediction from speaker audio.

Thin Python surface over the native core: the six pipeline commands
(`extract`, `train`, `predict`, `stream`, `compare`, `metrics`) operate on
files, while the helpers (`bc_deviation`, `margin_counts`, `rate_series`,
`run_heuristic`, `model_info`) work on in-memory values.
"""

from ._core import (
    bc_deviation,
    compare,
    extract,
    margin_counts,
    metrics,
    model_info,
    predict,
    rate_series,
    run_heuristic,
    stream,
    train,
)

__all__ = [
    "bc_deviation",
    "compare",
    "extract",
    "margin_counts",
    "metrics",
    "model_info",
    "predict",
    "rate_series",
    "run_heuristic",
    "stream",
    "train",
]

__version__ = "1.0.0"
