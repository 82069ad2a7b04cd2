"""Accuracy metrics for predicted-versus-actual loss traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, TooFewSamplesError, ZeroActualError

__all__ = [
    "LossTrace",
    "mape",
    "rmse",
    "mae",
    "standard_error",
]


@dataclass(frozen=True)
class LossTrace:
    """Paired prediction/ground-truth series over the test frames."""

    predicted: np.ndarray
    actual: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.predicted, dtype=np.float64)
        act = np.asarray(self.actual, dtype=np.float64)
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "actual", act)
        if pred.ndim != 1 or act.ndim != 1:
            raise DimensionError("loss traces must be one-dimensional")
        if pred.shape != act.shape:
            raise DimensionError("trace lengths disagree")
        if pred.size == 0:
            raise DimensionError("loss traces must be non-empty")

    def __len__(self):
        return self.predicted.size


def mape(trace: LossTrace) -> float:
    """Mean absolute percentage error, in percent.  The actual losses must
    be strictly positive since they sit in the denominator."""
    if np.any(trace.actual <= 0):
        raise ZeroActualError(
            "percentage error is undefined for non-positive actual losses")
    return float(np.mean(np.abs(trace.predicted - trace.actual)
                         / trace.actual) * 100.0)


def rmse(trace: LossTrace) -> float:
    diff = trace.predicted - trace.actual
    return float(np.sqrt(np.mean(diff * diff)))


def mae(trace: LossTrace) -> float:
    return float(np.mean(np.abs(trace.predicted - trace.actual)))


def standard_error(values) -> float:
    """Sample standard deviation (n - 1 denominator) over the square root of
    the sample count."""
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if vals.size < 2:
        raise TooFewSamplesError("standard error needs at least two samples")
    return float(np.std(vals, ddof=1) / np.sqrt(vals.size))
