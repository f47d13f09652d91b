"""Numerically stable log-space aggregation helpers.

All probability arithmetic in this package happens in natural-log space;
sums of probabilities therefore go through :func:`logsumexp`.  The
implementations tolerate ``-inf`` entries (exact zero probability) and
return ``-inf`` when every input is ``-inf``.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

NEG_INF = float("-inf")


def logsumexp(values: Iterable[float] | np.ndarray, axis: int | None = None):
    """log(sum(exp(values))) without overflow or underflow.

    Accepts any iterable of floats or an ndarray; with ``axis`` given the
    reduction runs along that axis and an ndarray is returned.
    """
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
    if axis is None:
        if arr.size == 0:
            raise ValueError("logsumexp of an empty collection")
        m = np.max(arr)
        if m == NEG_INF:
            return NEG_INF
        return float(m + np.log(np.sum(np.exp(arr - m))))
    m = np.max(arr, axis=axis, keepdims=True)
    # where the slice is all -inf, keep -inf instead of producing nan
    safe_m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(arr - safe_m), axis=axis)) + np.squeeze(safe_m, axis=axis)
    out = np.where(np.squeeze(m, axis=axis) == NEG_INF, NEG_INF, out)
    return out


def logaddexp(a: float, b: float) -> float:
    """log(exp(a) + exp(b)) for two scalars."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def normalize_logs(values: Iterable[float]) -> list[float]:
    """Shift log-weights so the probabilities they encode sum to one."""
    vals = list(values)
    total = logsumexp(vals)
    if total == NEG_INF:
        raise ValueError("cannot normalize weights with zero total mass")
    return [v - total for v in vals]
