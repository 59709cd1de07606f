"""Monte Carlo statistics helpers.

Time averages along a single trajectory are serially correlated, so their
standard errors come from batch means: split the series into contiguous
batches, take the spread of batch means.  Replica averages reduce in fixed
index order with pairwise summation so results do not depend on worker
scheduling.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError

#: one-sided 95% normal quantile, used for inequality checks
Z_ONE_SIDED_95 = 1.6448536269514722


def pairwise_sum(values: np.ndarray) -> float:
    """Deterministic pairwise summation (numpy's reduction is pairwise)."""
    return float(np.sum(np.asarray(values, dtype=float)))


def batch_mean_stderr(values, n_batches: int | None = None) -> tuple[float, float]:
    """Mean and batch-means standard error of a (possibly correlated) series.

    The default batch count is sqrt(len), clamped to [8, 64]; trailing
    elements that do not fill a batch are dropped from the error estimate
    only.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ConfigurationError("need at least 2 samples for a variance estimate")
    mean = float(np.mean(x))
    if n_batches is None:
        n_batches = int(np.clip(int(math.sqrt(x.size)), 8, 64))
    n_batches = min(n_batches, x.size)
    batch_size = x.size // n_batches
    if batch_size < 1:
        raise ConfigurationError("more batches than samples")
    trimmed = x[: n_batches * batch_size].reshape(n_batches, batch_size)
    bm = trimmed.mean(axis=1)
    se = float(np.std(bm, ddof=1) / math.sqrt(n_batches))
    return mean, se


def replica_mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error over independent replicas (fixed order)."""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ConfigurationError("need at least 2 replicas for a variance estimate")
    mean = pairwise_sum(x) / x.size
    var = pairwise_sum((x - mean) ** 2) / (x.size - 1)
    return float(mean), float(math.sqrt(var / x.size))


def rank_correlation(x, y) -> float:
    """Spearman rank correlation (ties broken by order, adequate here)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))
    if denom == 0:
        return 0.0
    return float(np.dot(rx, ry) / denom)
