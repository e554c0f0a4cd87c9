"""Batch-means estimation of stationary expectations from time series."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_BATCHES = 50
MIN_DECISION_BATCHES = 10


class EstimationError(ValueError):
    pass


class OrderingError(EstimationError):
    """Samples were fed with non-increasing times."""


@dataclass(frozen=True)
class StationaryEstimate:
    mean: float | np.ndarray
    stderr: float | np.ndarray
    n_batches: int
    batch_len: float

    @classmethod
    def from_batches(cls, batch_means, batch_len: float) -> "StationaryEstimate":
        b = np.asarray(batch_means, dtype=float)
        n = b.shape[0]
        if n < 2:
            raise EstimationError(f"need at least 2 batches, got {n}")
        mean = b.mean(axis=0)
        stderr = b.std(axis=0, ddof=1) / math.sqrt(n)
        if b.ndim == 1:
            mean, stderr = float(mean), float(stderr)
        return cls(mean, stderr, n, float(batch_len))

    def z_score(self, target=0.0):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.asarray(self.mean) - target) / np.asarray(self.stderr)

    def within(self, target=0.0, n_sigma: float = 3.0):
        """True where |mean - target| <= n_sigma * stderr.

        Raises :class:`EstimationError` when there are too few batches for a
        pass/fail decision.
        """
        if self.n_batches < MIN_DECISION_BATCHES:
            raise EstimationError(
                f"{self.n_batches} batches is too few for a pass/fail decision "
                f"(need {MIN_DECISION_BATCHES})")
        dev = np.abs(np.asarray(self.mean) - target)
        ok = dev <= n_sigma * np.asarray(self.stderr)
        return bool(ok) if ok.ndim == 0 else ok


class BatchMeans:
    """Streaming accumulator over a fixed time window split into equal batches.

    Samples may be scalars or arrays of a fixed shape.  Memory is one running
    sum per batch per tracked scalar.  ``tag`` labels the trajectory so that
    accumulators from independent runs can be merged; the merged estimate
    does not depend on merge order.
    """

    def __init__(self, t_start: float, t_end: float, n_batches: int = DEFAULT_BATCHES,
                 tag: str = "0"):
        if not t_end > t_start:
            raise EstimationError("empty averaging window")
        if n_batches < 1:
            raise EstimationError("n_batches must be positive")
        self.t_start, self.t_end = float(t_start), float(t_end)
        self.n_batches = int(n_batches)
        self.batch_len = (self.t_end - self.t_start) / self.n_batches
        self._sums: dict[tuple[str, int], np.ndarray] = {}
        self._counts: dict[tuple[str, int], int] = {}
        self.tag = str(tag)
        self._last_t = -math.inf

    def _index(self, t: float) -> int:
        i = int((t - self.t_start) / self.batch_len)
        return min(max(i, 0), self.n_batches - 1)

    def accumulate(self, sample, t: float) -> "BatchMeans":
        if t <= self._last_t:
            raise OrderingError(f"time {t} does not follow {self._last_t}")
        if t < self.t_start - 1e-12 * max(1.0, abs(self.t_start)):
            raise EstimationError(f"sample at t={t} precedes the averaging window")
        self._last_t = t
        key = (self.tag, self._index(t))
        x = np.asarray(sample, dtype=float)
        if key in self._sums:
            self._sums[key] += x
            self._counts[key] += 1
        else:
            self._sums[key] = x.copy()
            self._counts[key] = 1
        return self

    def merge(self, other: "BatchMeans") -> "BatchMeans":
        """Union of batches from two accumulators (tags must differ)."""
        if not math.isclose(self.batch_len, other.batch_len, rel_tol=1e-12):
            raise EstimationError("cannot merge accumulators with different batch lengths")
        clash = set(self._sums) & set(other._sums)
        if clash:
            raise EstimationError(f"batch keys collide on merge: tags {sorted({k[0] for k in clash})}")
        out = BatchMeans(self.t_start, self.t_end, self.n_batches, self.tag)
        out._sums = {k: v.copy() for k, v in self._sums.items()}
        out._counts = dict(self._counts)
        for k, v in other._sums.items():
            out._sums[k] = v.copy()
            out._counts[k] = other._counts[k]
        return out

    @classmethod
    def from_batch_means(cls, t_start: float, t_end: float, means, tag: str = "0") -> "BatchMeans":
        """Rebuild an accumulator from stored per-batch means (one sample per batch)."""
        means = np.asarray(means, dtype=float)
        acc = cls(t_start, t_end, means.shape[0], tag)
        for i, row in enumerate(means):
            acc._sums[(acc.tag, i)] = row.copy()
            acc._counts[(acc.tag, i)] = 1
        acc._last_t = t_end
        return acc

    def batch_means(self) -> np.ndarray:
        keys = sorted(self._sums)
        if not keys:
            return np.empty((0,))
        return np.stack([self._sums[k] / self._counts[k] for k in keys])

    def finalize(self) -> StationaryEstimate:
        return StationaryEstimate.from_batches(self.batch_means(), self.batch_len)


def accumulate(acc: BatchMeans, sample, t: float) -> BatchMeans:
    return acc.accumulate(sample, t)


def finalize(acc: BatchMeans) -> StationaryEstimate:
    return acc.finalize()


def rechunk(batch_means: np.ndarray, factor: int) -> np.ndarray:
    """Average consecutive groups of ``factor`` batches (drops a ragged tail)."""
    b = np.asarray(batch_means, dtype=float)
    n = (b.shape[0] // factor) * factor
    return b[:n].reshape((n // factor, factor) + b.shape[1:]).mean(axis=1)


def ar1_stderr(phi: float, innovation_sd: float, n_samples: int) -> float:
    """Asymptotic standard error of the sample mean of an AR(1) stream."""
    var = innovation_sd**2 / (1 - phi**2)
    return math.sqrt(var * (1 + phi) / (1 - phi) / n_samples)
