"""Bootstrap estimation of aleatoric dispersion.

Samples are resampled with replacement ``trials`` times; each resample
yields a coefficient of variation (or a plain standard deviation when the
mean is effectively zero).  The mean of that statistic over the resamples is
the point estimate, which is mapped affinely onto a certainty score.

A resample is represented by how often it draws each (sorted) input
position, so sums over every resample are one matrix product.  The count
matrix depends only on (seed, sample size, trials) and is memoised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .errors import InsufficientDataError, TaxonomyError
from .uncertainty import FacetKind, Observation, QuantSamples

log = logging.getLogger(__name__)

FALLBACK_SCORE = 0.5
ZERO_MEAN_RTOL = 1e-9
_CHUNK_ELEMENTS = 1 << 20
_CACHE_ELEMENTS = 1 << 18


@dataclass(frozen=True)
class MonteCarloConfig:
    trials: int = 10_000
    rng_seed: int = 0
    dispersion_cap: float = 1.0

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 100:
            raise ValueError(f"trials must be an integer >= 100, got {self.trials!r}")
        if not self.dispersion_cap > 0:
            raise ValueError(f"dispersion_cap must be positive, got {self.dispersion_cap!r}")


@dataclass(frozen=True)
class DispersionEstimate:
    point_estimate: float  # mean resampled dispersion statistic
    resample_mean: float  # mean of the resample means
    resample_std: float  # spread of the dispersion statistic across resamples


def _count_chunks(seed: int, n: int, trials: int):
    rng = np.random.default_rng(seed)
    rows = max(1, _CHUNK_ELEMENTS // n)
    done = 0
    while done < trials:
        t = min(rows, trials - done)
        idx = rng.integers(0, n, size=(t, n))
        flat = (np.arange(t)[:, None] * n + idx).ravel()
        yield np.bincount(flat, minlength=t * n).reshape(t, n).astype(float)
        done += t


@lru_cache(maxsize=64)
def _cached_counts(seed: int, n: int, trials: int) -> np.ndarray:
    counts = np.concatenate(list(_count_chunks(seed, n, trials)))
    counts = np.ascontiguousarray(counts.T).T  # column-major, so ``counts.T`` is contiguous
    counts.setflags(write=False)
    return counts


def _counts(seed: int, n: int, trials: int):
    if n * trials <= _CACHE_ELEMENTS:
        return [_cached_counts(seed, n, trials)]
    return _count_chunks(seed, n, trials)


def _column_stats(x: np.ndarray, config: MonteCarloConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bootstrap every column of ``x`` (shape n x m, each column sorted).

    Returns (mean statistic, mean of resample means, spread of statistic).
    """
    n, m = x.shape
    center = x.mean(axis=0)
    xc = x - center
    # Rows: first moments of each column, then second moments; resamples run along axis 1.
    moments = np.concatenate([xc.T, (xc * xc).T]) / n
    threshold = (ZERO_MEAN_RTOL * np.abs(x).max(axis=0))[:, None]
    stat_sum = np.zeros(m)
    stat_sq = np.zeros(m)
    mean_sum = np.zeros(m)
    # Work in place: large temporaries are comparatively expensive to allocate.
    for counts in _counts(config.rng_seed, n, config.trials):
        both = moments @ counts.T
        mean, std = both[:m], both[m:]
        scratch = mean * mean
        std -= scratch
        np.maximum(std, 0.0, out=std)
        np.sqrt(std, out=std)
        mean += center[:, None]
        mean_sum += mean.sum(axis=1)
        amean = np.abs(mean, out=scratch)
        away = amean > threshold
        if away.all():
            stat = np.divide(std, amean, out=std)
        else:
            stat = np.where(away, std / np.where(away, amean, 1.0), std)
        stat_sum += stat.sum(axis=1)
        stat_sq += np.einsum("ij,ij->i", stat, stat)
    t = config.trials
    avg = stat_sum / t
    spread = np.sqrt(np.maximum(stat_sq / t - avg * avg, 0.0))
    return avg, mean_sum / t, spread


def _estimate_columns(x: np.ndarray, config: MonteCarloConfig) -> list[DispersionEstimate]:
    avg, means, spread = _column_stats(x, config)
    return [DispersionEstimate(float(a), float(b), float(c)) for a, b, c in zip(avg, means, spread)]


def point_estimates(x: np.ndarray, config: MonteCarloConfig = MonteCarloConfig()) -> np.ndarray:
    """Point estimates for every column of an (n, m) sample matrix.

    Array counterpart of :func:`monte_carlo_estimates` for callers that
    already hold equal-sized sample sets side by side.
    """
    x = np.sort(np.asarray(x, dtype=float), axis=0)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientDataError("need an (n, m) matrix with n >= 2")
    if not np.all(np.isfinite(x)):
        raise InsufficientDataError("samples must be finite")
    out = np.zeros(x.shape[1])
    varied = x[0] != x[-1]
    if varied.any():
        out[varied] = _column_stats(x[:, varied], config)[0]
    return out


def _as_array(samples: Union[QuantSamples, Sequence[float]]) -> np.ndarray:
    values = samples.values if isinstance(samples, QuantSamples) else samples
    x = np.sort(np.asarray(values, dtype=float))
    if x.size < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InsufficientDataError("samples must be finite")
    return x


def monte_carlo_estimate(
    samples: Union[QuantSamples, Sequence[float]], config: MonteCarloConfig = MonteCarloConfig()
) -> DispersionEstimate:
    x = _as_array(samples)
    if x[0] == x[-1]:
        return DispersionEstimate(0.0, float(x[0]), 0.0)
    return _estimate_columns(x[:, None], config)[0]


def monte_carlo_estimates(
    sample_sets: Sequence[Union[QuantSamples, Sequence[float]]], config: MonteCarloConfig = MonteCarloConfig()
) -> list[DispersionEstimate]:
    """Same as mapping :func:`monte_carlo_estimate`, batched by sample size."""
    arrays = [_as_array(s) for s in sample_sets]
    out: list[DispersionEstimate | None] = [None] * len(arrays)
    groups: dict[int, list[int]] = {}
    for i, x in enumerate(arrays):
        if x[0] == x[-1]:
            out[i] = DispersionEstimate(0.0, float(x[0]), 0.0)
        else:
            groups.setdefault(x.size, []).append(i)
    for members in groups.values():
        block = np.column_stack([arrays[i] for i in members])
        for i, est in zip(members, _estimate_columns(block, config)):
            out[i] = est
    return out


def dispersion_to_certainty(estimate: DispersionEstimate, config: MonteCarloConfig = MonteCarloConfig()) -> float:
    cap = config.dispersion_cap
    return 1.0 - min(estimate.point_estimate, cap) / cap


def certainties(point: np.ndarray, config: MonteCarloConfig = MonteCarloConfig()) -> np.ndarray:
    """Vectorised :func:`dispersion_to_certainty` over point estimates."""
    cap = config.dispersion_cap
    return 1.0 - np.minimum(point, cap) / cap


def quantify_aleatoric(observation: Observation, config: MonteCarloConfig = MonteCarloConfig()) -> float:
    """Certainty score in [0, 1]; falls back to 0.5 on fewer than two samples."""
    if observation.facet.kind is not FacetKind.ALEATORIC or not isinstance(observation.payload, QuantSamples):
        raise TaxonomyError(f"facet {observation.facet.name!r} is not quantitative")
    try:
        estimate = monte_carlo_estimate(observation.payload, config)
    except InsufficientDataError as exc:
        log.warning("%s for %s; using neutral score %.1f", exc, observation.facet.name, FALLBACK_SCORE)
        return FALLBACK_SCORE
    return dispersion_to_certainty(estimate, config)
