"""Normalization transforms: dataset-level, instance-level, clipped, and hybrid.

Fitting and applying are separate pure operations so that inference-time
statistic substitution (fit on the context, apply anywhere) stays expressible.
Every fitted scale vector passes through the epsilon guard, keeping all
transforms invertible even on constant channels.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (
    SCALE_EPS,
    Dataset,
    Forecast,
    ForecastKind,
    Instance,
    KindMismatchError,
    Method,
    NormStats,
    Scope,
    ShapeMismatchError,
    TsnormError,
    raw_stats,
)

# Largest allowed |normalized value| before an instance is discarded from
# training; guards against near-constant contexts blowing up the horizon.
CLIP_THRESHOLD = 10.0

DATASET_METHODS = (Method.STANDARDIZATION, Method.MINMAX, Method.MAXABS)
INSTANCE_METHODS = (Method.REVIN, Method.MEANABS)


class WrongMethodError(TsnormError):
    """A statistic family was used at a scope it does not support."""


class DegenerateChannelWarning(UserWarning):
    """A channel's pre-guard scale was zero and was replaced by epsilon."""


def _guard_scale(scale: np.ndarray, where: str) -> np.ndarray:
    degenerate = np.flatnonzero(scale < SCALE_EPS)
    if degenerate.size:
        warnings.warn(
            f"{where}: zero-scale channel(s) {degenerate.tolist()} replaced by eps",
            DegenerateChannelWarning,
            stacklevel=3,
        )
    return np.maximum(scale, SCALE_EPS)


def _channel_stats(x: np.ndarray, method: Method) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel (shift, scale) of one statistic family over rows of ``x``."""
    if method is Method.STANDARDIZATION or method is Method.REVIN:
        return x.mean(axis=0), x.std(axis=0)  # population std
    if method is Method.MINMAX:
        lo = x.min(axis=0)
        return lo, x.max(axis=0) - lo
    if method is Method.MAXABS:
        return np.zeros(x.shape[1]), np.abs(x).max(axis=0)
    if method is Method.MEANABS:
        return np.zeros(x.shape[1]), np.abs(x).mean(axis=0)
    if method is Method.RAW:
        return np.zeros(x.shape[1]), np.ones(x.shape[1])
    raise WrongMethodError(f"unknown method {method}")


def fit_dataset_stats(d: Dataset, method: Method) -> NormStats:
    """Fit dataset-level statistics on the TRAIN rows of ``d``.

    Standardization: shift=mean, scale=population std per channel.
    MinMax: shift=min, scale=max-min.  MaxAbs: shift=0, scale=max|.|.
    Test rows never contribute.
    """
    if method not in DATASET_METHODS:
        raise WrongMethodError(f"{method} is not a dataset-level method")
    shift, scale = _channel_stats(d.train_values, method)
    scale = _guard_scale(scale, f"fit_dataset_stats({d.name}, {method.value})")
    return NormStats(shift=shift, scale=scale, scope=Scope.DATASET, method=method)


def fit_instance_stats(context: np.ndarray, method: Method) -> NormStats:
    """Fit instance-level statistics on a context window (L, C).

    RevIN: shift=mean, scale=population std.  MeanAbs: shift=0, scale=mean|.|.
    Constant windows degrade to scale=eps rather than failing.
    """
    if method not in INSTANCE_METHODS:
        raise WrongMethodError(f"{method} is not an instance-level method")
    context = np.asarray(context, dtype=np.float64)
    if context.ndim != 2 or context.shape[0] < 1:
        raise ShapeMismatchError("context must be a non-empty (L, C) matrix")
    shift, scale = _channel_stats(context, method)
    scale = np.maximum(scale, SCALE_EPS)
    return NormStats(shift=shift, scale=scale, scope=Scope.INSTANCE, method=method)


def fit_inference_stats(context: np.ndarray, method: Method) -> NormStats:
    """Fit context-window statistics of any statistic family.

    At inference, dataset-level statistics are unavailable and every method
    falls back to its family computed on the input context (test-time MinMax
    uses the context min/range, MaxAbs the context max|.|, and so on).
    Raw yields identity statistics.
    """
    context = np.asarray(context, dtype=np.float64)
    if context.ndim != 2 or context.shape[0] < 1:
        raise ShapeMismatchError("context must be a non-empty (L, C) matrix")
    if method is Method.RAW:
        return raw_stats(context.shape[1])
    shift, scale = _channel_stats(context, method)
    scale = np.maximum(scale, SCALE_EPS)
    return NormStats(shift=shift, scale=scale, scope=Scope.INSTANCE, method=method)


def _check_width(x: np.ndarray, stats: NormStats, op: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError(f"{op}: input must be 2-D (time, channel)")
    if x.shape[1] != stats.channels:
        raise ShapeMismatchError(
            f"{op}: input has {x.shape[1]} channels, stats have {stats.channels}"
        )
    return x


def normalize(x: np.ndarray, stats: NormStats) -> np.ndarray:
    """Apply (x - shift) / scale per channel."""
    x = _check_width(x, stats, "normalize")
    return (x - stats.shift) / stats.scale


def denormalize(x_norm: np.ndarray, stats: NormStats) -> np.ndarray:
    """Invert ``normalize``: x_norm * scale + shift per channel."""
    x_norm = _check_width(x_norm, stats, "denormalize")
    return x_norm * stats.scale + stats.shift


def denormalize_gaussian(f: Forecast, stats: NormStats) -> Forecast:
    """Map a Gaussian forecast from normalized to raw space.

    mean' = scale * mean + shift, std' = scale * std, per channel.
    """
    if f.kind is not ForecastKind.GAUSSIAN:
        raise KindMismatchError(f"expected a gaussian forecast, got {f.kind}")
    mean = _check_width(f.gauss_mean, stats, "denormalize_gaussian")
    return Forecast(
        kind=ForecastKind.GAUSSIAN,
        gauss_mean=mean * stats.scale + stats.shift,
        gauss_std=f.gauss_std * stats.scale,
        denorm_stats=stats,
    )


@dataclass(frozen=True)
class ClipOutcome:
    """Result of clipped instance normalization.

    ``rejected`` is true iff ``max_abs`` (largest |normalized value| over the
    context and horizon) exceeds ``clip_threshold``; rejected instances must
    not enter training batches.
    """

    normalized: Instance
    rejected: bool
    max_abs: float
    clip_threshold: float
    stats: NormStats

    def __post_init__(self):
        if self.rejected != (self.max_abs > self.clip_threshold):
            raise TsnormError("rejected flag inconsistent with max_abs vs threshold")


def clipped_instance_normalize(
    inst: Instance, method: Method, clip_threshold: float = CLIP_THRESHOLD
) -> ClipOutcome:
    """Normalize context AND horizon with statistics fitted on the context only.

    The whole instance is rescaled with the context's shift/scale; if any
    normalized value (context or horizon) exceeds ``clip_threshold`` in
    magnitude the instance is flagged rejected instead of being clamped.
    """
    stats = fit_instance_stats(inst.context, method)
    ctx = normalize(inst.context, stats)
    hor = normalize(inst.horizon, stats)
    max_abs = float(max(np.abs(ctx).max(), np.abs(hor).max()))
    return ClipOutcome(
        normalized=Instance(context=ctx, horizon=hor, origin=inst.origin),
        rejected=max_abs > clip_threshold,
        max_abs=max_abs,
        clip_threshold=clip_threshold,
        stats=stats,
    )


def hybrid_normalize(
    x: np.ndarray, ds: NormStats, inst_method: Method = Method.REVIN
) -> tuple[np.ndarray, NormStats]:
    """Dataset-level standardization followed by instance normalization.

    Returns the doubly normalized window and the instance statistics fitted on
    the standardized window.  De-normalization for losses and metrics uses
    ONLY the returned instance statistics; at test time the dataset step is
    dropped entirely and the pipeline degrades to plain instance RevIN.
    """
    if ds.scope is not Scope.DATASET or ds.method is not Method.STANDARDIZATION:
        raise WrongMethodError("hybrid requires dataset-level standardization stats")
    standardized = normalize(x, ds)
    inst = fit_instance_stats(standardized, inst_method)
    return normalize(standardized, inst), inst
