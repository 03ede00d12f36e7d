"""Toy linear forecasters covering the three loss families and their scale behavior.

One weight matrix maps a context window to the horizon, shared across channels,
so channel count is free and every gradient is analytic.  Three heads:

* point (MSE or MAE): horizon values directly;
* Gaussian NLL: a mean head plus a log-std head (std stays positive by
  construction), with the loss computed on the de-normalized distribution;
* token cross-entropy: the context is quantized into uniform bins and a linear
  head over bin-center features emits per-step logits, so the loss never sees
  raw magnitudes.

Training is plain SGD with a fixed learning rate and seeded shuffling;
identical seeds give bitwise-identical weights.
"""

from __future__ import annotations

import copy
import csv
import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    Forecast,
    ForecastKind,
    Instance,
    KindMismatchError,
    Method,
    NormStats,
    ShapeMismatchError,
    TsnormError,
    raw_stats,
)
from .norm import (
    CLIP_THRESHOLD,
    clipped_instance_normalize,
    denormalize_gaussian,
    fit_instance_stats,
    normalize,
)

LOG_2PI = float(np.log(2.0 * np.pi))


class LossKind(enum.Enum):
    MSE = "point_mse"
    MAE = "point_mae"
    GAUSSIAN_NLL = "gaussian_nll"
    TOKEN_CE = "token_ce"

    @property
    def is_point(self) -> bool:
        return self in (LossKind.MSE, LossKind.MAE)


class Scheme(enum.Enum):
    """A normalization scheme a model can be pretrained and evaluated under."""

    REVIN = "revin"
    MEANABS = "meanabs"
    HYBRID = "hybrid"
    STANDARDIZATION = "standardization"
    MINMAX = "minmax"
    MAXABS = "maxabs"
    RAW = "raw"

    @property
    def dataset_method(self) -> Optional[Method]:
        """Offline per-dataset pre-normalization method, if the scheme has one."""
        return {
            Scheme.STANDARDIZATION: Method.STANDARDIZATION,
            Scheme.MINMAX: Method.MINMAX,
            Scheme.MAXABS: Method.MAXABS,
            Scheme.HYBRID: Method.STANDARDIZATION,
        }.get(self)

    @property
    def instance_method(self) -> Optional[Method]:
        """Train-time instance statistic family, if the scheme has one."""
        return {
            Scheme.REVIN: Method.REVIN,
            Scheme.MEANABS: Method.MEANABS,
            Scheme.HYBRID: Method.REVIN,
        }.get(self)

    @property
    def inference_method(self) -> Method:
        """Statistic family fitted on the input context at evaluation time.

        Dataset statistics are unavailable at inference, so dataset-level
        schemes fall back to the same family computed on the context; the
        hybrid scheme keeps only its instance component.
        """
        return {
            Scheme.REVIN: Method.REVIN,
            Scheme.MEANABS: Method.MEANABS,
            Scheme.HYBRID: Method.REVIN,
            Scheme.STANDARDIZATION: Method.STANDARDIZATION,
            Scheme.MINMAX: Method.MINMAX,
            Scheme.MAXABS: Method.MAXABS,
            Scheme.RAW: Method.RAW,
        }[self]


class NonPositiveSigmaError(TsnormError):
    """Predicted standard deviations must be strictly positive."""


class BadBinIndexError(TsnormError):
    """A token index lies outside [0, num_bins)."""


class DivergedError(TsnormError):
    """Training loss became NaN/Inf; carries the offending step index."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step} (loss={loss})")
        self.step = step


@dataclass(frozen=True)
class TokenizerSpec:
    """Uniform quantization grid over a fixed normalized-value range.

    Values outside [lo, hi] clamp to the edge bins; de-tokenization returns
    bin midpoints.
    """

    num_bins: int = 128
    lo: float = -10.0
    hi: float = 10.0

    def __post_init__(self):
        if self.num_bins < 1:
            raise TsnormError(f"num_bins must be positive, got {self.num_bins}")
        if not self.lo < self.hi:
            raise TsnormError(f"need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.num_bins

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.num_bins) + 0.5) * self.bin_width

    def to_dict(self) -> dict:
        return {"num_bins": self.num_bins, "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_dict(cls, d: dict) -> "TokenizerSpec":
        return cls(num_bins=d["num_bins"], lo=d["lo"], hi=d["hi"])


def tokenize(x: np.ndarray, spec: TokenizerSpec) -> np.ndarray:
    """Map values to bin indices; out-of-range values clamp to the edge bins."""
    x = np.asarray(x, dtype=np.float64)
    bins = np.floor((x - spec.lo) / spec.bin_width).astype(np.int64)
    return np.clip(bins, 0, spec.num_bins - 1)


def detokenize(bins: np.ndarray, spec: TokenizerSpec) -> np.ndarray:
    """Map bin indices back to bin midpoints."""
    bins = np.asarray(bins)
    if bins.size and (bins.min() < 0 or bins.max() >= spec.num_bins):
        raise BadBinIndexError(f"bin indices must lie in [0, {spec.num_bins})")
    return spec.centers[bins]


@dataclass
class LinearForecaster:
    """Linear context-to-horizon map, shared across channels.

    ``weights`` is (H, L) and ``bias`` is (H,); the Gaussian head adds a
    second (H, L)/(H,) pair producing log-std, and the token head uses
    (H, B, L)/(H, B) to emit logits over B bins.
    """

    loss_kind: LossKind
    context_len: int
    horizon: int
    weights: np.ndarray
    bias: np.ndarray
    sigma_weights: Optional[np.ndarray] = None
    sigma_bias: Optional[np.ndarray] = None
    token_weights: Optional[np.ndarray] = None
    token_bias: Optional[np.ndarray] = None
    tokenizer: Optional[TokenizerSpec] = None

    @classmethod
    def create(
        cls,
        loss_kind: LossKind,
        context_len: int,
        horizon: int,
        seed: int = 0,
        init_scale: float = 0.01,
        tokenizer: Optional[TokenizerSpec] = None,
    ) -> "LinearForecaster":
        rng = np.random.default_rng(seed)
        model = cls(
            loss_kind=loss_kind,
            context_len=context_len,
            horizon=horizon,
            weights=rng.normal(0.0, init_scale, (horizon, context_len)),
            bias=np.zeros(horizon),
        )
        if loss_kind is LossKind.GAUSSIAN_NLL:
            # log-std head starts at zero so the initial predicted std is 1
            model.sigma_weights = np.zeros((horizon, context_len))
            model.sigma_bias = np.zeros(horizon)
        if loss_kind is LossKind.TOKEN_CE:
            model.tokenizer = tokenizer or TokenizerSpec()
            model.token_weights = rng.normal(
                0.0, init_scale, (horizon, model.tokenizer.num_bins, context_len)
            )
            model.token_bias = np.zeros((horizon, model.tokenizer.num_bins))
        return model

    def to_dict(self) -> dict:
        d = {
            "loss_kind": self.loss_kind.value,
            "context_len": self.context_len,
            "horizon": self.horizon,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
        }
        if self.sigma_weights is not None:
            d["sigma_weights"] = self.sigma_weights.tolist()
            d["sigma_bias"] = self.sigma_bias.tolist()
        if self.token_weights is not None:
            d["token_weights"] = self.token_weights.tolist()
            d["token_bias"] = self.token_bias.tolist()
            d["tokenizer"] = self.tokenizer.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinearForecaster":
        model = cls(
            loss_kind=LossKind(d["loss_kind"]),
            context_len=d["context_len"],
            horizon=d["horizon"],
            weights=np.asarray(d["weights"], dtype=np.float64),
            bias=np.asarray(d["bias"], dtype=np.float64),
        )
        if "sigma_weights" in d:
            model.sigma_weights = np.asarray(d["sigma_weights"], dtype=np.float64)
            model.sigma_bias = np.asarray(d["sigma_bias"], dtype=np.float64)
        if "token_weights" in d:
            model.token_weights = np.asarray(d["token_weights"], dtype=np.float64)
            model.token_bias = np.asarray(d["token_bias"], dtype=np.float64)
            model.tokenizer = TokenizerSpec.from_dict(d["tokenizer"])
        return model


def _check_context(model: LinearForecaster, context: np.ndarray) -> np.ndarray:
    context = np.asarray(context, dtype=np.float64)
    if context.ndim != 2 or context.shape[0] != model.context_len:
        raise ShapeMismatchError(
            f"context must be ({model.context_len}, C), got {context.shape}"
        )
    return context


def forecast(model: LinearForecaster, context_norm: np.ndarray) -> Forecast:
    """Run the model on an already-normalized context window (L, C)."""
    ctx = _check_context(model, context_norm)
    if model.loss_kind.is_point:
        return Forecast(
            kind=ForecastKind.POINT,
            point=model.weights @ ctx + model.bias[:, None],
        )
    if model.loss_kind is LossKind.GAUSSIAN_NLL:
        mean = model.weights @ ctx + model.bias[:, None]
        log_std = model.sigma_weights @ ctx + model.sigma_bias[:, None]
        return Forecast(
            kind=ForecastKind.GAUSSIAN,
            gauss_mean=mean,
            gauss_std=np.exp(log_std),
        )
    # token head: quantize the context, feed bin-center features
    feats = detokenize(tokenize(ctx, model.tokenizer), model.tokenizer)
    logits = np.einsum("hbl,lc->hcb", model.token_weights, feats)
    logits += model.token_bias[:, None, :]
    return Forecast(
        kind=ForecastKind.TOKEN,
        token_logits=logits,
        token_spec=model.tokenizer,
    )


def token_point_forecast(f: Forecast) -> np.ndarray:
    """Collapse token logits to point values: argmax bin, then its midpoint."""
    if f.kind is not ForecastKind.TOKEN:
        raise KindMismatchError(f"expected a token forecast, got {f.kind}")
    return detokenize(np.argmax(f.token_logits, axis=-1), f.token_spec)


# ----------------------------------------------------------------------------
# losses: each returns (scalar loss, gradient w.r.t. its direct inputs)
# ----------------------------------------------------------------------------


def _check_pair(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs target {target.shape}")
    return pred, target


def loss_mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over all cells; gradient 2 (pred - target) / N."""
    pred, target = _check_pair(pred, target)
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def loss_mae(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error over all cells; subgradient sign(pred - target) / N."""
    pred, target = _check_pair(pred, target)
    diff = pred - target
    return float(np.mean(np.abs(diff))), np.sign(diff) / diff.size


def loss_gaussian_nll(
    f: Forecast, target_raw: np.ndarray, stats: NormStats
) -> tuple[float, tuple[np.ndarray, np.ndarray]]:
    """Mean Gaussian NLL of the raw target under the de-normalized distribution.

    ``f`` holds (mean, std) in normalized space; the distribution is mapped
    through ``stats`` before scoring, which shifts the loss by the mean log
    scale but leaves the gradients w.r.t. (mean, log std) untouched.
    Returns (loss, (d_mean, d_log_std)).
    """
    if f.kind is not ForecastKind.GAUSSIAN:
        raise KindMismatchError(f"expected a gaussian forecast, got {f.kind}")
    if (f.gauss_std <= 0).any():
        raise NonPositiveSigmaError("predicted std must be positive")
    target_raw = np.asarray(target_raw, dtype=np.float64)
    if target_raw.shape != f.gauss_mean.shape:
        raise ShapeMismatchError(
            f"target {target_raw.shape} vs mean {f.gauss_mean.shape}"
        )
    denorm = denormalize_gaussian(f, stats)
    z = (target_raw - denorm.gauss_mean) / denorm.gauss_std
    nll_cells = 0.5 * LOG_2PI + np.log(denorm.gauss_std) + 0.5 * z**2
    n = nll_cells.size
    d_mean = -z / f.gauss_std / n
    d_log_std = (1.0 - z**2) / n
    return float(nll_cells.mean()), (d_mean, d_log_std)


def loss_token_ce(
    logits: np.ndarray, target_bins: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy over (H, C) cells with softmax over bins.

    Gradient w.r.t. logits is (softmax - onehot) / (H*C).
    """
    logits = np.asarray(logits, dtype=np.float64)
    target_bins = np.asarray(target_bins)
    if logits.ndim != 3 or target_bins.shape != logits.shape[:2]:
        raise ShapeMismatchError(
            f"logits (H, C, B) and target_bins (H, C) required, "
            f"got {logits.shape} and {target_bins.shape}"
        )
    num_bins = logits.shape[2]
    if target_bins.size and (target_bins.min() < 0 or target_bins.max() >= num_bins):
        raise BadBinIndexError(f"target bins must lie in [0, {num_bins})")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    log_probs = shifted - log_z
    h_idx, c_idx = np.indices(target_bins.shape)
    loss = float(-log_probs[h_idx, c_idx, target_bins].mean())
    grad = np.exp(log_probs)
    grad[h_idx, c_idx, target_bins] -= 1.0
    return loss, grad / target_bins.size


# ----------------------------------------------------------------------------
# training
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainSample:
    """One normalized training example ready for an SGD step.

    ``inputs`` is the (L, C) matrix fed to the linear map; ``target`` is the
    (H, C) value matrix, or int bin indices for token CE.  ``stats`` carries
    the de-normalization applied before the loss (hybrid point models and the
    Gaussian head); None means the loss runs directly on ``target``.
    """

    inputs: np.ndarray
    target: np.ndarray
    stats: Optional[NormStats] = None


@dataclass
class TrainTrace:
    """Per-step training record plus pool statistics.

    ``grad_norms[t][c]`` is the norm of step t's context-weight gradient
    contribution from channel c (the product of the per-channel output
    gradient norm and input norm for the linear map).
    """

    losses: np.ndarray
    grad_norms: list
    rejected: int
    pool_size: int
    seed: int
    lr: float

    @property
    def rejection_rate(self) -> float:
        total = self.rejected + self.pool_size
        return self.rejected / total if total else 0.0

    def to_csv(self, path) -> None:
        max_c = max((len(g) for g in self.grad_norms), default=0)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "loss"] + [f"grad_norm_c{c}" for c in range(max_c)])
            for step, (loss, norms) in enumerate(zip(self.losses, self.grad_norms)):
                row = [step, repr(float(loss))] + [repr(float(v)) for v in norms]
                row += [""] * (max_c - len(norms))
                writer.writerow(row)


def prepare_training_pool(
    instances: Sequence[Instance],
    scheme: Scheme,
    model: LinearForecaster,
    clip_threshold: float = CLIP_THRESHOLD,
) -> tuple[list[TrainSample], int]:
    """Apply a scheme's train-time normalization placement to raw instances.

    Returns (admissible samples, number of clip-rejected instances).  Point
    models under instance-level schemes go through clipped normalization and
    keep the loss in normalized space; the hybrid scheme de-normalizes the
    prediction with the instance statistics before the loss; the Gaussian head
    always de-normalizes its distribution; token models quantize after the
    instance step.  Dataset-level schemes expect the corpus to be
    pre-normalized upstream and add no instance step here.
    """
    samples: list[TrainSample] = []
    rejected = 0
    kind = model.loss_kind
    for inst in instances:
        if inst.context_len != model.context_len or inst.horizon_len != model.horizon:
            raise ShapeMismatchError(
                f"instance ({inst.context_len}, {inst.horizon_len}) does not match "
                f"model ({model.context_len}, {model.horizon})"
            )
        inst_method = scheme.instance_method
        if kind.is_point:
            if scheme in (Scheme.REVIN, Scheme.MEANABS):
                out = clipped_instance_normalize(inst, inst_method, clip_threshold)
                if out.rejected:
                    rejected += 1
                    continue
                samples.append(
                    TrainSample(out.normalized.context, out.normalized.horizon)
                )
            elif scheme is Scheme.HYBRID:
                stats = fit_instance_stats(inst.context, Method.REVIN)
                samples.append(
                    TrainSample(normalize(inst.context, stats), inst.horizon, stats)
                )
            else:
                samples.append(TrainSample(inst.context, inst.horizon))
        elif kind is LossKind.GAUSSIAN_NLL:
            if inst_method is not None:
                stats = fit_instance_stats(inst.context, inst_method)
                ctx = normalize(inst.context, stats)
            else:
                stats = raw_stats(inst.channels)
                ctx = inst.context
            samples.append(TrainSample(ctx, inst.horizon, stats))
        else:  # TOKEN_CE
            spec = model.tokenizer
            if inst_method is not None:
                stats = fit_instance_stats(inst.context, inst_method)
                ctx = normalize(inst.context, stats)
                hor = normalize(inst.horizon, stats)
            else:
                ctx, hor = inst.context, inst.horizon
            feats = detokenize(tokenize(ctx, spec), spec)
            samples.append(TrainSample(feats, tokenize(hor, spec)))
    return samples, rejected


def _per_channel_norms(inputs: np.ndarray, *output_grads: np.ndarray) -> np.ndarray:
    """Norm of each channel's contribution to the context-weight gradient."""
    in_norms = np.linalg.norm(inputs, axis=0)
    total = np.zeros(inputs.shape[1])
    for g in output_grads:
        if g.ndim == 3:  # (H, C, B) token logits
            g_norms = np.linalg.norm(g, axis=(0, 2))
        else:
            g_norms = np.linalg.norm(g, axis=0)
        total += (g_norms * in_norms) ** 2
    return np.sqrt(total)


def _sgd_step(
    model: LinearForecaster, sample: TrainSample, lr: float
) -> tuple[float, np.ndarray]:
    """One SGD update in place; returns (loss, per-channel gradient norms)."""
    ctx = sample.inputs
    kind = model.loss_kind
    if kind.is_point:
        pred = model.weights @ ctx + model.bias[:, None]
        loss_fn = loss_mse if kind is LossKind.MSE else loss_mae
        if sample.stats is not None:
            # prediction de-normalized with instance stats before the loss
            loss, g_raw = loss_fn(pred * sample.stats.scale + sample.stats.shift,
                                  sample.target)
            g = g_raw * sample.stats.scale
        else:
            loss, g = loss_fn(pred, sample.target)
        norms = _per_channel_norms(ctx, g)
        model.weights -= lr * (g @ ctx.T)
        model.bias -= lr * g.sum(axis=1)
        return loss, norms
    if kind is LossKind.GAUSSIAN_NLL:
        f = forecast(model, ctx)
        loss, (d_mean, d_log_std) = loss_gaussian_nll(f, sample.target, sample.stats)
        norms = _per_channel_norms(ctx, d_mean, d_log_std)
        model.weights -= lr * (d_mean @ ctx.T)
        model.bias -= lr * d_mean.sum(axis=1)
        model.sigma_weights -= lr * (d_log_std @ ctx.T)
        model.sigma_bias -= lr * d_log_std.sum(axis=1)
        return loss, norms
    logits = np.einsum("hbl,lc->hcb", model.token_weights, ctx)
    logits += model.token_bias[:, None, :]
    loss, g = loss_token_ce(logits, sample.target)
    norms = _per_channel_norms(ctx, g)
    model.token_weights -= lr * np.einsum("hcb,lc->hbl", g, ctx)
    model.token_bias -= lr * g.sum(axis=1)
    return loss, norms


def train(
    model: LinearForecaster,
    instances: Sequence[Instance],
    scheme: Scheme,
    steps: int,
    lr: float,
    seed: int,
    clip_threshold: float = CLIP_THRESHOLD,
) -> tuple[LinearForecaster, TrainTrace]:
    """SGD-train a copy of ``model`` on the scheme-normalized instance pool.

    Deterministic given ``seed``: the pool order is a seeded permutation,
    redrawn each epoch, and all reductions are fixed-order.  Raises
    DivergedError (with the step index) if the loss leaves the finite range.
    The input model is not mutated.
    """
    model = copy.deepcopy(model)
    samples, rejected = prepare_training_pool(instances, scheme, model, clip_threshold)
    if not samples:
        raise TsnormError("no admissible training instances after clipping")
    rng = np.random.default_rng(seed)
    losses = np.empty(steps)
    grad_norms: list[np.ndarray] = []
    perm = rng.permutation(len(samples))
    cursor = 0
    for step in range(steps):
        if cursor == len(perm):
            perm = rng.permutation(len(samples))
            cursor = 0
        sample = samples[perm[cursor]]
        cursor += 1
        with np.errstate(over="ignore", invalid="ignore"):
            loss, norms = _sgd_step(model, sample, lr)
        if not np.isfinite(loss):
            raise DivergedError(step, loss)
        losses[step] = loss
        grad_norms.append(norms)
    trace = TrainTrace(
        losses=losses,
        grad_norms=grad_norms,
        rejected=rejected,
        pool_size=len(samples),
        seed=seed,
        lr=lr,
    )
    return model, trace
