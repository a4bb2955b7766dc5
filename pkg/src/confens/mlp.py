"""Feed-forward regressor trained from scratch.

Fixed architecture (three ReLU hidden layers of 60, 20 and 10 units, linear
scalar output), mini-batch SGD with Nesterov momentum, inverted dropout on
the hidden layers, step-decay learning-rate schedules with optional cyclic
resets, and patience-based early stopping on validation RMSE.

The optimized batch objective is mean squared error; RMSE (the monitored
metric) has the same minimizers, and every stopping/acceptance decision is
still taken on RMSE.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import ConfensError
from .dataset import Dataset, SplitPlan, make_batches, mix_seed

HIDDEN_SIZES = (60, 20, 10)


class TrainingDivergedError(ConfensError, ArithmeticError):
    """Training produced a non-finite value; carries the epoch it happened."""

    def __init__(self, epoch: int | None = None):
        where = f"at epoch {epoch}" if epoch is not None else "in optimizer step"
        super().__init__(f"non-finite training values {where}")
        self.epoch = epoch


@dataclass
class NetworkParams:
    """Per-layer weight matrices and bias vectors (also reused as the container
    shape for velocities and gradients)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None

    def __post_init__(self) -> None:
        if len(self.weights) != len(HIDDEN_SIZES) + 1 or len(self.biases) != len(self.weights):
            raise ValueError("expected one weight/bias pair per layer (3 hidden + output)")
        sizes = self.layer_sizes
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i}: inconsistent shapes {w.shape} / {b.shape}")
        if tuple(sizes[1:]) != HIDDEN_SIZES + (1,):
            raise ValueError(f"hidden sizes must be {HIDDEN_SIZES} with scalar output")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def d(self) -> int:
        return int(self.weights[0].shape[0])


def init_params(d: int, seed: int) -> NetworkParams:
    """Fan-in-scaled uniform init: W ~ U[-sqrt(6/fan_in), +sqrt(6/fan_in)], b = 0."""
    if d < 1:
        raise ValueError(f"input width must be >= 1, got {d}")
    rng = np.random.default_rng(seed)
    sizes = (d,) + HIDDEN_SIZES + (1,)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights=weights, biases=biases, seed=int(seed))


def clone_params(params: NetworkParams) -> NetworkParams:
    return NetworkParams(
        weights=[w.copy() for w in params.weights],
        biases=[b.copy() for b in params.biases],
        seed=params.seed,
    )


def zeros_like_params(params: NetworkParams) -> NetworkParams:
    return NetworkParams(
        weights=[np.zeros_like(w) for w in params.weights],
        biases=[np.zeros_like(b) for b in params.biases],
        seed=params.seed,
    )


def _combine(a: NetworkParams, b: NetworkParams, scale: float) -> NetworkParams:
    return NetworkParams(
        weights=[wa + scale * wb for wa, wb in zip(a.weights, b.weights)],
        biases=[ba + scale * bb for ba, bb in zip(a.biases, b.biases)],
        seed=a.seed,
    )


def dropout_masks(
    rng: np.random.Generator, batch_size: int, rate: float
) -> list[np.ndarray]:
    """Inverted-dropout masks for the three hidden layers.

    Entries are 0 with probability ``rate`` and ``1/(1-rate)`` otherwise, so
    the masked activation is unbiased and inference needs no rescaling.
    """
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = 1.0 - rate
    return [
        (rng.random((batch_size, width)) >= rate) / keep for width in HIDDEN_SIZES
    ]


def _forward_cached(
    params: NetworkParams, X: np.ndarray, masks: list[np.ndarray] | None
):
    """Forward pass keeping pre-activations and (masked) activations per layer."""
    zs, acts = [], [X]
    h = X
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        if layer < len(HIDDEN_SIZES):
            h = np.maximum(z, 0.0)
            if masks is not None:
                h = h * masks[layer]
            zs.append(z)
            acts.append(h)
        else:
            out = z[:, 0]
    return zs, acts, out


def forward(
    params: NetworkParams,
    x: np.ndarray | Sequence[float],
    mode: str = "infer",
    dropout_rate: float = 0.10,
    mask_seed: int | None = None,
):
    """Predict for one instance (1-D input, returns a float) or a batch.

    ``mode="train"`` applies inverted dropout to the hidden layers using
    masks drawn from ``mask_seed``; ``mode="infer"`` applies no masking and
    no rescaling. The output layer is always linear.
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    X = np.atleast_2d(arr)
    if X.shape[1] != params.d:
        raise ValueError(f"input width {X.shape[1]} != network width {params.d}")
    masks = None
    if mode == "train" and dropout_rate > 0:
        if mask_seed is None:
            raise ValueError("train mode with dropout needs a mask seed")
        masks = dropout_masks(np.random.default_rng(mask_seed), X.shape[0], dropout_rate)
    _, _, out = _forward_cached(params, X, masks)
    return float(out[0]) if single else out


def predict(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Inference-mode predictions for a feature matrix."""
    _, _, out = _forward_cached(params, np.atleast_2d(np.asarray(X, dtype=np.float64)), None)
    return out


def rmse(preds: np.ndarray, targets: np.ndarray) -> float:
    p = np.asarray(preds, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("rmse of empty input")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def batch_loss(
    params: NetworkParams,
    batch_x: np.ndarray,
    batch_y: np.ndarray,
    masks: list[np.ndarray] | None = None,
) -> float:
    """Mean-squared-error batch objective that :func:`backward` differentiates."""
    _, _, out = _forward_cached(params, batch_x, masks)
    return float(np.mean((out - batch_y) ** 2))


def backward(
    params: NetworkParams,
    batch_x: np.ndarray,
    batch_y: np.ndarray,
    masks: list[np.ndarray] | None = None,
) -> NetworkParams:
    """Analytic gradient of :func:`batch_loss` w.r.t. every weight and bias.

    ``masks`` must be the exact masks used in the paired forward pass; units
    a mask dropped contribute zero gradient everywhere on their path.
    """
    X = np.atleast_2d(np.asarray(batch_x, dtype=np.float64))
    y = np.asarray(batch_y, dtype=np.float64).ravel()
    if X.shape[1] != params.d:
        raise ValueError(f"input width {X.shape[1]} != network width {params.d}")
    if X.shape[0] != y.shape[0]:
        raise ValueError("batch_x and batch_y disagree on batch size")
    if masks is not None:
        if len(masks) != len(HIDDEN_SIZES):
            raise ValueError("need one mask per hidden layer")
        for m, width in zip(masks, HIDDEN_SIZES):
            if m.shape != (X.shape[0], width):
                raise ValueError(f"mask shape {m.shape} != {(X.shape[0], width)}")
    zs, acts, out = _forward_cached(params, X, masks)
    B = X.shape[0]
    grad_w = [np.empty(0)] * len(params.weights)
    grad_b = [np.empty(0)] * len(params.biases)
    delta = (2.0 / B) * (out - y)[:, None]
    grad_w[-1] = acts[-1].T @ delta
    grad_b[-1] = delta.sum(axis=0)
    for layer in range(len(HIDDEN_SIZES) - 1, -1, -1):
        upstream = delta @ params.weights[layer + 1].T
        if masks is not None:
            upstream = upstream * masks[layer]
        delta = upstream * (zs[layer] > 0)
        grad_w[layer] = acts[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
    return NetworkParams(weights=grad_w, biases=grad_b, seed=params.seed)


def sgd_nesterov_step(
    params: NetworkParams,
    velocity: NetworkParams,
    gradients: NetworkParams,
    lr: float,
    momentum: float = 0.9,
) -> tuple[NetworkParams, NetworkParams]:
    """One Nesterov update: v' = momentum*v - lr*g,  theta' = theta + v'.

    ``gradients`` must be evaluated at the look-ahead point
    ``theta + momentum*v`` (see :func:`lookahead_params`). Pure function.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    for g in gradients.weights + gradients.biases:
        if not np.isfinite(g).all():
            raise TrainingDivergedError()
    new_v = NetworkParams(
        weights=[momentum * v - lr * g for v, g in zip(velocity.weights, gradients.weights)],
        biases=[momentum * v - lr * g for v, g in zip(velocity.biases, gradients.biases)],
        seed=params.seed,
    )
    new_p = _combine(params, new_v, 1.0)
    return new_p, new_v


def lookahead_params(params: NetworkParams, velocity: NetworkParams, momentum: float) -> NetworkParams:
    """The point theta + momentum*v where the Nesterov gradient is evaluated."""
    return _combine(params, velocity, momentum)


@dataclass(frozen=True)
class StepDecaySchedule:
    """Multiplicative step decay, optionally reset at the start of each cycle.

    ``decay_factor`` is the retained fraction per step (0.6 encodes a 40%
    decrease); ``cycle_epochs=None`` means no cyclic reset.
    """

    decay_factor: float = 0.6
    step_epochs: int = 200
    cycle_epochs: int | None = None

    def __post_init__(self) -> None:
        if not 0 < self.decay_factor < 1:
            raise ValueError("decay_factor must be in (0, 1)")
        if self.step_epochs < 1:
            raise ValueError("step_epochs must be >= 1")
        if self.cycle_epochs is not None and self.cycle_epochs < self.step_epochs:
            raise ValueError("cycle_epochs must be >= step_epochs")


def lr_at(schedule: StepDecaySchedule, epoch: int, lr0: float) -> float:
    """Learning rate for a 0-based epoch index under ``schedule``."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    e = epoch % schedule.cycle_epochs if schedule.cycle_epochs else epoch
    return lr0 * schedule.decay_factor ** (e // schedule.step_epochs)


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 0.005
    momentum: float = 0.9
    dropout_rate: float = 0.10
    max_epochs: int = 3000
    patience: int | None = 200
    batch_fraction: float = 0.15
    schedule: StepDecaySchedule = field(default_factory=StepDecaySchedule)

    def __post_init__(self) -> None:
        if self.lr0 <= 0:
            raise ValueError("lr0 must be > 0")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.patience is not None and self.patience > self.max_epochs:
            raise ValueError("patience must be <= max_epochs")


@dataclass
class TrainHistory:
    """Per-epoch record of a training run (epochs are 1-based)."""

    val_rmse: list[float]
    lr: list[float]
    best_epoch: int
    stop_reason: str  # "patience" | "max_epochs" | "external"

    def to_dict(self) -> dict:
        return {
            "val_rmse": self.val_rmse,
            "lr": self.lr,
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
        }


@dataclass
class EpochState:
    """Live state yielded after each epoch by :func:`run_epochs`.

    ``params`` and ``velocity`` are the live objects and keep evolving;
    callers that retain them must :func:`clone_params` first.
    """

    epoch: int
    params: NetworkParams
    velocity: NetworkParams
    val_rmse: float
    val_preds: np.ndarray
    lr: float


def run_epochs(
    dataset: Dataset,
    split: SplitPlan,
    config: TrainConfig,
    seed: int,
    max_epochs: int | None = None,
) -> Iterator[EpochState]:
    """Drive mini-batch Nesterov SGD, yielding state after every epoch.

    Validation RMSE is evaluated in inference mode (dropout off) on the full
    validation set. All randomness (init, per-epoch shuffles, dropout masks)
    derives from ``seed``. Raises :class:`TrainingDivergedError` when the
    validation loss stops being finite.
    """
    X, y = dataset.features, dataset.targets
    train_idx = np.asarray(split.train_idx, dtype=np.intp)
    valid_idx = np.asarray(split.valid_idx, dtype=np.intp)
    X_valid, y_valid = X[valid_idx], y[valid_idx]
    params = init_params(dataset.d, mix_seed(seed, 0))
    velocity = zeros_like_params(params)
    limit = config.max_epochs if max_epochs is None else max_epochs
    for epoch in range(1, limit + 1):
        lr = lr_at(config.schedule, epoch - 1, config.lr0)
        epoch_seed = mix_seed(seed, epoch)
        batches = make_batches(train_idx, config.batch_fraction, mix_seed(epoch_seed, 0))
        mask_rng = np.random.default_rng(mix_seed(epoch_seed, 1))
        for batch in batches:
            masks = (
                dropout_masks(mask_rng, batch.size, config.dropout_rate)
                if config.dropout_rate > 0
                else None
            )
            look = lookahead_params(params, velocity, config.momentum)
            grads = backward(look, X[batch], y[batch], masks)
            try:
                params, velocity = sgd_nesterov_step(
                    params, velocity, grads, lr, config.momentum
                )
            except TrainingDivergedError:
                raise TrainingDivergedError(epoch) from None
        val_preds = predict(params, X_valid)
        val = rmse(val_preds, y_valid)
        if not math.isfinite(val):
            raise TrainingDivergedError(epoch)
        yield EpochState(epoch, params, velocity, val, val_preds, lr)


def train_single(
    dataset: Dataset,
    split: SplitPlan,
    config: TrainConfig,
    seed: int,
) -> tuple[NetworkParams, TrainHistory]:
    """Train one network with early stopping; returns best-epoch parameters.

    Stops once ``config.patience`` consecutive epochs fail to improve the
    best validation RMSE seen so far (strict improvement), or at
    ``config.max_epochs``; the parameters restored are those of the best
    epoch, not the last one.
    """
    history_rmse: list[float] = []
    history_lr: list[float] = []
    best = math.inf
    best_epoch = 0
    best_params: NetworkParams | None = None
    stale = 0
    stop_reason = "max_epochs"
    for state in run_epochs(dataset, split, config, seed):
        history_rmse.append(state.val_rmse)
        history_lr.append(state.lr)
        if state.val_rmse < best:
            best = state.val_rmse
            best_epoch = state.epoch
            best_params = clone_params(state.params)
            stale = 0
        else:
            stale += 1
        if config.patience is not None and stale >= config.patience:
            stop_reason = "patience"
            break
    if best_params is None:
        raise ConfensError("training ran zero epochs")
    history = TrainHistory(history_rmse, history_lr, best_epoch, stop_reason)
    return best_params, history


def params_to_json(params: NetworkParams) -> str:
    """Self-describing JSON round-trip, bit-exact at double precision."""
    return json.dumps(
        {
            "layer_sizes": list(params.layer_sizes),
            "seed": params.seed,
            "weights": [w.tolist() for w in params.weights],
            "biases": [b.tolist() for b in params.biases],
        }
    )


def params_from_json(text: str) -> NetworkParams:
    obj = json.loads(text)
    params = NetworkParams(
        weights=[np.array(w, dtype=np.float64) for w in obj["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in obj["biases"]],
        seed=obj.get("seed"),
    )
    if list(params.layer_sizes) != obj["layer_sizes"]:
        raise ValueError("layer_sizes field disagrees with stored arrays")
    return params
