"""Autoencoder training: Glorot init, backprop, mini-batch Adam, early stopping.

Trainable parameters live in one flat float64 vector theta (per layer:
weight matrix row-major, then bias). All randomness flows through
numpy.random.Generator (PCG64) seeded explicitly, so a fit is a pure
function of (data, spec, config).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import ArchitectureSpec, AutoencoderModel, Normalizer

STD_FLOOR = 1e-8


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch}: loss is not finite")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    early_stop_patience: int = 10  # 0 disables
    rng_seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValueError("learning_rate and epsilon must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")


@dataclass
class AdamState:
    """First/second moment accumulators; t counts completed updates."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, n_params: int) -> "AdamState":
        return cls(m=np.zeros(n_params), v=np.zeros(n_params), t=0)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    elapsed_ms: float


@dataclass
class TrainingHistory:
    seed: int
    epochs: list[EpochRecord] = field(default_factory=list)
    early_stopped: bool = False

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].loss

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "elapsed_ms"])
            for rec in self.epochs:
                writer.writerow([rec.epoch, repr(rec.loss), f"{rec.elapsed_ms:.3f}"])


def validate_training_rows(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError(f"training data must be a matrix with >= 2 rows, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("training data contains non-finite values")
    return data


def fit_normalizer(data: np.ndarray) -> Normalizer:
    """Per-feature mean and population std; near-zero stds are floored to 1."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    means = data.mean(axis=0)
    stds = data.std(axis=0)
    stds = np.where(stds < STD_FLOOR, 1.0, stds)
    return Normalizer(means=means, stds=stds)


def _layer_shapes(spec: ArchitectureSpec) -> list[tuple[int, int]]:
    sizes = spec.layer_sizes
    return [(sizes[l + 1], sizes[l]) for l in range(len(sizes) - 1)]


def _param_views(spec: ArchitectureSpec, theta: np.ndarray):
    """Weight/bias views into the flat parameter vector (no copies)."""
    ws, bs = [], []
    off = 0
    for out_n, in_n in _layer_shapes(spec):
        ws.append(theta[off : off + out_n * in_n].reshape(out_n, in_n))
        off += out_n * in_n
        bs.append(theta[off : off + out_n])
        off += out_n
    if off != theta.size:
        raise ValueError(f"parameter vector has {theta.size} entries, expected {off}")
    return ws, bs


def theta_of(model: AutoencoderModel) -> np.ndarray:
    """Flatten a model's parameters into one vector."""
    parts = []
    for w, b in zip(model.weights, model.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def build_model(spec: ArchitectureSpec, theta: np.ndarray, normalizer: Normalizer) -> AutoencoderModel:
    """Materialize an immutable model from a flat parameter vector."""
    ws, bs = _param_views(spec, np.array(theta, dtype=np.float64))
    return AutoencoderModel(
        spec=spec,
        weights=tuple(w.copy() for w in ws),
        biases=tuple(b.copy() for b in bs),
        normalizer=normalizer,
    )


def glorot_init(spec: ArchitectureSpec, seed) -> np.ndarray:
    """Uniform Glorot weights in +-sqrt(6 / (fan_in + fan_out)); zero biases.

    `seed` may be an int or an existing numpy Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    theta = np.zeros(spec.n_params)
    ws, _ = _param_views(spec, theta)
    for w in ws:
        out_n, in_n = w.shape
        bound = np.sqrt(6.0 / (in_n + out_n))
        w[...] = rng.uniform(-bound, bound, size=(out_n, in_n))
    return theta


def _forward_batch(ws, bs, batch: np.ndarray) -> list[np.ndarray]:
    """Activations per layer for a batch of normalized rows; output layer linear."""
    ys = [batch]
    last = len(ws) - 1
    for l, (w, b) in enumerate(zip(ws, bs)):
        z = ys[-1] @ w.T + b
        ys.append(z if l == last else np.maximum(z, 0.0))
    return ys


def _loss_from_params(ws, bs, batch: np.ndarray) -> float:
    out = _forward_batch(ws, bs, batch)[-1]
    return float(np.mean(np.sum((batch - out) ** 2, axis=1)))


def loss(model: AutoencoderModel, batch: np.ndarray) -> float:
    """Mean reconstruction error over a batch of normalized rows."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise ValueError("batch must be a nonempty matrix")
    return _loss_from_params(model.weights, model.biases, batch)


def _gradient_from_params(ws, bs, batch: np.ndarray) -> np.ndarray:
    n_rows = batch.shape[0]
    ys = _forward_batch(ws, bs, batch)
    grad_parts_rev = []
    delta = (2.0 / n_rows) * (ys[-1] - batch)
    for l in range(len(ws) - 1, -1, -1):
        gw = delta.T @ ys[l]
        gb = delta.sum(axis=0)
        grad_parts_rev.append(gb)
        grad_parts_rev.append(gw.ravel())
        if l > 0:
            # post-activation > 0 iff pre-activation > 0; subgradient at 0 is 0
            delta = (delta @ ws[l]) * (ys[l] > 0)
    return np.concatenate(grad_parts_rev[::-1])


def gradient(model: AutoencoderModel, batch: np.ndarray) -> np.ndarray:
    """Flat gradient of `loss` w.r.t. every weight and bias."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise ValueError("batch must be a nonempty matrix")
    return _gradient_from_params(model.weights, model.biases, batch)


def adam_step(
    theta: np.ndarray, state: AdamState, g: np.ndarray, cfg: TrainConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new (theta, state)."""
    if theta.shape != g.shape or theta.shape != state.m.shape:
        raise ValueError("theta, gradient and Adam state shapes must agree")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g * g
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    theta_next = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return theta_next, AdamState(m=m, v=v, t=t)


def fit(
    data: np.ndarray, spec: ArchitectureSpec, cfg: TrainConfig
) -> tuple[AutoencoderModel, TrainingHistory]:
    """Train an autoencoder on raw rows of normal behavior.

    Normalizes the data, runs seeded mini-batch Adam (epoch-shuffled, short
    final batch kept), records full-dataset loss per epoch, and stops early
    once the best loss has failed to strictly improve for
    `early_stop_patience` consecutive epochs.
    """
    data = validate_training_rows(data)
    if data.shape[1] != spec.input_dim:
        raise ValueError(f"data has {data.shape[1]} features, spec expects {spec.input_dim}")
    if data.shape[0] < cfg.batch_size:
        raise ValueError(
            f"dataset has {data.shape[0]} rows, fewer than batch_size={cfg.batch_size}"
        )

    normalizer = fit_normalizer(data)
    x = normalizer.apply(data)

    rng = np.random.default_rng(cfg.rng_seed)
    theta = glorot_init(spec, rng)
    state = AdamState.fresh(theta.size)
    history = TrainingHistory(seed=cfg.rng_seed)

    n_rows = x.shape[0]
    best = np.inf
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        tic = time.perf_counter()
        order = rng.permutation(n_rows)
        for start in range(0, n_rows, cfg.batch_size):
            batch = x[order[start : start + cfg.batch_size]]
            ws, bs = _param_views(spec, theta)
            g = _gradient_from_params(ws, bs, batch)
            theta, state = adam_step(theta, state, g, cfg)
        ws, bs = _param_views(spec, theta)
        epoch_loss = _loss_from_params(ws, bs, x)
        history.epochs.append(
            EpochRecord(epoch=epoch, loss=epoch_loss, elapsed_ms=(time.perf_counter() - tic) * 1e3)
        )
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(epoch)
        if epoch_loss < best:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if cfg.early_stop_patience and stale >= cfg.early_stop_patience:
                history.early_stopped = True
                break

    return build_model(spec, theta, normalizer), history
