"""Feed-forward autoencoder: architecture profiles, inference, reconstruction error.

Models are plain numpy parameter containers. Hidden layers use ReLU, the
output layer is linear so that zero-mean normalized features remain
reconstructible. All inference arithmetic is float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PROFILES = ("HL1", "HL3", "HL5")


class DimensionError(ValueError):
    """Feature dimension is invalid or inconsistent."""


def build_architecture(n: int, profile: str) -> "ArchitectureSpec":
    """Hidden-layer sizes for one of the three symmetric profiles.

    HL1 -> [n/2]; HL3 -> [n/2, n/4, n/2]; HL5 -> [3n/4, n/2, n/4, n/2, 3n/4].
    Fractional sizes are rounded up and clamped to [1, n - 1] so every hidden
    layer stays strictly narrower than the input.
    """
    if n < 2:
        raise DimensionError(f"need at least 2 features, got n={n}")
    fractions = {
        "HL1": (0.5,),
        "HL3": (0.5, 0.25, 0.5),
        "HL5": (0.75, 0.5, 0.25, 0.5, 0.75),
    }
    try:
        profile_fracs = fractions[profile.upper()]
    except KeyError:
        raise ValueError(f"unknown profile {profile!r}, expected one of {PROFILES}") from None
    sizes = tuple(min(max(math.ceil(f * n), 1), n - 1) for f in profile_fracs)
    return ArchitectureSpec(input_dim=n, hidden_sizes=sizes)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Symmetric encoder/decoder layout: input_dim features, palindromic hidden sizes."""

    input_dim: int
    hidden_sizes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_dim < 2:
            raise DimensionError(f"input_dim must be >= 2, got {self.input_dim}")
        if not self.hidden_sizes:
            raise ValueError("at least one hidden layer is required")
        if self.hidden_sizes != self.hidden_sizes[::-1]:
            raise ValueError(f"hidden sizes must be palindromic, got {self.hidden_sizes}")
        if any(not (1 <= h < self.input_dim) for h in self.hidden_sizes):
            raise ValueError(
                f"hidden sizes must lie in [1, {self.input_dim - 1}], got {self.hidden_sizes}"
            )

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        """All layer widths including input and output."""
        return (self.input_dim, *self.hidden_sizes, self.input_dim)

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))


@dataclass(frozen=True)
class Normalizer:
    """Per-feature affine map to zero mean / unit variance."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if means.shape != stds.shape or means.ndim != 1:
            raise DimensionError("means and stds must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(stds))):
            raise ValueError("normalizer parameters must be finite")
        if np.any(stds <= 0):
            raise ValueError("all stds must be positive (degenerate columns are floored upstream)")
        means.flags.writeable = False
        stds.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (np.asarray(v, dtype=np.float64) - self.means) / self.stds

    def invert(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=np.float64) * self.stds + self.means


@dataclass(frozen=True)
class AutoencoderModel:
    """Immutable autoencoder parameters plus the feature normalizer.

    weights[l] has shape (layer_sizes[l+1], layer_sizes[l]), rows indexed by
    destination node, so a layer computes W @ y + b.
    """

    spec: ArchitectureSpec
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    normalizer: Normalizer

    def __post_init__(self):
        sizes = self.spec.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DimensionError(
                f"expected {len(sizes) - 1} weight layers, got {len(self.weights)}"
            )
        ws, bs = [], []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.shape != (sizes[l + 1], sizes[l]):
                raise DimensionError(
                    f"layer {l}: weight shape {w.shape} != {(sizes[l + 1], sizes[l])}"
                )
            if b.shape != (sizes[l + 1],):
                raise DimensionError(f"layer {l}: bias shape {b.shape} != {(sizes[l + 1],)}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l}: parameters must be finite")
            w.flags.writeable = False
            b.flags.writeable = False
            ws.append(w)
            bs.append(b)
        if len(self.normalizer.means) != self.spec.input_dim:
            raise DimensionError("normalizer length does not match input_dim")
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def input_dim(self) -> int:
        return self.spec.input_dim


def forward(model: AutoencoderModel, v: np.ndarray) -> np.ndarray:
    """Reconstruct one already-normalized feature vector.

    ReLU on every hidden layer, linear output layer.
    """
    y = np.asarray(v, dtype=np.float64)
    if y.shape != (model.input_dim,):
        raise DimensionError(f"input shape {y.shape} != ({model.input_dim},)")
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        y = w @ y + b
        if l != last:
            np.maximum(y, 0.0, out=y)
    return y


def reconstruction_error(model: AutoencoderModel, v: np.ndarray) -> float:
    """Sum of squared differences between v and its reconstruction."""
    v = np.asarray(v, dtype=np.float64)
    r = v - forward(model, v)
    return float(r @ r)
