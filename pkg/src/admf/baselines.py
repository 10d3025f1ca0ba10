"""Classical outlier detectors for comparison: KNN, PCA, HBOD, ABOD.

Every kind exposes the same contract: higher score = more anomalous
(ABOD's angle variance is sign-flipped to conform), decision threshold
set at the (1 - contamination) nearest-rank quantile of the training
scores. Scoring is deterministic given (train set, query).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

BASELINE_KINDS = ("knn", "pca", "hbod", "abod")
DEFAULT_CONTAMINATION = 0.1
DEFAULT_KNN_K = 10
DEFAULT_HBOD_BINS = 10
DEFAULT_PCA_VARIANCE = 0.9
# exact ABOD is O(n^2) per query; fit on at most this many training rows
DEFAULT_ABOD_MAX_TRAIN = 500


def _as_matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("expected a nonempty matrix of points")
    return x


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Smallest value whose rank is ceil(q * N); q in (0, 1]."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("need a nonempty score vector")
    if not 0.0 < q <= 1.0:
        raise ValueError("quantile must lie in (0, 1]")
    rank = max(1, math.ceil(q * values.size))
    return float(np.sort(values)[rank - 1])


def knn_score(train: np.ndarray, query: np.ndarray, k: int = DEFAULT_KNN_K) -> float:
    """Euclidean distance to the k-th nearest training point (self counts)."""
    train = _as_matrix(train)
    query = np.asarray(query, dtype=np.float64)
    if not 1 <= k <= train.shape[0]:
        raise ValueError(f"k={k} requires at least k training points, have {train.shape[0]}")
    diff = train - query
    d2 = np.einsum("ij,ij->i", diff, diff)
    return float(np.sqrt(np.partition(d2, k - 1)[k - 1]))


def _knn_scores(train: np.ndarray, queries: np.ndarray, k: int, chunk: int = 256) -> np.ndarray:
    """Batch k-th-neighbor distances, chunked to bound the distance matrix."""
    train_sq = np.einsum("ij,ij->i", train, train)
    out = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], chunk):
        q = queries[start : start + chunk]
        d2 = np.einsum("ij,ij->i", q, q)[:, None] + train_sq[None, :] - 2.0 * (q @ train.T)
        np.maximum(d2, 0.0, out=d2)
        out[start : start + chunk] = np.sqrt(np.partition(d2, k - 1, axis=1)[:, k - 1])
    return out


@dataclass(frozen=True)
class PCAState:
    mean: np.ndarray
    components: np.ndarray  # (c, f), orthonormal rows


def fit_pca(train: np.ndarray, variance_cutoff: float = DEFAULT_PCA_VARIANCE) -> PCAState:
    """Retain the smallest component count explaining >= the variance cutoff."""
    train = _as_matrix(train)
    if train.shape[0] < 2:
        raise ValueError("PCA needs at least 2 training points")
    if not 0.0 < variance_cutoff <= 1.0:
        raise ValueError("variance cutoff must lie in (0, 1]")
    mean = train.mean(axis=0)
    _, s, vt = np.linalg.svd(train - mean, full_matrices=False)
    total = float(np.sum(s * s))
    if total == 0.0:
        # degenerate: all points identical; residual is the full deviation
        return PCAState(mean=mean, components=np.zeros((0, train.shape[1])))
    ratios = np.cumsum(s * s) / total
    c = int(np.searchsorted(ratios, variance_cutoff - 1e-12) + 1)
    return PCAState(mean=mean, components=vt[:c])


def pca_score(state: PCAState, query: np.ndarray) -> float:
    """Squared residual of (query - mean) off the retained subspace."""
    d = np.asarray(query, dtype=np.float64) - state.mean
    r = d - state.components.T @ (state.components @ d)
    return float(r @ r)


@dataclass(frozen=True)
class HBODState:
    edges: np.ndarray  # (f, bins+1)
    densities: np.ndarray  # (f, bins), each row sums to 1
    min_positive: np.ndarray  # (f,) smallest nonzero density per feature


def fit_hbod(train: np.ndarray, bins: int = DEFAULT_HBOD_BINS) -> HBODState:
    """Per-feature equal-width histograms over the training range."""
    train = _as_matrix(train)
    if bins < 1:
        raise ValueError("bins must be positive")
    n, f = train.shape
    edges = np.empty((f, bins + 1))
    densities = np.empty((f, bins))
    min_positive = np.empty(f)
    for j in range(f):
        lo, hi = float(train[:, j].min()), float(train[:, j].max())
        if hi == lo:
            hi = lo + 1.0  # constant feature: everything lands in bin 0
        counts, edge = np.histogram(train[:, j], bins=bins, range=(lo, hi))
        edges[j] = edge
        densities[j] = counts / n
        min_positive[j] = densities[j][densities[j] > 0].min()
    return HBODState(edges=edges, densities=densities, min_positive=min_positive)


def hbod_score(state: HBODState, query: np.ndarray) -> float:
    """Sum over features of -log(density + 1e-12); out-of-range values take
    the feature's minimum positive density."""
    query = np.asarray(query, dtype=np.float64)
    bins = state.densities.shape[1]
    total = 0.0
    for j, v in enumerate(query):
        edge = state.edges[j]
        if v < edge[0] or v > edge[-1]:
            dens = state.min_positive[j]
        else:
            idx = min(int(np.searchsorted(edge, v, side="right")) - 1, bins - 1)
            idx = max(idx, 0)
            dens = state.densities[j, idx]
        total += -math.log(dens + 1e-12)
    return total


def abod_score(train: np.ndarray, query: np.ndarray) -> float:
    """Negated variance of the weighted cosine over all training pairs.

    For each unordered pair (b, c) of training points distinct from the
    query, the statistic is <b-y, c-y> / (|b-y|^2 |c-y|^2). Coincident
    training points are skipped; with fewer than two usable points the
    score is defined as 0.
    """
    train = _as_matrix(train)
    if train.shape[0] < 3:
        raise ValueError("ABOD needs at least 3 training points")
    y = np.asarray(query, dtype=np.float64)
    d = train - y
    norms2 = np.einsum("ij,ij->i", d, d)
    keep = norms2 > 0.0
    d = d[keep]
    norms2 = norms2[keep]
    m = d.shape[0]
    if m < 2:
        return 0.0
    w = (d @ d.T) / (norms2[:, None] * norms2[None, :])
    vals = w[np.triu_indices(m, k=1)]
    return -float(np.var(vals))


@dataclass(frozen=True)
class BaselineModel:
    """Fitted baseline with its contamination-quantile decision threshold."""

    kind: str
    threshold: float
    contamination: float
    train: np.ndarray | None = None  # knn / abod keep (sub)sampled points
    knn_k: int = DEFAULT_KNN_K
    pca: PCAState | None = None
    hbod: HBODState | None = None

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")


def baseline_score(model: BaselineModel, query: np.ndarray) -> float:
    if model.kind == "knn":
        return knn_score(model.train, query, model.knn_k)
    if model.kind == "pca":
        return pca_score(model.pca, query)
    if model.kind == "hbod":
        return hbod_score(model.hbod, query)
    return abod_score(model.train, query)


def baseline_scores(model: BaselineModel, queries: np.ndarray) -> np.ndarray:
    queries = _as_matrix(queries)
    if model.kind == "knn":
        return _knn_scores(model.train, queries, model.knn_k)
    return np.array([baseline_score(model, q) for q in queries])


def baseline_decide(model: BaselineModel, query: np.ndarray) -> bool:
    return baseline_score(model, query) > model.threshold


def fit_baseline(
    kind: str,
    train: np.ndarray,
    contamination: float = DEFAULT_CONTAMINATION,
    knn_k: int = DEFAULT_KNN_K,
    hbod_bins: int = DEFAULT_HBOD_BINS,
    pca_variance: float = DEFAULT_PCA_VARIANCE,
    abod_max_train: int = DEFAULT_ABOD_MAX_TRAIN,
    seed: int = 0,
) -> BaselineModel:
    """Fit one baseline and set its threshold from the training scores."""
    if not 0.0 < contamination < 0.5:
        raise ValueError("contamination must lie in (0, 0.5)")
    train = _as_matrix(train)
    kwargs: dict = {}
    if kind == "knn":
        kwargs["train"] = train
        kwargs["knn_k"] = knn_k
    elif kind == "pca":
        kwargs["pca"] = fit_pca(train, pca_variance)
    elif kind == "hbod":
        kwargs["hbod"] = fit_hbod(train, hbod_bins)
    elif kind == "abod":
        if train.shape[0] > abod_max_train:
            rng = np.random.default_rng(seed)
            idx = np.sort(rng.choice(train.shape[0], size=abod_max_train, replace=False))
            train = train[idx]
        kwargs["train"] = train
    else:
        raise ValueError(f"unknown baseline kind {kind!r}")
    probe = BaselineModel(kind=kind, threshold=0.0, contamination=contamination, **kwargs)
    scores = baseline_scores(probe, train if probe.train is None else probe.train)
    threshold = nearest_rank_quantile(scores, 1.0 - contamination)
    return BaselineModel(kind=kind, threshold=threshold, contamination=contamination, **kwargs)
