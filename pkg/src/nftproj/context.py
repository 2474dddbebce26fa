"""Collection context vectors from first-quarter token series.

Each token's Q1 series is flattened day-major into a 182-vector
``[v_0, n_0, v_1, n_1, ...]``. PCA over all training tokens gives six
components; a collection's raw context is the mean of its tokens'
projections, and all raw contexts are squashed into ``[1, 3]`` with a single
global min/max.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError, DegenerateRange, EmptyCollection, RankDeficient
from .series import CollectionSeries, Quarter, slice_quarter

N_COMPONENTS = 6
FEATURE_RANGE = (1.0, 3.0)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def project(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components.T


@dataclass(frozen=True)
class NormalizationParams:
    abs_min_offset: float
    global_min: float
    global_max: float
    a: float = FEATURE_RANGE[0]
    b: float = FEATURE_RANGE[1]

    def apply(self, raw) -> np.ndarray:
        shifted = np.asarray(raw, dtype=float) + self.abs_min_offset
        return (shifted - self.global_min) / (self.global_max - self.global_min) * (self.b - self.a) + self.a


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude loading is positive."""
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(len(vectors)), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def fit_pca_matrix(X, n_components: int = N_COMPONENTS) -> PcaModel:
    """PCA of the rows of ``X`` by symmetric eigendecomposition of the sample covariance."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("PCA input must be a 2-D array")
    n, d = X.shape
    if n < n_components + 1 or d < n_components:
        raise RankDeficient(f"need at least {n_components + 1} samples of dimension >= {n_components}, got {X.shape}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:n_components]
    top = evals[order]
    tol = max(n, d) * np.finfo(float).eps * max(float(evals.max()), 0.0)
    if top[-1] <= tol or not np.isfinite(top).all():
        rank = int(np.sum(evals > tol))
        raise RankDeficient(f"covariance rank {rank} < {n_components}")
    components = _sign_fix(evecs[:, order].T)
    return PcaModel(mean, np.ascontiguousarray(components), np.clip(top, 0.0, None))


def token_vectors(q1: CollectionSeries, q1_days: int = Quarter.Q1.days) -> np.ndarray:
    if q1.start_day != 0 or q1.n_days < q1_days:
        raise DataError(f"{q1.collection_id}: need the first {q1_days} days of the series")
    return q1.data[:, :q1_days, :].reshape(q1.n_tokens, 2 * q1_days)


def fit_pca(training_q1, n_components: int = N_COMPONENTS) -> PcaModel:
    X = np.concatenate([token_vectors(cs) for cs in training_q1], axis=0)
    return fit_pca_matrix(X, n_components)


def collection_context_raw(pca: PcaModel, q1: CollectionSeries) -> np.ndarray:
    if q1.n_tokens == 0:
        raise EmptyCollection(f"collection {q1.collection_id} has no tokens")
    return pca.project(token_vectors(q1, pca.mean.size // 2)).mean(axis=0)


def normalize_contexts(raw: dict, feature_range=FEATURE_RANGE):
    """Squash raw context vectors into ``feature_range`` with one global min/max.

    Returns the context table (same keys, same order) and the parameters
    needed to embed later collections identically.
    """
    if not raw:
        raise DegenerateRange("no contexts to normalize")
    stacked = np.concatenate([np.asarray(v, dtype=float).ravel() for v in raw.values()])
    offset = abs(float(stacked.min()))
    shifted = stacked + offset
    lo, hi = float(shifted.min()), float(shifted.max())
    if not hi > lo:
        raise DegenerateRange("all raw context values are equal")
    params = NormalizationParams(offset, lo, hi, *feature_range)
    table = {cid: params.apply(v) for cid, v in raw.items()}
    return table, params


def embed_new(pca: PcaModel, params: NormalizationParams, q1: CollectionSeries) -> np.ndarray:
    scaled = params.apply(collection_context_raw(pca, q1))
    return np.clip(scaled, params.a, params.b)


def context_distance(ctx, table: dict):
    """Euclidean distance to the nearest context in ``table`` and its id."""
    if not table:
        raise DataError("context table is empty")
    ctx = np.asarray(ctx, dtype=float)
    best_id, best = None, np.inf
    for cid, other in table.items():
        dist = float(np.linalg.norm(ctx - np.asarray(other, dtype=float)))
        if dist < best:
            best_id, best = cid, dist
    return best, best_id


def max_pairwise_distance(table: dict) -> float:
    vecs = [np.asarray(v, dtype=float) for v in table.values()]
    return max((float(np.linalg.norm(a - b)) for a, b in combinations(vecs, 2)), default=0.0)


class ContextEncoder(TransformerMixin, BaseEstimator):
    """Fit PCA contexts on training collections and embed new ones.

    ``fit`` and ``transform`` take a list of :class:`CollectionSeries`
    starting at day 0 (only the first ``q1_days`` days are used);
    ``transform`` returns an ``(n_collections, n_components)`` array.
    """

    def __init__(self, n_components=N_COMPONENTS, feature_range=FEATURE_RANGE):
        self.n_components = n_components
        self.feature_range = feature_range

    def fit(self, X, y=None):
        collections = _as_collection_list(X)
        q1 = [slice_quarter(cs, Quarter.Q1) for cs in collections]
        self.pca_ = fit_pca(q1, self.n_components)
        raw = {cs.collection_id: collection_context_raw(self.pca_, cs) for cs in q1}
        if len(raw) != len(q1):
            raise DataError("training collection ids must be unique")
        self.contexts_, self.norm_ = normalize_contexts(raw, tuple(self.feature_range))
        self.threshold_ = max_pairwise_distance(self.contexts_)
        return self

    def transform(self, X):
        check_is_fitted(self, "pca_")
        collections = _as_collection_list(X)
        return np.array([embed_new(self.pca_, self.norm_, slice_quarter(cs, Quarter.Q1))
                         for cs in collections]).reshape(len(collections), -1)

    def embed(self, cs: CollectionSeries) -> np.ndarray:
        return self.transform([cs])[0]

    def distance(self, ctx):
        check_is_fitted(self, "pca_")
        return context_distance(ctx, self.contexts_)

    @classmethod
    def from_fitted(cls, pca: PcaModel, norm: NormalizationParams, contexts: dict):
        enc = cls(pca.n_components, (norm.a, norm.b))
        enc.pca_, enc.norm_ = pca, norm
        enc.contexts_ = {k: np.asarray(v, dtype=float) for k, v in contexts.items()}
        enc.threshold_ = max_pairwise_distance(enc.contexts_)
        return enc


def _as_collection_list(X) -> list:
    if isinstance(X, CollectionSeries):
        return [X]
    items = list(X)
    if not items or not all(isinstance(cs, CollectionSeries) for cs in items):
        raise DataError("expected a non-empty list of CollectionSeries")
    return items
