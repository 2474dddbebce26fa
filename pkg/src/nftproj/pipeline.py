"""End-to-end projector: Q1 context, conditional generation, step-transform."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .context import ContextEncoder, _as_collection_list
from .exceptions import ContextDistanceWarning, DataError
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.data import make_training_set
from .nn.estimator import ContextualLSTMGenerator
from .series import N_DAYS, CollectionSeries, Quarter, slice_quarter
from .transform import assemble_projection, step_transform_arrays

HORIZON = N_DAYS - Quarter.Q1.days

_GENERATOR_PARAMS = ("hidden", "window", "epochs", "batch_size", "dropout", "lr", "beta1", "beta2",
                     "eps", "seed", "scale", "samples_per_epoch")


@dataclass
class Projection:
    """Result of projecting one collection from its first quarter."""

    collection_id: str
    raw: CollectionSeries          # observed Q1 followed by the raw generation
    stepped: CollectionSeries      # observed Q1 followed by the step-transformed generation
    context: np.ndarray | None
    distance: float | None
    nearest: str | None
    out_of_distribution: bool
    n_clamped: int


class NFTProjector(BaseEstimator):
    """Projects a collection's Q2-Q4 daily series from its Q1 series.

    ``fit`` takes training collections covering the full year. With
    ``use_context=False`` no context is fitted and the generator sees zeros,
    which is the unconditional baseline.

    ``distance_threshold`` sets the out-of-distribution warning level; by
    default it is the largest pairwise distance between training contexts.
    """

    def __init__(self, use_context=True, n_components=6, hidden=300, window=20, epochs=50,
                 batch_size=1024, dropout=0.2, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, seed=0,
                 scale="max", samples_per_epoch=None, distance_threshold=None):
        self.use_context = use_context
        self.n_components = n_components
        self.hidden = hidden
        self.window = window
        self.epochs = epochs
        self.batch_size = batch_size
        self.dropout = dropout
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.seed = seed
        self.scale = scale
        self.samples_per_epoch = samples_per_epoch
        self.distance_threshold = distance_threshold

    def _generator_params(self) -> dict:
        return {k: getattr(self, k) for k in _GENERATOR_PARAMS}

    def fit(self, X, y=None):
        collections = _as_collection_list(X)
        for cs in collections:
            if cs.start_day != 0 or cs.n_days != N_DAYS:
                raise DataError(f"{cs.collection_id}: training series must cover days 0-{N_DAYS - 1}")
        if self.use_context:
            self.encoder_ = ContextEncoder(self.n_components).fit(collections)
            pairs = [(self.encoder_.contexts_[cs.collection_id], cs) for cs in collections]
        else:
            self.encoder_ = None
            pairs = [(None, cs) for cs in collections]
        data = make_training_set(pairs, self.window, self.n_components)
        self.generator_ = ContextualLSTMGenerator(**self._generator_params(),
                                                  use_context=self.use_context).fit(data)
        self.training_ids_ = [cs.collection_id for cs in collections]
        return self

    @property
    def threshold_(self) -> float | None:
        if self.distance_threshold is not None:
            return float(self.distance_threshold)
        return None if self.encoder_ is None else self.encoder_.threshold_

    @property
    def loss_history_(self):
        return self.generator_.loss_history_

    def context_of(self, cs: CollectionSeries):
        """Normalised context, distance to the nearest training context, its id."""
        check_is_fitted(self, "generator_")
        if self.encoder_ is None:
            return None, None, None
        ctx = self.encoder_.embed(cs)
        dist, nearest = self.encoder_.distance(ctx)
        return ctx, dist, nearest

    def project(self, cs: CollectionSeries, warn=True) -> Projection:
        """Generate days 91-364 for every token of ``cs`` (only its Q1 is read)."""
        check_is_fitted(self, "generator_")
        if cs.start_day != 0 or cs.n_days < Quarter.Q1.days:
            raise DataError(f"{cs.collection_id}: series must start at day 0 and cover Q1")
        q1 = slice_quarter(cs, Quarter.Q1)
        ctx, dist, nearest = self.context_of(q1)
        ood = dist is not None and dist > self.threshold_
        if ood and warn:
            warnings.warn(f"{cs.collection_id}: context distance {dist:.4f} to nearest training "
                          f"collection {nearest} exceeds threshold {self.threshold_:.4f}",
                          ContextDistanceWarning, stacklevel=2)
        seeds = q1.data[:, Quarter.Q1.days - self.window:]
        gen_ctx = None if ctx is None else np.broadcast_to(ctx, (q1.n_tokens, len(ctx)))
        raw = self.generator_.generate(seeds, gen_ctx, HORIZON) if q1.n_tokens \
            else np.zeros((0, HORIZON, 2))
        last = q1.data[:, -1]
        values, counts, n_clamped = step_transform_arrays(raw, last[:, 0], last[:, 1])
        stepped = np.stack([values, counts.astype(float)], axis=-1)
        return Projection(cs.collection_id,
                          assemble_projection(q1, raw, validate=False),
                          assemble_projection(q1, stepped),
                          ctx, dist, nearest, bool(ood), n_clamped)

    def predict(self, X, step=True):
        """Projected 365-day series for one collection or a list of them."""
        single = isinstance(X, CollectionSeries)
        out = [getattr(self.project(cs), "stepped" if step else "raw") for cs in _as_collection_list(X)]
        return out[0] if single else out

    # checkpoints
    def save(self, path) -> None:
        check_is_fitted(self, "generator_")
        if self.encoder_ is None:
            raise DataError("only context-conditioned projectors can be saved")
        config = {"kind": "projector", "params": self.get_params(),
                  "training_ids": list(self.training_ids_),
                  "loss_history": [float(x) for x in self.loss_history_]}
        enc = self.encoder_
        save_checkpoint(self.generator_.model_, enc.pca_, enc.norm_, enc.contexts_, config, path)

    @classmethod
    def load(cls, path) -> "NFTProjector":
        ckpt = load_checkpoint(path)
        params = dict(ckpt.config.get("params", {}))
        proj = cls(**params)
        proj.encoder_ = ContextEncoder.from_fitted(ckpt.pca, ckpt.norm, ckpt.contexts)
        proj.training_ids_ = list(ckpt.config.get("training_ids", ckpt.contexts))
        if ckpt.model is None:
            raise DataError(f"{path}: checkpoint holds no trained model")
        proj.generator_ = ContextualLSTMGenerator.from_model(
            ckpt.model, **{k: v for k, v in proj._generator_params().items() if k not in ("hidden", "dropout")},
            use_context=True)
        proj.generator_.loss_history_ = list(ckpt.config.get("loss_history", []))
        return proj
