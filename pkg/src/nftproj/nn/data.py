"""Sliding-window training examples drawn lazily from series arrays."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DataError, SeriesTooShort

WINDOW = 20


@dataclass
class TrainingSet:
    """All (context, window, next-day target) examples of a set of collections.

    Examples are not materialised: ``series`` holds every token's
    ``(days, 2)`` array, and example ``k`` is token ``index[k, 0]`` with
    target day ``index[k, 1]``.
    """

    contexts: np.ndarray  # (n_tokens, context_dim)
    series: np.ndarray  # (n_tokens, n_days, 2)
    index: np.ndarray  # (n_examples, 2)
    window: int = WINDOW

    def __len__(self) -> int:
        return len(self.index)

    def batch(self, rows):
        rows = np.asarray(rows)
        tok = self.index[rows, 0]
        day = self.index[rows, 1]
        offsets = np.arange(-self.window, 0)
        windows = self.series[tok[:, None], day[:, None] + offsets]
        return self.contexts[tok], windows, self.series[tok, day]

    def __getitem__(self, k):
        ctx, win, tgt = self.batch([k])
        return ctx[0], win[0], tgt[0]

    def feature_scale(self) -> np.ndarray:
        """Per-feature max |value| over the data (1 where a feature is all zero)."""
        peak = np.abs(self.series).max(axis=(0, 1)) if self.series.size else np.zeros(2)
        return np.where(peak > 0, peak, 1.0)


def make_training_set(collections, window: int = WINDOW, context_dim: int = 6) -> TrainingSet:
    """Build the training set from ``(context, CollectionSeries)`` pairs.

    A context of ``None`` stands for an unconditional model (zero context).
    Every day ``d`` with ``window <= d < n_days`` of every token is a target.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    ctxs, series = [], []
    for ctx, cs in collections:
        if cs.n_days < window + 1:
            raise SeriesTooShort(f"{cs.collection_id}: {cs.n_days} days < window + 1 = {window + 1}")
        c = np.zeros(context_dim) if ctx is None else np.asarray(ctx, dtype=float)
        if c.shape != (context_dim,):
            raise DataError(f"context must have {context_dim} entries")
        ctxs.append(np.broadcast_to(c, (cs.n_tokens, context_dim)))
        series.append(cs.data)
    if not series:
        raise DataError("no collections given")
    n_days = series[0].shape[1]
    if any(s.shape[1] != n_days for s in series):
        raise DataError("collections must share the day frame")
    data = np.concatenate(series, axis=0)
    n_tokens = data.shape[0]
    tok, day = np.meshgrid(np.arange(n_tokens), np.arange(window, n_days), indexing="ij")
    index = np.stack([tok.ravel(), day.ravel()], axis=1)
    return TrainingSet(np.concatenate(ctxs, axis=0), data, index, window)
