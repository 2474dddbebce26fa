"""Step-transform of smooth generated series into piecewise-constant ones."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DataError, LengthMismatch, NonFinite, TokenSetMismatch
from .series import N_DAYS, CollectionSeries, DailyPoint, Quarter, check_series_invariants


def round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def step_transform_arrays(raw, last_value, last_count):
    """Vectorised step-transform.

    ``raw`` is ``(..., horizon, 2)``; ``last_value`` / ``last_count`` hold the
    last observed point per series (shape ``raw.shape[:-2]``). Returns
    ``(values, counts, n_clamped)`` where ``n_clamped`` counts negative
    generated values that became plateau values and were clamped to 0.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != 2:
        raise DataError("raw generation must have (value, count) in the last axis")
    if not np.all(np.isfinite(raw)):
        raise NonFinite("raw generation contains NaN or infinity")
    last_value = np.asarray(last_value, dtype=float)
    last_count = np.asarray(last_count, dtype=float)
    horizon = raw.shape[-2]
    counts = np.maximum(round_half_away(raw[..., 1]), last_count[..., None])
    counts = np.maximum.accumulate(counts, axis=-1)
    prev = np.concatenate([last_count[..., None], counts[..., :-1]], axis=-1)
    starts = counts > prev
    gen_values = raw[..., 0]
    n_clamped = int(np.count_nonzero(starts & (gen_values < 0)))
    plateau = np.where(starts, np.maximum(gen_values, 0.0), np.nan)
    # carry each plateau value forward; days before the first start keep last_value
    idx = np.where(starts, np.arange(horizon), -1)
    idx = np.maximum.accumulate(idx, axis=-1)
    filled = np.take_along_axis(np.nan_to_num(plateau), np.maximum(idx, 0), axis=-1)
    values = np.where(idx >= 0, filled, last_value[..., None])
    return values, counts.astype(np.int64), n_clamped


def step_transform(raw, last_observed: DailyPoint) -> list[DailyPoint]:
    """Turn one token's ``(horizon, 2)`` generation into daily points.

    Counts are rounded half away from zero and forced non-decreasing from
    ``last_observed.count``; each count increase opens a plateau at that
    day's generated value (clamped at 0), which is carried until the next.
    """
    last_value, last_count = float(last_observed[0]), int(last_observed[1])
    if last_count < 0 or last_value < 0 or (last_count == 0 and last_value != 0):
        raise DataError(f"invalid last observed point {tuple(last_observed)}")
    raw = np.asarray(raw, dtype=float).reshape(-1, 2)
    values, counts, _ = step_transform_arrays(raw, np.array(last_value), np.array(last_count))
    return [DailyPoint(float(v), int(c)) for v, c in zip(values, counts)]


class StepTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer form of :func:`step_transform_arrays`.

    ``transform(raw, last)`` takes ``raw`` of shape ``(n_tokens, horizon, 2)``
    and ``last`` of shape ``(n_tokens, 2)``; it returns the stepped
    ``(n_tokens, horizon, 2)`` array and records ``n_clamped_``.
    """

    def fit(self, X=None, y=None):
        return self

    def transform(self, X, last=None):
        X = np.asarray(X, dtype=float)
        if last is None:
            last = np.zeros(X.shape[:-2] + (2,))
        last = np.asarray(last, dtype=float)
        values, counts, self.n_clamped_ = step_transform_arrays(X, last[..., 0], last[..., 1])
        return np.stack([values, counts.astype(float)], axis=-1)

    def fit_transform(self, X, y=None, last=None):
        return self.fit(X).transform(X, last)


def assemble_projection(q1: CollectionSeries, generated, token_ids=None, validate=True) -> CollectionSeries:
    """Join observed Q1 with generated Q2-Q4 into a 365-day series.

    ``generated`` is an ``(n_tokens, 274, 2)`` array aligned with
    ``token_ids`` (default: ``q1.token_ids``) or a mapping from token id to a
    list of daily points.
    """
    horizon = N_DAYS - Quarter.Q1.days
    if q1.start_day != 0 or q1.n_days < Quarter.Q1.days:
        raise DataError("q1 must start at day 0 and cover the first quarter")
    if isinstance(generated, dict):
        token_ids = list(generated)
        generated = [np.asarray(generated[t], dtype=float).reshape(-1, 2) for t in token_ids]
        if any(g.shape[0] != horizon for g in generated):
            raise LengthMismatch(f"each token needs {horizon} generated days")
        generated = np.stack(generated) if generated else np.zeros((0, horizon, 2))
    generated = np.asarray(generated, dtype=float)
    ids = q1.token_ids if token_ids is None else np.asarray(token_ids, dtype=np.int64)
    if sorted(map(int, ids)) != sorted(map(int, q1.token_ids)) or len(ids) != q1.n_tokens:
        raise TokenSetMismatch("generated tokens do not match the observed collection")
    if generated.ndim != 3 or generated.shape[1:] != (horizon, 2) or generated.shape[0] != len(ids):
        raise LengthMismatch(f"expected generated shape ({len(ids)}, {horizon}, 2), got {generated.shape}")
    order = {int(t): i for i, t in enumerate(ids)}
    aligned = generated[[order[int(t)] for t in q1.token_ids]]
    data = np.concatenate([q1.data[:, :Quarter.Q1.days], aligned], axis=1)
    out = CollectionSeries(q1.collection_id, q1.token_ids.copy(), data, q1.inception_timestamp)
    if validate:
        problems = check_series_invariants(out.values, out.counts)
        if problems:
            raise DataError(f"projection violates series invariants: {', '.join(problems)}")
    return out
