"""Daily per-token transaction series.

A collection's first year is a ``(n_tokens, 365, 2)`` float array whose last
axis holds the carried last-sale value (ETH) and the cumulative sale count.
"""
from __future__ import annotations

import csv
import enum
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .exceptions import DataError, IoError, ParseError, UnknownToken

N_DAYS = 365
SECONDS_PER_DAY = 86400
VALUE, COUNT = 0, 1
SERIES_COLUMNS = ("token_id", "day", "value_eth", "count")


class Quarter(enum.Enum):
    Q1 = (0, 91)
    Q2 = (91, 182)
    Q3 = (182, 273)
    Q4 = (273, 365)

    @property
    def start(self) -> int:
        return self.value[0]

    @property
    def stop(self) -> int:
        return self.value[1]

    @property
    def days(self) -> int:
        return self.stop - self.start

    @classmethod
    def parse(cls, q) -> "Quarter":
        return q if isinstance(q, cls) else cls[str(q).upper()]


GROWTH_QUARTERS = (Quarter.Q2, Quarter.Q3, Quarter.Q4)


class DailyPoint(NamedTuple):
    value: float
    count: int


@dataclass
class TokenSeries:
    token_id: int
    values: np.ndarray
    counts: np.ndarray

    @property
    def points(self) -> list[DailyPoint]:
        return [DailyPoint(float(v), int(c)) for v, c in zip(self.values, self.counts)]


@dataclass
class CollectionSeries:
    """Per-token daily series for one collection.

    ``start_day`` is the day index (relative to inception) of ``data[:, 0]``;
    it is non-zero only for quarter slices.
    """

    collection_id: str
    token_ids: np.ndarray
    data: np.ndarray
    inception_timestamp: int = 0
    start_day: int = 0
    dropped_events: int = 0

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or self.data.shape[2] != 2:
            raise DataError(f"series data must be (tokens, days, 2), got {self.data.shape}")
        if self.data.shape[0] != len(self.token_ids):
            raise DataError("token_ids length does not match series data")

    @property
    def inception_day(self) -> int:
        return self.inception_timestamp // SECONDS_PER_DAY

    @property
    def n_tokens(self) -> int:
        return self.data.shape[0]

    @property
    def n_days(self) -> int:
        return self.data.shape[1]

    @property
    def values(self) -> np.ndarray:
        return self.data[:, :, VALUE]

    @property
    def counts(self) -> np.ndarray:
        return self.data[:, :, COUNT]

    @property
    def days(self) -> np.ndarray:
        return np.arange(self.start_day, self.start_day + self.n_days)

    def token(self, token_id) -> TokenSeries:
        (idx,) = np.nonzero(self.token_ids == token_id)
        if len(idx) == 0:
            raise UnknownToken(f"token {token_id} not in collection {self.collection_id}")
        i = idx[0]
        return TokenSeries(int(token_id), self.values[i].copy(), self.counts[i].astype(np.int64))

    def __iter__(self):
        for tid in self.token_ids:
            yield self.token(tid)

    def copy(self) -> "CollectionSeries":
        return CollectionSeries(self.collection_id, self.token_ids.copy(), self.data.copy(),
                                self.inception_timestamp, self.start_day, self.dropped_events)


def check_series_invariants(values, counts, *, atol=0.0) -> list[str]:
    """Return the list of violated invariants (empty when the series is valid).

    Works on one token (1-D arrays) or many (2-D, tokens by days).
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    counts = np.atleast_2d(np.asarray(counts, dtype=float))
    problems = []
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(counts))):
        problems.append("non-finite entries")
        return problems
    if np.any(counts < 0) or np.any(counts != np.round(counts)):
        problems.append("counts must be non-negative integers")
    if np.any(values < 0):
        problems.append("negative values")
    if np.any(np.diff(counts, axis=1) < 0):
        problems.append("count decreases")
    flat = np.diff(counts, axis=1) == 0
    if np.any(np.abs(np.diff(values, axis=1))[flat] > atol):
        problems.append("value changes without a sale")
    if np.any((counts == 0) & (values != 0)):
        problems.append("non-zero value before first sale")
    return problems


def build_series(events, inception_timestamp: int, token_ids, collection_id: str | None = None,
                 n_days: int = N_DAYS) -> CollectionSeries:
    """Turn sale events into per-token carried-value / cumulative-count series.

    Events on or after day ``n_days`` are dropped and counted in
    ``dropped_events``. Within a day the chronologically last sale (by
    timestamp, then seq) sets the value.
    """
    token_ids = np.asarray(list(token_ids), dtype=np.int64)
    index = {int(t): i for i, t in enumerate(token_ids)}
    if len(index) != len(token_ids):
        raise DataError("duplicate token ids")
    data = np.zeros((len(token_ids), n_days, 2))
    dropped = 0
    coll = collection_id
    for ev in sorted(events):
        if ev.timestamp < inception_timestamp:
            raise DataError(f"event at {ev.timestamp} precedes inception {inception_timestamp}")
        if ev.token_id not in index:
            raise UnknownToken(f"event references token {ev.token_id} outside the token list")
        if coll is None:
            coll = ev.collection_id
        day = (ev.timestamp - inception_timestamp) // SECONDS_PER_DAY
        if day >= n_days:
            dropped += 1
            continue
        row = data[index[ev.token_id]]
        row[day:, VALUE] = ev.price_wei / 10**18
        row[day:, COUNT] += 1
    return CollectionSeries(coll or "", token_ids, data,
                            inception_timestamp=inception_timestamp,
                            dropped_events=dropped)


def slice_quarter(cs: CollectionSeries, q) -> CollectionSeries:
    q = Quarter.parse(q)
    lo, hi = q.start - cs.start_day, q.stop - cs.start_day
    if lo < 0 or hi > cs.n_days:
        raise DataError(f"{q.name} (days {q.start}-{q.stop - 1}) outside the series frame")
    return CollectionSeries(cs.collection_id, cs.token_ids.copy(), cs.data[:, lo:hi].copy(),
                            cs.inception_timestamp, q.start, cs.dropped_events)


def concat_days(parts) -> CollectionSeries:
    parts = list(parts)
    first = parts[0]
    for a, b in zip(parts, parts[1:]):
        if b.start_day != a.start_day + a.n_days or not np.array_equal(a.token_ids, b.token_ids):
            raise DataError("series parts are not contiguous")
    return CollectionSeries(first.collection_id, first.token_ids.copy(),
                            np.concatenate([p.data for p in parts], axis=1),
                            first.inception_timestamp, first.start_day, first.dropped_events)


def tx_count_histogram(cs: CollectionSeries, horizon_days: int = N_DAYS) -> dict[int, int]:
    if not 1 <= horizon_days <= N_DAYS:
        raise ValueError("horizon_days must be in [1, 365]")
    col = horizon_days - 1 - cs.start_day
    if not 0 <= col < cs.n_days:
        raise DataError("horizon outside the series frame")
    final = cs.counts[:, col].astype(np.int64)
    return dict(sorted(Counter(int(c) for c in final).items()))


def write_series_csv(cs: CollectionSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SERIES_COLUMNS)
        days = cs.days
        for i, tid in enumerate(cs.token_ids):
            for j, day in enumerate(days):
                value, count = cs.data[i, j]
                cnt = int(count) if count == int(count) else repr(float(count))
                writer.writerow([int(tid), int(day), repr(float(value)), cnt])


def read_series_csv(path, collection_id: str | None = None) -> CollectionSeries:
    """Read the ``token_id,day,value_eth,count`` interchange format.

    Every token must cover the same contiguous day range.
    """
    path = Path(path)
    rows: dict[int, dict[int, tuple[float, float]]] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in SERIES_COLUMNS):
            raise ParseError(1, f"expected columns {','.join(SERIES_COLUMNS)}")
        for row in reader:
            try:
                tid, day = int(row["token_id"]), int(row["day"])
                point = (float(row["value_eth"]), float(row["count"]))
            except (TypeError, ValueError) as exc:
                raise ParseError(reader.line_num, str(exc)) from None
            rows.setdefault(tid, {})[day] = point
    if not rows:
        raise DataError(f"{path}: no series rows")
    token_ids = sorted(rows)
    all_days = sorted(rows[token_ids[0]])
    start = all_days[0]
    n_days = len(all_days)
    if all_days != list(range(start, start + n_days)):
        raise DataError(f"{path}: day indices are not contiguous")
    data = np.zeros((len(token_ids), n_days, 2))
    for i, tid in enumerate(token_ids):
        if sorted(rows[tid]) != all_days:
            raise DataError(f"{path}: token {tid} does not share the day frame")
        for day, point in rows[tid].items():
            data[i, day - start] = point
    return CollectionSeries(collection_id or path.stem, token_ids, data, start_day=start)
