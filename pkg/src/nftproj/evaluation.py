"""Baseline comparison harness and per-day summary reports."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContextDistanceWarning, DataError, IoError
from .metrics import RegressionStats, Tier, abs_diff_pct, market_caps, regression_stats, tier
from .pipeline import NFTProjector
from .series import N_DAYS, CollectionSeries, Quarter
from .synth import derive_seed

MX = "M_X"
CONTEXT_PRED = "ContextPred"
NFT_CONTEXT_PRED = "NFT ContextPred"
ACTUAL = "Actual"
REPORT_COLUMNS = ("collection", "model", "mae", "mse", "rmse", "r2", "q1", "q2", "q3", "q4", "tier")


def baseline_label(i: int) -> str:
    return f"M_{i}"


@dataclass
class EvalRow:
    collection: str
    model: str
    stats: RegressionStats
    cap_diff: dict            # Quarter -> |y - y_hat| / y (NaN when the actual cap is 0)
    projected_caps: dict      # Quarter -> ETH
    predicted_tier: Tier

    @property
    def growth_cap_diff(self) -> float:
        """Mean abs-diff ratio over Q2-Q4."""
        vals = [self.cap_diff[q] for q in (Quarter.Q2, Quarter.Q3, Quarter.Q4)]
        return float(np.mean(vals))


@dataclass
class CollectionDiagnostics:
    actual_caps: dict
    actual_tier: Tier
    context: np.ndarray | None = None
    distance: float | None = None
    nearest: str | None = None
    out_of_distribution: bool = False
    n_clamped: int = 0


@dataclass
class EvalReport:
    labels: list
    rows: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)   # collection -> CollectionDiagnostics
    threshold: float | None = None
    actual: dict = field(default_factory=dict, repr=False)      # collection -> CollectionSeries (y)
    projected: dict = field(default_factory=dict, repr=False)   # (collection, label) -> CollectionSeries (y_hat)

    def row(self, collection: str, model: str) -> EvalRow:
        for r in self.rows:
            if r.collection == collection and r.model == model:
                return r
        raise KeyError((collection, model))

    @property
    def collections(self) -> list:
        return list(self.diagnostics)

    def to_rows(self, include_actual=True) -> list[list]:
        out = []
        for cid in self.collections:
            diag = self.diagnostics[cid]
            if include_actual:
                out.append([cid, ACTUAL, "", "", "", "", "", "", "", "", int(diag.actual_tier)])
            for r in (r for r in self.rows if r.collection == cid):
                s = r.stats
                out.append([cid, r.model, _fmt(s.mae), _fmt(s.mse), _fmt(s.rmse), _fmt(s.r2)]
                           + [_fmt(r.cap_diff[q]) for q in Quarter] + [int(r.predicted_tier)])
        return out

    def to_csv(self, path, include_actual=True) -> None:
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(REPORT_COLUMNS)
                writer.writerows(self.to_rows(include_actual))
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc

    def diagnostics_rows(self) -> list[list]:
        rows = []
        for cid, d in self.diagnostics.items():
            ctx_diff = self.row(cid, CONTEXT_PRED).growth_cap_diff if self.labels else math.nan
            rows.append([cid, _fmt(d.distance), d.nearest or "", _fmt(self.threshold),
                         int(d.out_of_distribution), _fmt(ctx_diff), d.n_clamped])
        return rows

    def diagnostics_csv(self, path) -> None:
        try:
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["collection", "distance", "nearest", "threshold", "warning",
                                 "context_pred_cap_diff_q234", "n_clamped"])
                writer.writerows(self.diagnostics_rows())
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _cap_diffs(actual_caps, projected_caps) -> dict:
    out = {}
    for q in Quarter:
        y = actual_caps[q]
        out[q] = 0.0 if q is Quarter.Q1 else (abs_diff_pct(y, projected_caps[q]) if y > 0 else math.nan)
    return out


def _row(cid, label, actual, projected, actual_caps) -> EvalRow:
    caps = market_caps(projected)
    stats = regression_stats(actual, projected, on_degenerate="nan")
    return EvalRow(cid, label, stats, _cap_diffs(actual_caps, caps), caps,
                   tier(max(caps[Quarter.Q4], 0.0)))


def _split_train(train) -> list[CollectionSeries]:
    out = []
    for item in train:
        cs = item if isinstance(item, CollectionSeries) else item[1]
        out.append(cs)
    return out


def run_evaluation(train, test, params: dict | None = None, seed: int = 0,
                   contextual: NFTProjector | None = None, baselines: dict | None = None) -> EvalReport:
    """Train the baselines and the contextual model, then score every test collection.

    ``train`` is a list of full-year :class:`CollectionSeries` (or
    ``(context, series)`` pairs, whose contexts are refitted). ``params`` are
    :class:`NFTProjector` hyper-parameters shared by every model; model ``k``
    trains with seed ``derive_seed(seed, k)`` (``M_1..M_m`` are ``1..m``,
    ``M_X`` is ``m+1``, the contextual model ``0``). A pre-fitted
    ``contextual`` projector or ``baselines`` mapping ``label -> projector``
    skips the corresponding training.
    """
    train = _split_train(train)
    test = list(test)
    if not train or not test:
        raise DataError("evaluation needs at least one training and one test collection")
    for cs in test:
        if cs.start_day != 0 or cs.n_days != N_DAYS:
            raise DataError(f"{cs.collection_id}: test series must cover days 0-{N_DAYS - 1}")
    params = dict(params or {})
    params.pop("seed", None)
    params.pop("use_context", None)
    m = len(train)
    baselines = dict(baselines or {})
    for i, cs in enumerate(train, start=1):
        label = baseline_label(i)
        if label not in baselines:
            baselines[label] = NFTProjector(use_context=False, seed=derive_seed(seed, i), **params).fit([cs])
    if MX not in baselines:
        baselines[MX] = NFTProjector(use_context=False, seed=derive_seed(seed, m + 1), **params).fit(train)
    if contextual is None:
        contextual = NFTProjector(use_context=True, seed=derive_seed(seed, 0), **params).fit(train)

    labels = [baseline_label(i) for i in range(1, m + 1)] + [MX, CONTEXT_PRED, NFT_CONTEXT_PRED]
    report = EvalReport(labels, threshold=contextual.threshold_)
    for cs in test:
        cid = cs.collection_id
        actual_caps = market_caps(cs)
        report.actual[cid] = cs
        for label in labels[:m + 1]:
            projected = baselines[label].project(cs, warn=False).raw
            report.projected[(cid, label)] = projected
            report.rows.append(_row(cid, label, cs, projected, actual_caps))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ContextDistanceWarning)
            proj = contextual.project(cs)
        for w in caught:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        for label, projected in ((CONTEXT_PRED, proj.raw), (NFT_CONTEXT_PRED, proj.stepped)):
            report.projected[(cid, label)] = projected
            report.rows.append(_row(cid, label, cs, projected, actual_caps))
        report.diagnostics[cid] = CollectionDiagnostics(
            actual_caps, tier(actual_caps[Quarter.Q4]), proj.context, proj.distance, proj.nearest,
            proj.out_of_distribution, proj.n_clamped)
    return report


def daily_mean_variance(cs: CollectionSeries) -> np.ndarray:
    """Per-day mean and (population) variance across tokens of value and count.

    Returns ``(n_days, 5)``: day, value mean, value variance, count mean, count variance.
    """
    if cs.n_tokens == 0:
        raise DataError(f"{cs.collection_id}: no tokens")
    return np.column_stack([cs.days, cs.values.mean(axis=0), cs.values.var(axis=0),
                            cs.counts.mean(axis=0), cs.counts.var(axis=0)])


def write_mean_variance_csv(series: dict, path) -> None:
    """``series`` maps a label (e.g. ``actual``, ``generated``) to a CollectionSeries."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["series", "day", "value_mean", "value_var", "count_mean", "count_var"])
            for label, cs in series.items():
                for day, vm, vv, cm, cv in daily_mean_variance(cs):
                    writer.writerow([label, int(day), repr(float(vm)), repr(float(vv)),
                                     repr(float(cm)), repr(float(cv))])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_token_steps_csv(series: dict, token_ids, path) -> None:
    """Daily (value, count) of selected tokens under each labelled series."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["series", "token_id", "day", "value_eth", "count"])
            for label, cs in series.items():
                for tid in token_ids:
                    ts = cs.token(tid)
                    for day, v, c in zip(cs.days, ts.values, ts.counts):
                        writer.writerow([label, int(tid), int(day), repr(float(v)), int(c)])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
