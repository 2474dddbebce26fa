import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nftproj.exceptions import DataError, DegenerateVariance, ZeroActual
from nftproj.ingest import SaleEvent, _assign_seq
from nftproj.metrics import (Tier, abs_diff_pct, change_pct, market_caps, quarter_stats,
                             regression_stats, tier)
from nftproj.series import SECONDS_PER_DAY, CollectionSeries, Quarter, build_series

T0 = 1_619_136_000
ETH = 10**18


def _events(rows):
    return _assign_seq([(T0 + d * SECONDS_PER_DAY, "c", tok, int(round(p * 1e9)) * 10**9) for d, tok, p in rows])


class TestQuarterStats:
    def test_two_token_cap(self):
        events = _events([(10, 0, 1.0), (50, 0, 3.0), (20, 1, 5.0)])
        cs = build_series(events, T0, [0, 1])
        s = quarter_stats(cs, events, Quarter.Q1)
        assert s.market_cap == 8.0
        assert (s.high, s.low, s.mean) == (5.0, 1.0, 3.0)
        assert s.change_pct is None

    def test_series_route_matches_event_route(self):
        events = _events([(10, 0, 1.0), (100, 0, 3.0), (120, 1, 5.0), (300, 2, 0.5)])
        cs = build_series(events, T0, [0, 1, 2])
        for q in Quarter:
            a, b = quarter_stats(cs, events, q), quarter_stats(cs, [], q)
            assert a.market_cap == pytest.approx(b.market_cap)
            assert (a.high, a.low) == pytest.approx((b.high, b.low))

    def test_all_zero(self):
        cs = build_series([], T0, [0, 1], "z")
        s = quarter_stats(cs, [], Quarter.Q3)
        assert (s.market_cap, s.high, s.low, s.mean) == (0.0, 0.0, 0.0, 0.0)

    def test_change_against_previous(self):
        events = _events([(10, 0, 2.0), (100, 0, 3.0)])
        cs = build_series(events, T0, [0])
        caps = market_caps(cs, events)
        s = quarter_stats(cs, events, Quarter.Q2, prev_cap=caps[Quarter.Q1])
        assert s.change_pct == pytest.approx(50.0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 364), st.integers(0, 5), st.floats(0.001, 100)), max_size=25),
           st.integers(1, 9))
    def test_additive_and_equivariant(self, rows, k):
        events = _events(rows)
        cs = build_series(events, T0, range(6))
        left = [e for e in events if e.token_id < 3]
        right = [e for e in events if e.token_id >= 3]
        scaled = [SaleEvent(e.timestamp, e.seq, e.collection_id, e.token_id, e.price_wei * k) for e in events]
        for q in Quarter:
            whole = quarter_stats(cs, events, q)
            a = quarter_stats(build_series(left, T0, range(3)), left, q)
            b = quarter_stats(build_series(right, T0, range(3, 6)), right, q)
            assert whole.market_cap == pytest.approx(a.market_cap + b.market_cap, rel=1e-12, abs=1e-12)
            s = quarter_stats(build_series(scaled, T0, range(6)), scaled, q)
            assert s.market_cap == pytest.approx(k * whole.market_cap, rel=1e-12, abs=1e-12)
            assert (s.high, s.low, s.mean) == pytest.approx((k * whole.high, k * whole.low, k * whole.mean))
            if whole.high:
                assert whole.low <= whole.mean <= whole.high


class TestTier:
    def test_listed_caps(self):
        assert tier(24252.51) is Tier.Tier1
        assert tier(3123.25) is Tier.Tier2
        assert tier(1251.49) is Tier.Tier3
        assert tier(0) is Tier.Tier3

    def test_boundaries(self):
        assert tier(15000) is Tier.Tier2
        assert tier(15000.01) is Tier.Tier1
        assert tier(2000) is Tier.Tier3

    def test_negative(self):
        with pytest.raises(ValueError):
            tier(-1)


class TestChange:
    def test_listed_growth(self):
        caps = [24252.51, 117718.68, 196391.34, 307509.66]
        got = [change_pct(b, a) for a, b in zip(caps, caps[1:])]
        np.testing.assert_allclose(got, [385.39, 66.83, 56.58], atol=0.01)

    def test_zero_previous(self):
        assert change_pct(5.0, 0.0) is None


def _series(values):
    values = np.asarray(values, dtype=float)
    counts = (values > 0).astype(float)
    return CollectionSeries("c", np.arange(values.shape[0]), np.stack([values, counts], -1))


class TestRegression:
    def test_hand_values(self):
        # three tokens held at 1, 2, 3 through Q2-Q4 against a projection of 1
        actual = _series(np.repeat([[1.0], [2.0], [3.0]], 365, axis=1))
        projected = _series(np.ones((3, 365)))
        s = regression_stats(actual, projected)
        assert s.mae == pytest.approx(1.0)
        assert s.mse == pytest.approx(5 / 3)
        assert s.rmse == pytest.approx(math.sqrt(5 / 3))
        assert s.r2 == pytest.approx(-1.5)

    def test_perfect_and_mean(self):
        rng = np.random.default_rng(0)
        a = _series(rng.uniform(1, 5, (4, 365)))
        s = regression_stats(a, a)
        assert (s.mae, s.mse, s.rmse, s.r2) == (0.0, 0.0, 0.0, 1.0)
        cols = np.arange(91, 365)
        mean = _series(np.full((4, 365), a.values[:, cols].mean()))
        assert regression_stats(a, mean).r2 == pytest.approx(0.0, abs=1e-12)

    def test_rmse_squared_is_mse(self):
        rng = np.random.default_rng(1)
        s = regression_stats(_series(rng.uniform(0, 9, (3, 365))), _series(rng.uniform(0, 9, (3, 365))))
        assert abs(s.rmse**2 - s.mse) <= 1e-9 * max(1.0, s.mse)

    def test_degenerate(self):
        a = _series(np.ones((2, 365)))
        with pytest.raises(DegenerateVariance):
            regression_stats(a, a)
        assert math.isnan(regression_stats(a, a, on_degenerate="nan").r2)

    def test_frame_mismatch(self):
        with pytest.raises(DataError):
            regression_stats(_series(np.ones((2, 365))), _series(np.ones((3, 365))))


class TestAbsDiff:
    def test_examples(self):
        assert abs_diff_pct(100, 72) == pytest.approx(0.28)
        assert abs_diff_pct(5, 5) == 0.0

    def test_zero_actual(self):
        with pytest.raises(ZeroActual):
            abs_diff_pct(0, 1)
