"""Seeded synthetic NFT collections.

Randomness comes from numpy's PCG64 bit generator (``numpy.random.Generator``),
seeded per collection, so corpora are identical on every platform. Per token
the draws happen in a fixed order: one uniform for activity, one categorical
for the sale count, then sale days, second-of-day offsets and standard
normals for price noise. Prices never influence the draws, which makes the
generator exactly equivariant in ``initial_price_eth``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from decimal import Decimal

import numpy as np

from .exceptions import InvalidSpec
from .ingest import SaleEvent, _assign_seq, eth_to_wei
from .series import N_DAYS, SECONDS_PER_DAY, CollectionSeries, build_series

GWEI = 10**9
DEFAULT_INCEPTION = 1_619_136_000  # 2021-04-23 00:00 UTC


@dataclass(frozen=True)
class SynthSpec:
    n_tokens: int
    active_fraction: float
    count_distribution: dict
    initial_price_eth: str
    quarterly_drift: float = 1.0
    volatility: float = 0.0
    seed: int = 0
    inception_timestamp: int = DEFAULT_INCEPTION

    def __post_init__(self):
        if self.n_tokens < 1:
            raise InvalidSpec("n_tokens must be positive")
        if not 0.0 <= self.active_fraction <= 1.0:
            raise InvalidSpec("active_fraction must lie in [0, 1]")
        dist = {int(k): float(v) for k, v in self.count_distribution.items()}
        if not dist or any(k < 1 for k in dist):
            raise InvalidSpec("count_distribution keys must be sale counts >= 1")
        if any(p < 0 for p in dist.values()) or abs(sum(dist.values()) - 1.0) > 1e-9:
            raise InvalidSpec("count_distribution probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "count_distribution", dict(sorted(dist.items())))
        try:
            wei = eth_to_wei(str(self.initial_price_eth))
        except ValueError as exc:
            raise InvalidSpec(f"initial_price_eth: {exc}") from None
        if wei <= 0 or wei % GWEI:
            raise InvalidSpec("initial_price_eth must be positive with at most 9 decimals")
        object.__setattr__(self, "initial_price_eth", str(Decimal(str(self.initial_price_eth))))
        if not self.quarterly_drift > 0:
            raise InvalidSpec("quarterly_drift must be positive")
        if not self.volatility >= 0:
            raise InvalidSpec("volatility must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must be a 64-bit unsigned integer")

    @property
    def initial_price_gwei(self) -> int:
        return eth_to_wei(self.initial_price_eth) // GWEI

    def to_dict(self) -> dict:
        d = asdict(self)
        d["count_distribution"] = {str(k): v for k, v in self.count_distribution.items()}
        return d

    @classmethod
    def from_dict(cls, d) -> "SynthSpec":
        return cls(**d)


@dataclass
class SynthCorpus:
    collection_id: str
    spec: SynthSpec
    events: list
    truth: CollectionSeries
    counts: np.ndarray = field(repr=False)  # per-token sale counts as drawn


def generate_collection(spec: SynthSpec, collection_id: str) -> SynthCorpus:
    if not isinstance(spec, SynthSpec):
        raise InvalidSpec("spec must be a SynthSpec")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    keys = np.array(list(spec.count_distribution), dtype=np.int64)
    probs = np.array(list(spec.count_distribution.values()))
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    gwei = spec.initial_price_gwei

    raw = []
    drawn = np.zeros(spec.n_tokens, dtype=np.int64)
    for token in range(spec.n_tokens):
        u_active, u_count = rng.random(2)
        if u_active >= spec.active_fraction:
            continue
        k = int(keys[np.searchsorted(cum, u_count, side="right").clip(max=len(keys) - 1)])
        days = rng.integers(0, N_DAYS, size=k)
        secs = rng.integers(0, SECONDS_PER_DAY, size=k)
        noise = rng.standard_normal(k)
        quarter = np.minimum(days // 91, 3)
        factor = spec.quarterly_drift ** quarter * np.exp(spec.volatility * noise)
        multipliers = np.rint(factor * GWEI).astype(np.int64)
        drawn[token] = k
        for d, s, m in zip(days, secs, multipliers):
            ts = spec.inception_timestamp + int(d) * SECONDS_PER_DAY + int(s)
            raw.append((ts, collection_id, token, gwei * int(m)))
    events = _assign_seq(raw)
    truth = build_series(events, spec.inception_timestamp, range(spec.n_tokens), collection_id)
    return SynthCorpus(collection_id, spec, events, truth, drawn)


# Training corpora X1..X5 span the market-cap tiers; T6..T9 are near copies of
# specific training corpora; OOD is far from all of them.
_SUITE = [
    # id, role, twin, n_tokens, active, counts, price, drift, vol
    ("X1", "train", None, 64, 0.95, {2: 0.3, 3: 0.4, 4: 0.3}, "40", 2.0, 0.25),
    ("X2", "train", None, 64, 0.90, {2: 0.3, 3: 0.4, 4: 0.3}, "90", 1.05, 0.25),
    ("X3", "train", None, 64, 0.50, {1: 0.4, 2: 0.4, 3: 0.2}, "6", 1.2, 0.3),
    ("X4", "train", None, 64, 0.30, {1: 0.6, 2: 0.4}, "0.8", 1.6, 0.3),
    ("X5", "train", None, 64, 0.15, {1: 0.8, 2: 0.2}, "0.3", 1.1, 0.3),
    ("T6", "test", "X3", 64, 0.45, {1: 0.4, 2: 0.4, 3: 0.2}, "5", 1.15, 0.3),
    ("T7", "test", "X4", 64, 0.30, {1: 0.6, 2: 0.4}, "1", 1.5, 0.3),
    ("T8", "test", "X2", 64, 0.90, {2: 0.3, 3: 0.4, 4: 0.3}, "80", 1.1, 0.25),
    ("T9", "test", "X1", 64, 0.95, {2: 0.3, 3: 0.4, 4: 0.3}, "35", 1.9, 0.25),
    ("OOD", "ood", None, 64, 1.0, {8: 0.5, 12: 0.5}, "300", 0.1, 2.0),
]


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def suite_specs(seed: int) -> list[dict]:
    rows = []
    for index, (cid, role, twin, n, active, counts, price, drift, vol) in enumerate(_SUITE):
        spec = SynthSpec(n, active, counts, price, drift, vol, derive_seed(seed, index))
        rows.append({"collection_id": cid, "role": role, "twin": twin, "spec": spec})
    return rows


def make_benchmark_suite(seed: int) -> list[SynthCorpus]:
    """Five training corpora, four in-distribution test corpora, one outlier."""
    return [generate_collection(r["spec"], r["collection_id"]) for r in suite_specs(seed)]


def suite_roles(seed: int = 0) -> dict[str, str]:
    return {r["collection_id"]: r["role"] for r in suite_specs(seed)}


def suite_manifest(seed: int, tier_pattern=None) -> dict:
    entries = []
    for r in suite_specs(seed):
        entries.append({"collection_id": r["collection_id"], "role": r["role"], "twin": r["twin"],
                        "spec": r["spec"].to_dict()})
    manifest = {"suite_seed": seed, "seed_derivation": "SeedSequence([suite_seed, index]) -> uint64",
                "prng": "numpy PCG64", "collections": entries}
    if tier_pattern is not None:
        manifest["train_tier_pattern"] = list(tier_pattern)
    return manifest


def dump_manifest(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"
