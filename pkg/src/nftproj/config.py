"""Run configuration read from a JSON file; command-line flags override it."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .exceptions import DataError, IoError

# Hyper-parameters used by the benchmark evaluation; small enough for a laptop.
EVAL_PARAMS = {"hidden": 16, "epochs": 15, "samples_per_epoch": 8192, "batch_size": 1024}


@dataclass
class CollectionEntry:
    collection_id: str
    events: str
    inception_timestamp: int
    token_ids: list          # explicit ids, or [first, last] with token_range=True
    token_range: bool = False

    def tokens(self) -> list[int]:
        if self.token_range:
            first, last = self.token_ids
            return list(range(int(first), int(last) + 1))
        return [int(t) for t in self.token_ids]


@dataclass
class RunConfig:
    seed: int
    out_dir: str = "."
    suite_seed: int = 0
    train: dict = field(default_factory=dict)   # NFTProjector hyper-parameters
    distance_threshold: float | None = None
    collections: list = field(default_factory=list)

    def __post_init__(self):
        if self.seed is None:
            raise DataError("config needs an explicit seed")
        self.collections = [c if isinstance(c, CollectionEntry) else CollectionEntry(**c)
                            for c in self.collections]

    def check_paths(self, base: Path | None = None) -> None:
        base = base or Path(".")
        for c in self.collections:
            if not (base / c.events).is_file():
                raise IoError(f"events file not found: {base / c.events}")

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON config: {exc}") from None
    known = {f.name for f in fields(RunConfig)}
    unknown = set(raw) - known
    if unknown:
        raise DataError(f"{path}: unknown config keys {sorted(unknown)}")
    if "seed" not in raw:
        raise DataError(f"{path}: config needs an explicit seed")
    try:
        return RunConfig(**raw)
    except TypeError as exc:
        raise DataError(f"{path}: {exc}") from None
