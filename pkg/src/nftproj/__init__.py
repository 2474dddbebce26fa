"""Contextual generation of NFT collection transaction series."""
from .context import ContextEncoder, context_distance, embed_new, fit_pca, normalize_contexts
from .evaluation import EvalReport, run_evaluation
from .exceptions import ContextDistanceWarning, DataError, NFTProjError, NumericError
from .ingest import SaleEvent, load_events, write_events
from .metrics import Tier, abs_diff_pct, change_pct, quarter_stats, regression_stats, tier
from .nn import ContextualLSTMGenerator, TrainConfig
from .pipeline import NFTProjector, Projection
from .series import CollectionSeries, Quarter, build_series, read_series_csv, write_series_csv
from .synth import SynthSpec, generate_collection, make_benchmark_suite
from .transform import StepTransformer, step_transform

__version__ = "0.1.0"

__all__ = [
    "CollectionSeries", "ContextDistanceWarning", "ContextEncoder", "ContextualLSTMGenerator",
    "DataError", "EvalReport", "NFTProjError", "NFTProjector", "NumericError", "Projection",
    "Quarter", "SaleEvent", "StepTransformer", "SynthSpec", "Tier", "TrainConfig", "abs_diff_pct",
    "build_series", "change_pct", "context_distance", "embed_new", "fit_pca", "generate_collection",
    "load_events", "make_benchmark_suite", "normalize_contexts", "quarter_stats", "read_series_csv",
    "regression_stats", "run_evaluation", "step_transform", "tier", "write_events",
    "write_series_csv",
]
