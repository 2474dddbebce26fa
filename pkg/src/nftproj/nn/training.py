"""Mini-batch training and autoregressive generation."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from ..exceptions import NonFinite
from .data import WINDOW, TrainingSet
from .lstm import ModelParams, _check_inputs, init_model, loss_and_grad, predict
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 1024
    window: int = WINDOW
    hidden: int = 300
    dropout: float = 0.2
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    scale: str | None = "max"
    samples_per_epoch: int | None = None

    def __post_init__(self):
        if self.window < 1 or self.batch_size < 1:
            raise ValueError("window and batch_size must be >= 1")
        if self.epochs < 0 or self.hidden < 1:
            raise ValueError("epochs must be >= 0 and hidden >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.samples_per_epoch is not None and self.samples_per_epoch < 1:
            raise ValueError("samples_per_epoch must be positive")
        if self.scale not in (None, "max"):
            raise ValueError("scale must be None or 'max'")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


def _rngs(seed):
    init_ss, shuffle_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(shuffle_ss)


def train(config: TrainConfig, data: TrainingSet, model: ModelParams | None = None):
    """Train with Adam on shuffled mini-batches; returns ``(model, loss_history)``.

    The history holds the example-weighted mean training loss of each epoch.
    The final partial batch of an epoch is kept. With ``samples_per_epoch``
    each epoch visits only the first that many examples of its shuffle.
    """
    if len(data) == 0:
        raise ValueError("training set is empty")
    init_rng, rng = _rngs(config.seed)
    if model is None:
        scale = data.feature_scale() if config.scale == "max" else None
        model = init_model(config.hidden, data.contexts.shape[1], config.dropout, init_rng, scale)
    state = AdamState.for_model(model)
    history = []
    n = len(data)
    if config.samples_per_epoch is not None:
        n = min(n, config.samples_per_epoch)
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))[:n]
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            rows = order[start:start + config.batch_size]
            ctx, win, tgt = data.batch(rows)
            try:
                loss, grads = loss_and_grad(model, ctx, win, tgt, rng=rng)
            except NonFinite as exc:
                raise NonFinite(f"epoch {epoch} batch {b}: {exc}") from None
            adam_step(model, grads, state, config.lr, config.beta1, config.beta2, config.eps)
            total += loss * len(rows)
        history.append(total / n)
        logger.debug("epoch %d loss %.6g", epoch, history[-1])
    return model, history


def generate(model: ModelParams, context, seed_window, horizon: int) -> np.ndarray:
    """Roll the model forward ``horizon`` days from ``seed_window``.

    Each prediction is appended to the window and the oldest day dropped.
    Accepts one token ``(T, 2)`` or a batch ``(B, T, 2)``; returns
    ``(horizon, 2)`` or ``(B, horizon, 2)`` accordingly.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    single = np.ndim(seed_window) == 2
    ctx, window = _check_inputs(model, context, seed_window)
    window = window.copy()
    out = np.empty((window.shape[0], horizon, window.shape[2]))
    for step in range(horizon):
        nxt = predict(model, ctx, window)
        if not np.all(np.isfinite(nxt)):
            raise NonFinite(f"non-finite generation at step {step}")
        out[:, step] = nxt
        window = np.concatenate([window[:, 1:], nxt[:, None]], axis=1)
    return out[0] if single else out
