"""scikit-learn style wrapper around the conditional LSTM."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_contexts, check_windows
from .data import TrainingSet
from .lstm import predict
from .training import TrainConfig, generate, train


class ContextualLSTMGenerator(RegressorMixin, BaseEstimator):
    """Next-day (value, count) regressor conditioned on a collection context.

    ``fit`` takes a :class:`TrainingSet`. With ``use_context=False`` every
    context is replaced by zeros, giving the unconditional baseline.
    """

    def __init__(self, hidden=300, window=20, epochs=50, batch_size=1024, dropout=0.2,
                 lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, seed=0, scale="max", samples_per_epoch=None,
                 use_context=True):
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
        self.use_context = use_context

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.get_params())

    def fit(self, X: TrainingSet, y=None):
        if not isinstance(X, TrainingSet):
            raise TypeError("fit expects a TrainingSet")
        if X.window != self.window:
            raise ValueError(f"training set window {X.window} != estimator window {self.window}")
        if not self.use_context:
            X = TrainingSet(np.zeros_like(X.contexts), X.series, X.index, X.window)
        self.model_, self.loss_history_ = train(self.train_config(), X)
        return self

    def _contexts(self, contexts, n):
        contexts = check_contexts(contexts, n, self.model_.context_dim)
        return contexts if self.use_context else np.zeros_like(contexts)

    def predict(self, windows, contexts=None):
        check_is_fitted(self, "model_")
        windows = check_windows(windows, self.window)
        return predict(self.model_, self._contexts(contexts, len(windows)), windows)

    def generate(self, seed_windows, contexts=None, horizon=274):
        check_is_fitted(self, "model_")
        windows = check_windows(seed_windows, self.window)
        return generate(self.model_, self._contexts(contexts, len(windows)), windows, horizon)

    @classmethod
    def from_model(cls, model, **params):
        est = cls(hidden=model.hidden, dropout=model.dropout, **params)
        est.model_ = model
        est.loss_history_ = []
        return est
