"""Two-layer conditional LSTM with a linear head, forward and backward in numpy.

Gate weights of a layer are stored stacked as one ``(4H, I + H)`` matrix in
the order input, forget, output, candidate; ``W_i`` etc. are row views. Every
timestep multiplies ``[x_t, h_{t-1}]`` on the right.

Series features are divided by ``model.scale`` on the way in and multiplied
back on the way out; the loss is the mean squared error in scaled units.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import NonFinite, ShapeMismatch

N_FEATURES = 2
CONTEXT_DIM = 6


def sigmoid(x):
    out = np.negative(x)
    with np.errstate(over="ignore"):
        np.exp(out, out=out)
    out += 1.0
    return np.reciprocal(out, out=out)


@dataclass
class LstmLayerParams:
    W: np.ndarray  # (4H, I + H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.b.shape[0] // 4

    @property
    def input_dim(self) -> int:
        return self.W.shape[1] - self.hidden

    def _rows(self, k):
        h = self.hidden
        return slice(k * h, (k + 1) * h)

    W_i = property(lambda self: self.W[self._rows(0)])
    W_f = property(lambda self: self.W[self._rows(1)])
    W_o = property(lambda self: self.W[self._rows(2)])
    W_c = property(lambda self: self.W[self._rows(3)])
    b_i = property(lambda self: self.b[self._rows(0)])
    b_f = property(lambda self: self.b[self._rows(1)])
    b_o = property(lambda self: self.b[self._rows(2)])
    b_c = property(lambda self: self.b[self._rows(3)])

    @classmethod
    def from_gates(cls, W_i, W_f, W_o, W_c, b_i, b_f, b_o, b_c):
        return cls(np.vstack([W_i, W_f, W_o, W_c]).astype(float),
                   np.concatenate([b_i, b_f, b_o, b_c]).astype(float))


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray
    i: np.ndarray | None = None
    f: np.ndarray | None = None
    o: np.ndarray | None = None
    c_tilde: np.ndarray | None = None

    @classmethod
    def zeros(cls, hidden, batch=None):
        shape = (hidden,) if batch is None else (batch, hidden)
        return cls(np.zeros(shape), np.zeros(shape))


def lstm_cell_forward(params: LstmLayerParams, x_aug, state: LstmState) -> LstmState:
    """One LSTM step. ``x_aug`` may be a vector or a batch of row vectors."""
    x_aug = np.asarray(x_aug, dtype=float)
    if x_aug.shape[-1] != params.input_dim:
        raise ShapeMismatch(f"input has {x_aug.shape[-1]} features, layer expects {params.input_dim}")
    if state.h.shape[-1] != params.hidden or state.c.shape != state.h.shape:
        raise ShapeMismatch("state does not match layer hidden size")
    H = params.hidden
    z = np.concatenate([x_aug, state.h], axis=-1)
    a = z @ params.W.T + params.b
    i = sigmoid(a[..., :H])
    f = sigmoid(a[..., H:2 * H])
    o = sigmoid(a[..., 2 * H:3 * H])
    g = np.tanh(a[..., 3 * H:])
    c = f * state.c + i * g
    h = o * np.tanh(c)
    return LstmState(h, c, i, f, o, g)


@dataclass
class ModelParams:
    layer1: LstmLayerParams
    layer2: LstmLayerParams
    head_W: np.ndarray  # (2, H)
    head_b: np.ndarray  # (2,)
    scale: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))
    dropout: float = 0.2

    TRAINABLE = ("layer1.W", "layer1.b", "layer2.W", "layer2.b", "head_W", "head_b")

    @property
    def hidden(self) -> int:
        return self.layer1.hidden

    @property
    def context_dim(self) -> int:
        return self.layer1.input_dim - N_FEATURES

    def arrays(self) -> dict:
        return {"layer1.W": self.layer1.W, "layer1.b": self.layer1.b,
                "layer2.W": self.layer2.W, "layer2.b": self.layer2.b,
                "head_W": self.head_W, "head_b": self.head_b}

    def copy(self) -> "ModelParams":
        return ModelParams(LstmLayerParams(self.layer1.W.copy(), self.layer1.b.copy()),
                           LstmLayerParams(self.layer2.W.copy(), self.layer2.b.copy()),
                           self.head_W.copy(), self.head_b.copy(), self.scale.copy(), self.dropout)

    def zeros_like(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.arrays().items()}


def init_model(hidden: int = 300, context_dim: int = CONTEXT_DIM, dropout: float = 0.2,
               seed=0, scale=None) -> ModelParams:
    """Uniform(+-1/sqrt(fan_in)) weights, forget-gate bias +1, other biases 0."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def layer(input_dim):
        bound = 1.0 / np.sqrt(input_dim + hidden)
        W = rng.uniform(-bound, bound, size=(4 * hidden, input_dim + hidden))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        return LstmLayerParams(W, b)

    l1 = layer(context_dim + N_FEATURES)
    l2 = layer(hidden)
    bound = 1.0 / np.sqrt(hidden)
    head_W = rng.uniform(-bound, bound, size=(N_FEATURES, hidden))
    scale = np.ones(N_FEATURES) if scale is None else np.asarray(scale, dtype=float)
    return ModelParams(l1, l2, head_W, np.zeros(N_FEATURES), scale, dropout)


def zero_model(hidden: int, context_dim: int = CONTEXT_DIM, dropout: float = 0.0) -> ModelParams:
    m = init_model(hidden, context_dim, dropout, seed=0)
    for arr in m.arrays().values():
        arr[...] = 0.0
    return m


def _check_inputs(model, contexts, windows):
    contexts = np.asarray(contexts, dtype=float)
    windows = np.asarray(windows, dtype=float)
    if windows.ndim == 2:
        windows = windows[None]
    if contexts.ndim == 1:
        contexts = np.broadcast_to(contexts, (windows.shape[0], contexts.shape[0]))
    if windows.ndim != 3 or windows.shape[2] != N_FEATURES:
        raise ShapeMismatch(f"windows must be (batch, steps, {N_FEATURES}), got {windows.shape}")
    if contexts.shape != (windows.shape[0], model.context_dim):
        raise ShapeMismatch(f"contexts must be (batch, {model.context_dim}), got {contexts.shape}")
    return contexts, windows


def _layer_forward(layer: LstmLayerParams, inputs):
    """Run a layer over (T, B, I) inputs from a zero state; return h (T, B, H) and caches."""
    T, B, _ = inputs.shape
    H = layer.hidden
    hs = np.empty((T, B, H))
    cache = []
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    WT = layer.W.T
    for t in range(T):
        z = np.concatenate([inputs[t], h], axis=1)
        a = z @ WT + layer.b
        gates = np.empty_like(a)
        gates[:, :3 * H] = sigmoid(a[:, :3 * H])
        gates[:, 3 * H:] = np.tanh(a[:, 3 * H:])
        i, f, o, g = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:3 * H], gates[:, 3 * H:]
        c_prev = c
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[t] = h
        cache.append((z, gates, c_prev, tc))
    return hs, cache


def _layer_backward(layer: LstmLayerParams, dhs, cache, need_dx=True):
    """Backpropagate (T, B, H) upstream gradients on h through time."""
    T, B, H = dhs.shape
    I = layer.input_dim
    dW = np.zeros_like(layer.W)
    db = np.zeros_like(layer.b)
    dx = np.empty((T, B, I)) if need_dx else None
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    da = np.empty((B, 4 * H))
    for t in range(T - 1, -1, -1):
        z, gates, c_prev, tc = cache[t]
        i, f, o, g = gates[:, :H], gates[:, H:2 * H], gates[:, 2 * H:3 * H], gates[:, 3 * H:]
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        da[:, :H] = dc * g * i * (1.0 - i)
        da[:, H:2 * H] = dc * c_prev * f * (1.0 - f)
        da[:, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        da[:, 3 * H:] = dc * i * (1.0 - g * g)
        dW += da.T @ z
        db += da.sum(axis=0)
        dz = da @ layer.W
        if need_dx:
            dx[t] = dz[:, :I]
        dh_next = dz[:, I:]
        dc_next = dc * f
    return dW, db, dx


@dataclass
class Tape:
    contexts: np.ndarray
    inputs1: np.ndarray
    cache1: list
    cache2: list
    h1: np.ndarray
    mask12: np.ndarray | None
    mask_head: np.ndarray | None
    h_last: np.ndarray
    pred_scaled: np.ndarray


def _dropout_mask(rng, rate, shape):
    if rng is None or rate <= 0.0:
        return None
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def forward(model: ModelParams, contexts, windows, training: bool = False, rng=None):
    """Predict the day after each window.

    ``contexts`` is (B, 6) or a single 6-vector, ``windows`` is (B, T, 2) or
    (T, 2). Dropout (inverted, rate ``model.dropout``) applies between the
    layers and before the head only when ``training`` and an ``rng`` is given.
    Returns predictions in original units (B, 2) and the tape for backward.
    """
    contexts, windows = _check_inputs(model, contexts, windows)
    B, T, _ = windows.shape
    scaled = windows / model.scale
    inputs1 = np.concatenate([np.broadcast_to(contexts[None], (T, B, contexts.shape[1])),
                              scaled.transpose(1, 0, 2)], axis=2)
    h1, cache1 = _layer_forward(model.layer1, inputs1)
    use_rng = rng if training else None
    mask12 = _dropout_mask(use_rng, model.dropout, h1.shape)
    inputs2 = h1 if mask12 is None else h1 * mask12
    h2, cache2 = _layer_forward(model.layer2, inputs2)
    mask_head = _dropout_mask(use_rng, model.dropout, h2[-1].shape)
    h_last = h2[-1] if mask_head is None else h2[-1] * mask_head
    pred_scaled = h_last @ model.head_W.T + model.head_b
    tape = Tape(contexts, inputs1, cache1, cache2, h1, mask12, mask_head, h_last, pred_scaled)
    return pred_scaled * model.scale, tape


def backward(model: ModelParams, tape: Tape, dpred_scaled) -> dict:
    """Gradients of a scalar loss given its gradient w.r.t. the scaled predictions."""
    grads = {"head_W": dpred_scaled.T @ tape.h_last, "head_b": dpred_scaled.sum(axis=0)}
    dh_last = dpred_scaled @ model.head_W
    if tape.mask_head is not None:
        dh_last = dh_last * tape.mask_head
    T, B, H = tape.h1.shape
    dh2 = np.zeros((T, B, model.layer2.hidden))
    dh2[-1] = dh_last
    grads["layer2.W"], grads["layer2.b"], dx2 = _layer_backward(model.layer2, dh2, tape.cache2)
    if tape.mask12 is not None:
        dx2 = dx2 * tape.mask12
    grads["layer1.W"], grads["layer1.b"], _ = _layer_backward(model.layer1, dx2, tape.cache1, need_dx=False)
    return grads


def loss_and_grad(model: ModelParams, contexts, windows, targets, rng=None):
    """MSE over the batch and both output features, and its exact gradient.

    Dropout is active when ``rng`` is given (training mode).
    """
    targets = np.asarray(targets, dtype=float)
    pred, tape = forward(model, contexts, windows, training=rng is not None, rng=rng)
    if targets.shape != pred.shape:
        raise ShapeMismatch(f"targets must be {pred.shape}, got {targets.shape}")
    if targets.shape[0] == 0:
        raise ShapeMismatch("empty batch")
    diff = tape.pred_scaled - targets / model.scale
    loss = float(np.mean(diff * diff))
    grads = backward(model, tape, 2.0 * diff / diff.size)
    if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise NonFinite("loss or gradient is not finite")
    return loss, grads


def predict(model: ModelParams, contexts, windows) -> np.ndarray:
    return forward(model, contexts, windows, training=False)[0]
