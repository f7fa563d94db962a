"""Two-layer LSTM with a sigmoid read-out on the last step, trained with
half-mean-squared error and hand-written backpropagation through time.

Gate layout inside the stacked weight matrices is ``[i, f, o, g]``::

    a = W_x x_t + W_h h_{t-1} + b
    i, f, o = sigmoid(a_i), sigmoid(a_f), sigmoid(a_o)
    g = tanh(a_g)
    c_t = f * c_{t-1} + i * g
    h_t = o * tanh(c_t)

Batches are right-padded with zero vectors; each sequence is read out at its
own last real step, so padded steps never reach the loss and receive exactly
zero gradient.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, TrainingError, UsageError
from .fusion import FeatureSequence
from .nn import DTYPE, Dense, Param, contract, glorot, half_mse, make_optimizer, sigmoid
from .rng import Rng

log = logging.getLogger(__name__)

FORGET_BIAS = 1.0


class LSTMLayer:
    def __init__(self, input_size: int, hidden: int, rng: Rng | None = None,
                 name: str = "lstm", dtype=DTYPE):
        H = hidden
        if rng is not None:
            Wx = np.concatenate([glorot(rng, H, input_size, dtype) for _ in range(4)])
            Wh = np.concatenate([glorot(rng, H, H, dtype) for _ in range(4)])
        else:
            Wx = np.zeros((4 * H, input_size), dtype)
            Wh = np.zeros((4 * H, H), dtype)
        b = np.zeros(4 * H, dtype)
        if rng is not None:
            b[H:2 * H] = FORGET_BIAS
        self.Wx = Param(f"{name}.Wx", Wx)
        self.Wh = Param(f"{name}.Wh", Wh)
        self.b = Param(f"{name}.b", b)

    @property
    def input_size(self) -> int:
        return self.Wx.value.shape[1]

    @property
    def hidden(self) -> int:
        return self.Wh.value.shape[1]

    def params(self) -> list[Param]:
        return [self.Wx, self.Wh, self.b]

    def forward(self, X: np.ndarray):
        """X: (B, T, D) -> hidden states (B, T, H) and a cache for backward."""
        B, T, _ = X.shape
        H = self.hidden
        dt = self.Wx.value.dtype
        ax = contract(X, self.Wx.value) + self.b.value
        h = np.zeros((B, H), dt)
        c = np.zeros((B, H), dt)
        hs = np.zeros((B, T, H), dt)
        cs = np.zeros((B, T + 1, H), dt)
        gates = np.zeros((B, T, 4 * H), dt)
        tcs = np.zeros((B, T, H), dt)
        for t in range(T):
            a = ax[:, t] + contract(h, self.Wh.value)
            ifo = sigmoid(a[:, :3 * H])
            g = np.tanh(a[:, 3 * H:])
            c = ifo[:, H:2 * H] * c + ifo[:, :H] * g
            tc = np.tanh(c)
            h = ifo[:, 2 * H:] * tc
            gates[:, t, :3 * H], gates[:, t, 3 * H:] = ifo, g
            cs[:, t + 1], tcs[:, t], hs[:, t] = c, tc, h
        return hs, (X, hs, cs, gates, tcs)

    def backward(self, dhs: np.ndarray, cache) -> np.ndarray:
        X, hs, cs, gates, tcs = cache
        B, T, H = hs.shape
        da = np.zeros_like(gates)
        dh_next = np.zeros((B, H), hs.dtype)
        dc_next = np.zeros((B, H), hs.dtype)
        Wh = self.Wh.value
        for t in reversed(range(T)):
            i, f, o, g = (gates[:, t, k * H:(k + 1) * H] for k in range(4))
            dh = dhs[:, t] + dh_next
            dc = dc_next + dh * o * (1 - tcs[:, t] ** 2)
            da[:, t, :H] = dc * g * i * (1 - i)
            da[:, t, H:2 * H] = dc * cs[:, t] * f * (1 - f)
            da[:, t, 2 * H:3 * H] = dh * tcs[:, t] * o * (1 - o)
            da[:, t, 3 * H:] = dc * i * (1 - g * g)
            dc_next = dc * f
            dh_next = da[:, t] @ Wh
        flat = da.reshape(B * T, 4 * H)
        self.Wx.grad += flat.T @ X.reshape(B * T, -1)
        h_prev = np.concatenate([np.zeros((B, 1, H), hs.dtype), hs[:, :-1]], axis=1)
        self.Wh.grad += flat.T @ h_prev.reshape(B * T, H)
        self.b.grad += flat.sum(axis=0)
        return da @ self.Wx.value


class LstmModel:
    def __init__(self, input_size: int, nh: int, rng: Rng | None = None, dtype=DTYPE):
        if input_size < 1 or nh < 1:
            raise UsageError("input_size and nh must be positive")
        self.layer1 = LSTMLayer(input_size, nh, rng, "lstm1", dtype)
        self.layer2 = LSTMLayer(nh, nh, rng, "lstm2", dtype)
        self.head = Dense(nh, 1, "sigmoid", rng, "head", dtype)

    @property
    def input_size(self) -> int:
        return self.layer1.input_size

    @property
    def nh(self) -> int:
        return self.layer1.hidden

    @property
    def hyper(self) -> dict:
        return {"input_size": self.input_size, "nh": self.nh}

    def params(self) -> list[Param]:
        return self.layer1.params() + self.layer2.params() + self.head.params()

    def astype(self, dtype) -> "LstmModel":
        out = copy.deepcopy(self)
        for p in out.params():
            p.value = p.value.astype(dtype)
            p.grad = p.grad.astype(dtype)
        return out

    def _pad(self, seqs) -> tuple[np.ndarray, np.ndarray]:
        arrays = [np.asarray(s.features if isinstance(s, FeatureSequence) else s) for s in seqs]
        if not arrays:
            raise UsageError("no sequences given")
        for a in arrays:
            if a.ndim != 2 or a.shape[0] == 0:
                raise UsageError(f"sequences must be non-empty (T, d) arrays, got shape {a.shape}")
            if a.shape[1] != self.input_size:
                raise ShapeError(f"feature size {a.shape[1]} != model input size {self.input_size}")
        lengths = np.array([a.shape[0] for a in arrays])
        X = np.zeros((len(arrays), lengths.max(), self.input_size), self.head.W.value.dtype)
        for k, a in enumerate(arrays):
            X[k, :a.shape[0]] = a
        return X, lengths

    def forward_batch(self, seqs) -> np.ndarray:
        X, lengths = self._pad(seqs)
        h1, _ = self.layer1.forward(X)
        h2, _ = self.layer2.forward(h1)
        last = h2[np.arange(len(lengths)), lengths - 1]
        return self.head.apply(last)[:, 0]

    def loss_and_grad(self, seqs, labels) -> float:
        X, lengths = self._pad(seqs)
        B = len(lengths)
        h1, c1 = self.layer1.forward(X)
        h2, c2 = self.layer2.forward(h1)
        idx = np.arange(B), lengths - 1
        p = self.head.forward(h2[idx])[:, 0]
        loss, dp = half_mse(p, np.asarray(labels))
        dlast = self.head.backward(dp[:, None])
        dh2 = np.zeros_like(h2)
        dh2[idx] = dlast
        self.layer1.backward(self.layer2.backward(dh2, c2), c1)
        return loss


def lstm_forward(model: LstmModel, seq) -> float:
    return float(model.forward_batch([seq])[0])


def lstm_loss(predictions, labels) -> float:
    return half_mse(np.asarray(predictions, dtype=np.float64), np.asarray(labels))[0]


def predict(model: LstmModel, seq, threshold: float = 0.5) -> tuple[float, int]:
    """Probability of poor outcome and the hard class (ties go to poor)."""
    p = lstm_forward(model, seq)
    return p, int(p >= threshold)


@dataclass
class LstmTrainConfig:
    optimizer: str = "adam"
    lr: float = 1e-4
    max_epochs: int = 1000
    batch_size: int = 32
    patience: int = 20
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise UsageError("patience must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise UsageError("val_fraction must lie in (0, 1)")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise UsageError("max_epochs and batch_size must be >= 1")


@dataclass
class LstmTrainResult:
    model: LstmModel
    train_trace: list[float] = field(default_factory=list)
    val_trace: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0


def evaluate_loss(model: LstmModel, seqs) -> float:
    return lstm_loss(model.forward_batch(seqs), [s.label for s in seqs])


def split_validation(seqs, fraction: float, seed: int):
    """Stratified hold-out: round(fraction * n_class) of each class, at least one overall."""
    rng = Rng(seed)
    train, val = [], []
    for label in sorted({s.label for s in seqs}):
        group = rng.shuffle([s for s in seqs if s.label == label])
        k = int(np.floor(fraction * len(group) + 0.5))
        k = min(k, len(group) - 1) if len(group) > 1 else 0
        val += group[:k]
        train += group[k:]
    if not val:
        val, train = train[:1], train[1:]
    if not train:
        raise UsageError("too few sequences to carve out a validation set")
    return train, val


def train_lstm(model: LstmModel, train, val, config: LstmTrainConfig) -> LstmTrainResult:
    """Mini-batch BPTT with early stopping on validation half-MSE.

    Stops once ``patience`` epochs pass without a strict improvement and
    returns the weights from the best validation epoch.
    """
    train, val = list(train), list(val)
    if not train or not val:
        raise UsageError("train and validation sets must be non-empty")
    rng = Rng(config.seed)
    opt = make_optimizer(config.optimizer, config.lr)
    params = model.params()
    result = LstmTrainResult(model)
    best_loss, best_state = np.inf, None
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train))
        for start in range(0, len(train), config.batch_size):
            batch = [train[k] for k in order[start:start + config.batch_size]]
            loss = model.loss_and_grad(batch, [s.label for s in batch])
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite LSTM loss at epoch {epoch}")
            opt.step(params)
        tr, vl = evaluate_loss(model, train), evaluate_loss(model, val)
        if not (np.isfinite(tr) and np.isfinite(vl)):
            raise TrainingError(f"non-finite LSTM loss at epoch {epoch}")
        result.train_trace.append(tr)
        result.val_trace.append(vl)
        result.stopped_epoch = epoch
        if vl < best_loss:
            best_loss, result.best_epoch = vl, epoch
            best_state = [p.value.copy() for p in params]
        elif epoch - result.best_epoch >= config.patience:
            break
    for p, v in zip(params, best_state):
        p.value[...] = v
    log.debug("lstm stopped at epoch %d (best %d, val %.5f)", result.stopped_epoch, result.best_epoch, best_loss)
    return result
