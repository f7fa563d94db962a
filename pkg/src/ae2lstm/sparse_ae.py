"""Single-hidden-layer sparse autoencoder.

Objective for a batch X of N rows::

    total = mse + lam * l2 + beta * kl
    mse   = sum((X - R)^2) / (N * input_dim)
    l2    = 0.5 * (sum(W_enc^2) + sum(W_dec^2))          # biases excluded
    kl    = sum_j rho*ln(rho/q_j) + (1-rho)*ln((1-rho)/(1-q_j))

where q_j is the batch-mean activation of code unit j, clamped to
[1e-7, 1 - 1e-7]. Encoder and decoder both use the logistic activation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, TrainingError, UsageError
from .nn import DTYPE, Dense, Param, make_optimizer
from .rng import Rng

log = logging.getLogger(__name__)

KL_CLAMP = 1e-7


@dataclass
class AeTrainConfig:
    max_epochs: int = 400
    batch_size: int = 32
    optimizer: str = "sgd"
    lr: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise UsageError("max_epochs must be >= 1")
        if self.batch_size < 1:
            raise UsageError("batch_size must be >= 1")


@dataclass
class AeLoss:
    total: float
    mse: float
    l2: float
    kl: float


def kl_sparsity(rho: float, rho_hat: np.ndarray) -> float:
    q = np.clip(rho_hat, KL_CLAMP, 1 - KL_CLAMP)
    return float(np.sum(rho * np.log(rho / q) + (1 - rho) * np.log((1 - rho) / (1 - q))))


class SparseAE:
    def __init__(self, input_dim: int, code_dim: int, rho: float = 0.05, beta: float = 4.0,
                 lam: float = 0.004, rng: Rng | None = None, dtype=DTYPE, name: str = "ae"):
        if not 0 < rho < 1:
            raise UsageError(f"rho must lie in (0, 1), got {rho}")
        if beta < 0 or lam < 0:
            raise UsageError("beta and lam must be non-negative")
        if input_dim < 1 or code_dim < 1:
            raise UsageError("dimensions must be positive")
        self.rho, self.beta, self.lam = float(rho), float(beta), float(lam)
        self.name = name
        self.encoder = Dense(input_dim, code_dim, "sigmoid", rng, f"{name}.encoder", dtype)
        self.decoder = Dense(code_dim, input_dim, "sigmoid", rng, f"{name}.decoder", dtype)

    @property
    def input_dim(self) -> int:
        return self.encoder.in_dim

    @property
    def code_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def hyper(self) -> dict:
        return {"input_dim": self.input_dim, "code_dim": self.code_dim,
                "rho": self.rho, "beta": self.beta, "lam": self.lam}

    def params(self) -> list[Param]:
        return self.encoder.params() + self.decoder.params()

    def astype(self, dtype) -> "SparseAE":
        out = SparseAE(self.input_dim, self.code_dim, self.rho, self.beta, self.lam, dtype=dtype, name=self.name)
        out.encoder = self.encoder.astype(dtype)
        out.decoder = self.decoder.astype(dtype)
        return out

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1:] != (self.input_dim,):
            raise ShapeError(f"{self.name}: input of shape {x.shape}, expected last dim {self.input_dim}")
        return self.encoder.apply(x)

    def decode(self, code: np.ndarray) -> np.ndarray:
        code = np.asarray(code)
        if code.shape[-1:] != (self.code_dim,):
            raise ShapeError(f"{self.name}: code of shape {code.shape}, expected last dim {self.code_dim}")
        return self.decoder.apply(code)

    def _terms(self, X, H, R) -> AeLoss:
        n = X.shape[0]
        diff = (X - R).astype(np.float64)
        mse = float(np.sum(diff * diff) / (n * self.input_dim))
        l2 = 0.5 * float(np.sum(self.encoder.W.value.astype(np.float64) ** 2)
                         + np.sum(self.decoder.W.value.astype(np.float64) ** 2))
        kl = kl_sparsity(self.rho, H.mean(axis=0).astype(np.float64))
        return AeLoss(mse + self.lam * l2 + self.beta * kl, mse, l2, kl)

    def _check_batch(self, X):
        X = np.asarray(X, dtype=self.encoder.W.value.dtype)
        if X.ndim != 2 or X.shape[0] == 0:
            raise UsageError(f"{self.name}: expected a non-empty 2-D batch, got shape {X.shape}")
        if X.shape[1] != self.input_dim:
            raise ShapeError(f"{self.name}: batch width {X.shape[1]} != input_dim {self.input_dim}")
        return X

    def loss(self, X) -> AeLoss:
        X = self._check_batch(X)
        H = self.encode(X)
        return self._terms(X, H, self.decode(H))

    def loss_and_grad(self, X) -> AeLoss:
        """Forward + backward; accumulates into every parameter's grad."""
        X = self._check_batch(X)
        n = X.shape[0]
        H = self.encoder.forward(X)
        R = self.decoder.forward(H)
        out = self._terms(X, H, R)

        dH = self.decoder.backward(2.0 * (R - X) / (n * self.input_dim))
        q = H.mean(axis=0)
        inside = (q > KL_CLAMP) & (q < 1 - KL_CLAMP)
        dq = np.where(inside, -self.rho / q + (1 - self.rho) / (1 - q), 0.0)
        dH = dH + (self.beta / n) * dq.astype(dH.dtype)
        self.encoder.backward(dH)
        self.encoder.W.grad += self.lam * self.encoder.W.value
        self.decoder.W.grad += self.lam * self.decoder.W.value
        return out


def ae_loss(model: SparseAE, batch) -> AeLoss:
    return model.loss(batch)


def train_ae(model: SparseAE, data, config: AeTrainConfig) -> tuple[SparseAE, list[float]]:
    """Mini-batch training on ``data`` (N x input_dim).

    Returns the (in-place) trained model and the full-dataset total loss
    recorded after each epoch.
    """
    data = np.asarray(data, dtype=model.encoder.W.value.dtype)
    if data.ndim != 2 or data.shape[0] == 0:
        raise UsageError(f"{model.name}: empty or non-2-D dataset {data.shape}")
    if data.shape[1] != model.input_dim:
        raise ShapeError(f"{model.name}: data width {data.shape[1]} != input_dim {model.input_dim}")
    rng = Rng(config.seed)
    opt = make_optimizer(config.optimizer, config.lr)
    params = model.params()
    n = data.shape[0]
    trace = []
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            model.loss_and_grad(data[order[start:start + config.batch_size]])
            opt.step(params)
        total = model.loss(data).total
        if not np.isfinite(total):
            raise TrainingError(f"{model.name}: non-finite loss at epoch {epoch}")
        trace.append(total)
        if epoch == 1 or epoch % 50 == 0:
            log.debug("%s epoch %d loss %.6f", model.name, epoch, total)
    return model, trace
