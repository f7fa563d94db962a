"""Hand-derived building blocks: parameters, dense layer, losses, optimizers
and a finite-difference gradient checker.

Forward contractions go through ``np.einsum`` (not BLAS) because its result
for one row does not depend on how many other rows are in the batch; several
invariants elsewhere rely on batched and single-sample outputs being bitwise
equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError, StateError, TrainingError, UsageError
from .rng import Rng

DTYPE = np.float32


@dataclass(eq=False)
class Param:
    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape:
            raise ShapeError(f"{self.name}: grad {self.grad.shape} != value {self.value.shape}")

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1] if self.value.ndim > 1 else 1

    def zero_grad(self):
        self.grad[...] = 0

    def astype(self, dtype) -> "Param":
        return Param(self.name, self.value.astype(dtype), self.grad.astype(dtype))


def glorot(rng: Rng, rows: int, cols: int, dtype=DTYPE) -> np.ndarray:
    r = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-r, r, size=(rows, cols)).astype(dtype)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic function, clipped so outputs stay strictly inside (0, 1)."""
    z = np.asarray(z)
    out = 0.5 * (1.0 + np.tanh(0.5 * z))
    dt = out.dtype
    return np.clip(out, np.finfo(dt).tiny, np.nextafter(dt.type(1), dt.type(0)))


def _identity(z):
    return z


# activation name -> (f, derivative expressed through the output y = f(z))
ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "sigmoid": (sigmoid, lambda y: y * (1 - y)),
    "tanh": (np.tanh, lambda y: 1 - y * y),
    "identity": (_identity, np.ones_like),
}


def contract(x: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``x @ W.T`` over the last axis of ``x``, batch-invariant."""
    # einsum picks a different inner loop for 1-D operands; always contract rows
    flat = np.ascontiguousarray(x).reshape(-1, x.shape[-1])
    return np.einsum("nd,hd->nh", flat, W).reshape(*x.shape[:-1], W.shape[0])


class Dense:
    """Fully-connected layer ``y = act(W x + b)`` with ``W`` of shape (out, in)."""

    def __init__(self, in_dim: int, out_dim: int, activation: str = "identity",
                 rng: Rng | None = None, name: str = "dense", dtype=DTYPE):
        if activation not in ACTIVATIONS:
            raise UsageError(f"unknown activation {activation!r}")
        W = glorot(rng, out_dim, in_dim, dtype) if rng is not None else np.zeros((out_dim, in_dim), dtype)
        self.W = Param(f"{name}.W", W)
        self.b = Param(f"{name}.b", np.zeros(out_dim, dtype))
        self.activation = activation
        self._cache = None

    @property
    def in_dim(self) -> int:
        return self.W.value.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W.value.shape[0]

    def params(self) -> list[Param]:
        return [self.W, self.b]

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Pure forward pass; never touches the cache."""
        x = np.asarray(x, dtype=self.W.value.dtype)
        if x.shape[-1:] != (self.in_dim,) or self.b.value.shape != (self.out_dim,):
            raise ShapeError(f"input {x.shape} incompatible with W {self.W.value.shape}, b {self.b.value.shape}")
        f, _ = ACTIVATIONS[self.activation]
        return f(contract(x, self.W.value) + self.b.value)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y = self.apply(x)
        self._cache = (np.asarray(x, dtype=self.W.value.dtype), y)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        """Accumulate dW, db from the cached forward; return dL/dx."""
        if self._cache is None:
            raise StateError(f"{self.W.name}: backward called without a cached forward pass")
        x, y = self._cache
        dy = np.asarray(dy, dtype=y.dtype)
        if dy.shape != y.shape:
            raise ShapeError(f"upstream grad {dy.shape} != output {y.shape}")
        dz = dy * ACTIVATIONS[self.activation][1](y)
        x2, dz2 = x.reshape(-1, self.in_dim), dz.reshape(-1, self.out_dim)
        self.W.grad += dz2.T @ x2
        self.b.grad += dz2.sum(axis=0)
        return dz @ self.W.value

    def astype(self, dtype) -> "Dense":
        out = Dense(self.in_dim, self.out_dim, self.activation, dtype=dtype)
        out.W = self.W.astype(dtype)
        out.b = self.b.astype(dtype)
        return out


def dense_forward(x, W: Param, b: Param, activation: str) -> np.ndarray:
    if W.value.ndim != 2 or len(x) != W.cols or b.value.shape[0] != W.rows:
        raise ShapeError(f"x {np.shape(x)}, W {W.value.shape}, b {b.value.shape}")
    layer = Dense(W.cols, W.rows, activation, dtype=W.value.dtype)
    layer.W, layer.b = W, b
    return layer.apply(x)


def half_mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """L = sum((p - y)^2) / (2N) and dL/dp."""
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    if pred.shape != target.shape or pred.size == 0:
        raise UsageError(f"predictions {pred.shape} vs labels {target.shape}")
    n = pred.shape[0]
    diff = pred - target
    return float(np.sum(diff * diff) / (2 * n)), diff / n


# ---------------------------------------------------------------------------
# optimizers


class Optimizer:
    kind = "base"

    def __init__(self, lr: float):
        if not lr > 0:
            raise UsageError(f"learning rate must be positive, got {lr}")
        self.lr = lr
        self.t = 0

    def step(self, params: Sequence[Param]):
        for p in params:
            if not np.all(np.isfinite(p.grad)):
                raise TrainingError(f"non-finite gradient in {p.name}")
        self.t += 1
        self._update(params)
        for p in params:
            p.zero_grad()

    def _update(self, params):
        raise NotImplementedError


class SGD(Optimizer):
    kind = "sgd"

    def _update(self, params):
        for p in params:
            p.value -= (self.lr * p.grad).astype(p.value.dtype)


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def _update(self, params):
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p in params:
            if p.name not in self.m:
                self.m[p.name] = np.zeros_like(p.value)
                self.v[p.name] = np.zeros_like(p.value)
            m, v = self.m[p.name], self.v[p.name]
            m *= self.beta1
            m += (1 - self.beta1) * p.grad
            v *= self.beta2
            v += (1 - self.beta2) * p.grad * p.grad
            p.value -= (self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)).astype(p.value.dtype)


def make_optimizer(kind: str, lr: float) -> Optimizer:
    if kind == "sgd":
        return SGD(lr)
    if kind == "adam":
        return Adam(lr)
    raise UsageError(f"unknown optimizer {kind!r}")


def check_names(params: Sequence[Param]):
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise UsageError(f"duplicate parameter names: {names}")


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckResult:
    max_relative_error: float
    n_checked: int
    n_nonfinite: int = 0
    worst: tuple[str, tuple] | None = None

    def passed(self, tolerance: float) -> bool:
        return self.n_nonfinite == 0 and self.max_relative_error < tolerance


def gradient_check(loss_fn: Callable[[], float], params: Sequence[Param], step: float = 1e-5,
                   tolerance: float = 1e-4, n_samples: int | None = 20, rng: Rng | None = None,
                   floor: float = 1e-8) -> GradCheckResult:
    """Compare analytic gradients against central differences.

    ``loss_fn`` returns the scalar loss and adds its analytic gradient into
    every ``Param.grad``. It is called once on cleared grads, then again at
    each perturbed value (gradient side effects of those calls are
    discarded). ``n_samples`` entries are drawn per parameter (``None``
    checks every entry). Relative error is ``|a - n| / max(|a| + |n|, floor)``.
    """
    if step <= 0:
        raise UsageError("step must be positive")
    rng = rng or Rng(0)
    for p in params:
        p.zero_grad()
    loss_fn()
    analytic = [p.grad.copy() for p in params]

    worst, worst_at, n_checked, n_bad = 0.0, None, 0, 0
    for p, g in zip(params, analytic):
        flat = p.value.reshape(-1)
        size = flat.size
        if n_samples is None or n_samples >= size:
            idx = np.arange(size)
        else:
            idx = rng.permutation(size)[:n_samples]
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_fn()
            flat[i] = orig - step
            lm = loss_fn()
            flat[i] = orig
            num = (lp - lm) / (2 * step)
            a = g.reshape(-1)[i]
            n_checked += 1
            if not (np.isfinite(num) and np.isfinite(a)):
                n_bad += 1
                continue
            rel = abs(a - num) / max(abs(a) + abs(num), floor)
            if rel > worst:
                worst, worst_at = float(rel), (p.name, np.unravel_index(i, p.value.shape))
    for p in params:
        p.zero_grad()
    return GradCheckResult(worst, n_checked, n_bad, worst_at)
