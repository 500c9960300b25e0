"""Dense numeric core: GRU cell, softmax losses, categorical sampling, Adam.

Everything is float64 and operates on plain numpy arrays.  Forward functions
accept either a single vector or a batch stacked along the first axis; the
backward functions return gradients summed over the batch where a parameter
is shared.  All gradients are hand-derived and checked against central finite
differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TrainingDiverged

# Pseudorandom generator used everywhere.  The algorithm is recorded in run
# metadata so results can be regenerated on another machine.
RNG_ALGORITHM = "numpy-pcg64"


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rng(rng: np.random.Generator) -> np.random.Generator:
    """Derive an independent child generator from `rng`."""
    return np.random.Generator(np.random.PCG64(int(rng.integers(0, 2**63))))


def init_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] with fan_in = cols."""
    bound = 1.0 / math.sqrt(cols)
    return rng.uniform(-bound, bound, size=(rows, cols))


def check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise TrainingDiverged(f"non-finite values in {name}")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class GruParams:
    """Single GRU cell: W_* map the input, U_* the previous hidden state."""

    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "GruParams":
        if input_size < 1 or hidden_size < 1:
            raise ConfigError("GRU sizes must be positive")
        W = lambda: init_matrix(hidden_size, input_size, rng)
        U = lambda: init_matrix(hidden_size, hidden_size, rng)
        b = lambda: np.zeros(hidden_size)
        return cls(W(), W(), W(), U(), U(), U(), b(), b(), b())

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_z.shape[1]

    def named(self) -> dict[str, np.ndarray]:
        return {
            "W_z": self.W_z, "W_r": self.W_r, "W_h": self.W_h,
            "U_z": self.U_z, "U_r": self.U_r, "U_h": self.U_h,
            "b_z": self.b_z, "b_r": self.b_r, "b_h": self.b_h,
        }


@dataclass
class GruCache:
    """Forward activations needed by gru_step_backward."""

    x: np.ndarray
    h: np.ndarray
    z: np.ndarray
    r: np.ndarray
    hbar: np.ndarray
    params: GruParams


def gru_step(x: np.ndarray, h: np.ndarray, p: GruParams) -> tuple[np.ndarray, GruCache]:
    """One cell update.

    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    hbar = tanh(W_h x + U_h (r*h) + b_h)
    h' = z*h + (1-z)*hbar

    `x` is (input_size,) or (batch, input_size); `h` matches with hidden_size.
    """
    if x.shape[-1] != p.input_size:
        raise ConfigError(f"gru input size {x.shape[-1]} != {p.input_size}")
    if h.shape[-1] != p.hidden_size:
        raise ConfigError(f"gru hidden size {h.shape[-1]} != {p.hidden_size}")
    z = sigmoid(x @ p.W_z.T + h @ p.U_z.T + p.b_z)
    r = sigmoid(x @ p.W_r.T + h @ p.U_r.T + p.b_r)
    hbar = np.tanh(x @ p.W_h.T + (r * h) @ p.U_h.T + p.b_h)
    h_new = z * h + (1.0 - z) * hbar
    return h_new, GruCache(x=x, h=h, z=z, r=r, hbar=hbar, params=p)


def gru_step_backward(
    cache: GruCache, grad_h_new: np.ndarray
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Gradients of the step above given d(loss)/d(h').

    Returns (d_x, d_h, d_params); parameter gradients are summed over the
    batch axis when the inputs were batched.
    """
    p = cache.params
    x2 = np.atleast_2d(cache.x)
    h2 = np.atleast_2d(cache.h)
    z2 = np.atleast_2d(cache.z)
    r2 = np.atleast_2d(cache.r)
    hbar2 = np.atleast_2d(cache.hbar)
    g2 = np.atleast_2d(grad_h_new)
    if g2.shape != z2.shape:
        raise ConfigError("upstream gradient shape does not match the cached forward")

    d_z = g2 * (h2 - hbar2)
    d_hbar = g2 * (1.0 - z2)
    d_h = g2 * z2

    d_ah = d_hbar * (1.0 - hbar2 * hbar2)          # pre-tanh
    d_rh = d_ah @ p.U_h                             # through U_h (r*h)
    d_r = d_rh * h2
    d_h = d_h + d_rh * r2

    d_az = d_z * z2 * (1.0 - z2)                    # pre-sigmoid, update gate
    d_ar = d_r * r2 * (1.0 - r2)                    # pre-sigmoid, reset gate
    d_h = d_h + d_az @ p.U_z + d_ar @ p.U_r
    d_x = d_ah @ p.W_h + d_az @ p.W_z + d_ar @ p.W_r

    grads = {
        "W_z": d_az.T @ x2, "W_r": d_ar.T @ x2, "W_h": d_ah.T @ x2,
        "U_z": d_az.T @ h2, "U_r": d_ar.T @ h2, "U_h": d_ah.T @ (r2 * h2),
        "b_z": d_az.sum(axis=0), "b_r": d_ar.sum(axis=0), "b_h": d_ah.sum(axis=0),
    }
    if grad_h_new.ndim == 1:
        d_x = d_x[0]
        d_h = d_h[0]
    return d_x, d_h, grads


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(logits: np.ndarray, target: int) -> tuple[float, np.ndarray]:
    """Loss -log softmax(logits)[target] and its gradient wrt the logits."""
    if logits.ndim != 1:
        raise ConfigError("softmax_cross_entropy expects a single logit vector")
    if not 0 <= target < logits.shape[0]:
        raise ValueError(f"target {target} out of range for {logits.shape[0]} classes")
    logp = log_softmax(logits)
    grad = np.exp(logp)
    grad[target] -= 1.0
    return -logp[target], grad


def softmax_cross_entropy_rows(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise cross-entropy: logits (N, K), targets (N,) -> losses (N,), grads (N, K)."""
    if np.any(targets < 0) or np.any(targets >= logits.shape[-1]):
        raise ValueError("target index out of range")
    logp = log_softmax(logits)
    rows = np.arange(logits.shape[0])
    grads = np.exp(logp)
    grads[rows, targets] -= 1.0
    return -logp[rows, targets], grads


def entropy_of_logits(logits: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) of softmax(logits) along the last axis."""
    logp = log_softmax(logits)
    return -(np.exp(logp) * logp).sum(axis=-1)


def entropy_grad_logits(logits: np.ndarray) -> np.ndarray:
    """dH/d(logits) for H = entropy of softmax(logits), along the last axis."""
    logp = log_softmax(logits)
    p = np.exp(logp)
    H = -(p * logp).sum(axis=-1, keepdims=True)
    return -p * (logp + H)


def categorical_sample(logits: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one class index distributed as softmax(logits)."""
    if logits.size == 0:
        raise ValueError("cannot sample from empty logits")
    return int(categorical_sample_rows(logits[None, :], rng)[0])


def categorical_sample_rows(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of logits (N, K) -> indices (N,)."""
    if logits.shape[-1] == 0:
        raise ValueError("cannot sample from empty logits")
    cdf = softmax(logits).cumsum(axis=-1)
    u = rng.random(logits.shape[0])
    idx = (cdf < u[:, None]).sum(axis=-1)
    return np.minimum(idx, logits.shape[-1] - 1)


def greedy_argmax(logits: np.ndarray) -> int:
    """Argmax with ties broken toward the lowest index."""
    if logits.size == 0:
        raise ValueError("cannot take argmax of empty logits")
    return int(np.argmax(logits))


@dataclass
class AdamState:
    """Adam moments for a named collection of parameter arrays."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int
    lr: float
    beta1: float
    beta2: float
    eps: float

    @classmethod
    def for_params(
        cls,
        params: dict[str, np.ndarray],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
            lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_update(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState
) -> None:
    """Bias-corrected Adam step, applied to `params` in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ConfigError(f"gradient shape mismatch for {key}")
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** state.t)
        v_hat = v / (1.0 - b2 ** state.t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
