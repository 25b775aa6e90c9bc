"""Shared numpy building blocks for the from-scratch models.

Everything here is float64 and free of hidden state so training runs are
bit-reproducible under a fixed seed.  Each forward returns the cache its
backward needs; backward passes are hand-derived and covered by the central
finite-difference checks in ``models.gradient_check``.
"""

from __future__ import annotations

import numpy as np

PROB_FLOOR = 1e-12  # probabilities are floored before logs to avoid -inf


def init_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """Uniform init on [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - np.max(z, axis=axis, keepdims=True)
    ez = np.exp(shifted)
    return ez / np.sum(ez, axis=axis, keepdims=True)


def log_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = z - np.max(z, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over rows; returns (loss, dlogits).

    ``targets`` holds one class index per row.
    """
    n = logits.shape[0]
    logp = log_softmax(logits, axis=1)
    loss = -float(np.mean(logp[np.arange(n), targets]))
    dlogits = softmax(logits, axis=1)
    dlogits[np.arange(n), targets] -= 1.0
    return loss, dlogits / n


def binary_cross_entropy(scores: np.ndarray, targets: np.ndarray,
                         weights: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Weighted mean sigmoid cross-entropy on raw scores; returns (loss, dscores)."""
    p = sigmoid(scores)
    p = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    w = np.ones_like(p) if weights is None else weights
    per = -(targets * np.log(p) + (1.0 - targets) * np.log(1.0 - p))
    denom = float(np.sum(w))
    loss = float(np.sum(w * per)) / denom
    dscores = w * (p - targets) / denom
    return loss, dscores


# --- dense / activation layers ------------------------------------------------


def dense_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    return x @ W + b, (x, W)


def dense_backward(dout: np.ndarray, cache):
    x, W = cache
    return dout @ W.T, x.T @ dout, np.sum(dout, axis=0)


def tanh_forward(z: np.ndarray):
    out = np.tanh(z)
    return out, out


def tanh_backward(dout: np.ndarray, out: np.ndarray) -> np.ndarray:
    return dout * (1.0 - out * out)


def relu_forward(z: np.ndarray):
    out = np.maximum(z, 0.0)
    return out, z


def relu_backward(dout: np.ndarray, z: np.ndarray) -> np.ndarray:
    return dout * (z > 0.0)


# --- gated recurrent (LSTM) cell ----------------------------------------------
#
# Single step, gates stacked as [input i | forget f | cell g | output o]:
#   a      = x @ Wx + h_prev @ Wh + b          (B, 4H)
#   i, f, o = sigmoid(a_i), sigmoid(a_f), sigmoid(a_o)
#   g      = tanh(a_g)
#   c      = f * c_prev + i * g
#   h      = o * tanh(c)


def lstm_step_forward(x, h_prev, c_prev, Wx, Wh, b):
    H = h_prev.shape[1]
    a = x @ Wx + h_prev @ Wh + b
    i = sigmoid(a[:, 0 * H:1 * H])
    f = sigmoid(a[:, 1 * H:2 * H])
    g = np.tanh(a[:, 2 * H:3 * H])
    o = sigmoid(a[:, 3 * H:4 * H])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = (x, h_prev, c_prev, Wx, Wh, i, f, g, o, c, tc)
    return h, c, cache


def lstm_step_backward(dh, dc, cache):
    """Backward for one step; dh/dc are gradients w.r.t. this step's h and c."""
    x, h_prev, c_prev, Wx, Wh, i, f, g, o, c, tc = cache
    do = dh * tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    di = dc_total * g
    df = dc_total * c_prev
    dg = dc_total * i
    dc_prev = dc_total * f
    da_i = di * i * (1.0 - i)
    da_f = df * f * (1.0 - f)
    da_g = dg * (1.0 - g * g)
    da_o = do * o * (1.0 - o)
    da = np.concatenate([da_i, da_f, da_g, da_o], axis=1)
    dx = da @ Wx.T
    dh_prev = da @ Wh.T
    dWx = x.T @ da
    dWh = h_prev.T @ da
    db = np.sum(da, axis=0)
    return dx, dh_prev, dc_prev, dWx, dWh, db


# --- 1-D convolution over a short window ---------------------------------------


def conv1d_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray):
    """Valid-mode 1-D convolution of (B, L) inputs with (F, K) filters -> (B, F, L-K+1)."""
    B, L = x.shape
    F, K = W.shape
    P = L - K + 1
    out = np.empty((B, F, P))
    for p in range(P):
        out[:, :, p] = x[:, p:p + K] @ W.T + b
    return out, (x, W)


def conv1d_backward(dout: np.ndarray, cache):
    x, W = cache
    B, L = x.shape
    F, K = W.shape
    P = L - K + 1
    dx = np.zeros_like(x)
    dW = np.zeros_like(W)
    db = np.sum(dout, axis=(0, 2))
    for p in range(P):
        dx[:, p:p + K] += dout[:, :, p] @ W
        dW += dout[:, :, p].T @ x[:, p:p + K]
    return dx, dW, db


def maxpool_forward(x: np.ndarray):
    """Global max over the last axis of (B, F, P); returns (B, F)."""
    idx = np.argmax(x, axis=2)
    out = np.take_along_axis(x, idx[:, :, None], axis=2)[:, :, 0]
    return out, (x.shape, idx)


def maxpool_backward(dout: np.ndarray, cache):
    shape, idx = cache
    dx = np.zeros(shape)
    np.put_along_axis(dx, idx[:, :, None], dout[:, :, None], axis=2)
    return dx


# --- optimizers -----------------------------------------------------------------


class SGD:
    """Plain gradient descent over a dict of parameter arrays."""

    def __init__(self, params: dict[str, np.ndarray], lr: float):
        self.params = params
        self.lr = lr

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            p -= self.lr * grads[name]


class Adam:
    """Adaptive-moment estimation with bias correction."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / b1t
            v_hat = self.v[name] / b2t
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, params: dict[str, np.ndarray], lr: float):
    if kind == "adam":
        return Adam(params, lr)
    if kind == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")
